#![allow(dead_code)]

use lbse_core::grid::Network;
use lbse_core::measurement::{MeasurementKind, MeasurementSpec, SIGMA_POWER, SIGMA_VOLTAGE};
use lbse_core::nalgebra::{Complex, DMatrix, DVector};
use lbse_core::{
    build_admittance, parse_case, AdmittanceMatrix, MeasurementPlan, StateVector, IEEE33_CASE,
};
use rand::Rng;

pub fn feeder() -> (Network, AdmittanceMatrix) {
    let net = parse_case(IEEE33_CASE).unwrap();
    let adm = build_admittance(&net).unwrap();
    (net, adm)
}

/// Every magnitude, angle, injection and branch flow.
pub fn full_plan(net: &Network) -> MeasurementPlan {
    let (n, nb) = (net.n_buses(), net.n_branches());
    let mut specs = Vec::new();
    for i in 0..n {
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Vmag(i),
            SIGMA_VOLTAGE,
        ));
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Vang(i),
            SIGMA_VOLTAGE,
        ));
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Pinj(i),
            SIGMA_POWER,
        ));
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Qinj(i),
            SIGMA_POWER,
        ));
    }
    for k in 0..nb {
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Pflow(k),
            SIGMA_POWER,
        ));
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Qflow(k),
            SIGMA_POWER,
        ));
    }
    MeasurementPlan::new(specs, n, nb).unwrap()
}

pub fn random_state<R: Rng>(rng: &mut R, n: usize, slack: usize, dv: f64, dth: f64) -> StateVector {
    let v = (0..n)
        .map(|_| rng.random_range(1.0 - dv..1.0 + dv))
        .collect();
    let th = (0..n).map(|_| rng.random_range(-dth..dth)).collect();
    StateVector::new(v, th, slack).unwrap()
}

/// Bus admittance matrix built with complex arithmetic straight from the
/// branch table.
pub fn complex_ybus(net: &Network) -> DMatrix<Complex<f64>> {
    let n = net.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    for (i, bus) in net.buses.iter().enumerate() {
        y[(i, i)] += Complex::new(bus.gs, bus.bs);
    }
    for br in net.branches.iter().filter(|b| b.in_service) {
        let i = net.bus_index(br.from_bus).unwrap();
        let j = net.bus_index(br.to_bus).unwrap();
        let ys = Complex::new(1.0, 0.0) / Complex::new(br.r, br.x);
        let ysh = Complex::new(0.0, br.b_sh / 2.0);
        y[(i, i)] += ys + ysh;
        y[(j, j)] += ys + ysh;
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
    }
    y
}

pub fn phasors(x: &StateVector) -> DVector<Complex<f64>> {
    DVector::from_iterator(
        x.v.len(),
        x.v.iter()
            .zip(&x.theta)
            .map(|(v, t)| Complex::from_polar(*v, *t)),
    )
}

/// Measurement values computed from `S = V conj(I)`.
pub fn oracle_h(x: &StateVector, plan: &MeasurementPlan, net: &Network) -> DVector<f64> {
    let y = complex_ybus(net);
    let u = phasors(x);
    let current = &y * &u;
    let flow = |k: usize| {
        let br = &net.branches[k];
        if !br.in_service {
            return Complex::new(0.0, 0.0);
        }
        let i = net.bus_index(br.from_bus).unwrap();
        let j = net.bus_index(br.to_bus).unwrap();
        let ys = Complex::new(1.0, 0.0) / Complex::new(br.r, br.x);
        let i_ij = ys * (u[i] - u[j]) + Complex::new(0.0, br.b_sh / 2.0) * u[i];
        u[i] * i_ij.conj()
    };
    DVector::from_iterator(
        plan.m(),
        plan.specs().iter().map(|s| match s.kind {
            MeasurementKind::Vmag(i) => u[i].norm(),
            MeasurementKind::Vang(i) => x.theta[i],
            MeasurementKind::Pinj(i) => (u[i] * current[i].conj()).re,
            MeasurementKind::Qinj(i) => (u[i] * current[i].conj()).im,
            MeasurementKind::Pflow(k) => flow(k).re,
            MeasurementKind::Qflow(k) => flow(k).im,
        }),
    )
}

/// Central-difference Jacobian in the free-variable layout.
pub fn fd_jacobian(
    x: &StateVector,
    plan: &MeasurementPlan,
    adm: &AdmittanceMatrix,
    h: f64,
) -> DMatrix<f64> {
    let free = x.to_free();
    let (n, slack) = (x.n_buses(), x.slack());
    let mut jac = DMatrix::zeros(plan.m(), free.len());
    for c in 0..free.len() {
        let mut up = free.clone();
        up[c] += h;
        let mut down = free.clone();
        down[c] -= h;
        let hu = lbse_core::eval_h(&StateVector::from_free(&up, n, slack), plan, adm);
        let hd = lbse_core::eval_h(&StateVector::from_free(&down, n, slack), plan, adm);
        jac.set_column(c, &((hu - hd) / (2.0 * h)));
    }
    jac
}

/// Largest `|a - b| / max(1, |b|)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
