mod common;

use common::{complex_ybus, fd_jacobian, feeder, full_plan, max_rel_err, oracle_h};
use lbse_core::measurement::{power_outputs, MeasurementKind};
use lbse_core::{eval_h, eval_jacobian, StateVector};
use proptest::prelude::*;

fn state_strategy(n: usize) -> impl Strategy<Value = StateVector> {
    (
        prop::collection::vec(0.9..1.1f64, n),
        prop::collection::vec(-0.5..0.5f64, n),
    )
        .prop_map(|(v, th)| StateVector::new(v, th, 0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn measurement_functions_match_complex_power(x in state_strategy(33)) {
        let (net, adm) = feeder();
        let plan = full_plan(&net);
        let h = eval_h(&x, &plan, &adm);
        let oracle = oracle_h(&x, &plan, &net);
        prop_assert!(max_rel_err(h.as_slice(), oracle.as_slice()) <= 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences(x in state_strategy(33)) {
        let (net, adm) = feeder();
        let plan = full_plan(&net);
        let jac = eval_jacobian(&x, &plan, &adm);
        let fd = fd_jacobian(&x, &plan, &adm, 1e-6);
        prop_assert_eq!(jac.shape(), (plan.m(), 65));
        prop_assert!(max_rel_err(jac.as_slice(), fd.as_slice()) <= 1e-5);
    }

    #[test]
    fn powers_are_invariant_to_full_turns(x in state_strategy(33), bus in 1usize..33) {
        let (net, adm) = feeder();
        let plan = full_plan(&net);
        let mut turned = x.theta.clone();
        turned[bus] += std::f64::consts::TAU;
        let y = StateVector::new(x.v.clone(), turned, 0).unwrap();
        let (a, b) = (eval_h(&x, &plan, &adm), eval_h(&y, &plan, &adm));
        for (row, spec) in plan.specs().iter().enumerate() {
            if spec.kind.is_power() {
                prop_assert!((a[row] - b[row]).abs() <= 1e-9 * a[row].abs().max(1.0));
            }
        }
    }

    #[test]
    fn total_losses_are_nonnegative(x in state_strategy(33)) {
        let (_, adm) = feeder();
        let out = power_outputs(&x, &adm);
        let total_injection: f64 = out.p.iter().sum();
        prop_assert!(total_injection >= -1e-9);
    }
}

#[test]
fn admittance_matches_complex_assembly() {
    let (net, adm) = feeder();
    let y = complex_ybus(&net);
    for i in 0..net.n_buses() {
        for j in 0..net.n_buses() {
            assert!((adm.g[(i, j)] - y[(i, j)].re).abs() <= 1e-12 * y[(i, j)].norm().max(1.0));
            assert!((adm.b[(i, j)] - y[(i, j)].im).abs() <= 1e-12 * y[(i, j)].norm().max(1.0));
        }
    }
}

#[test]
fn admittance_is_symmetric_with_shunt_row_sums() {
    let (net, adm) = feeder();
    assert_eq!(adm.g, adm.g.transpose());
    assert_eq!(adm.b, adm.b.transpose());
    for i in 0..net.n_buses() {
        let g_sum: f64 = adm.g.row(i).iter().sum();
        let b_sum: f64 = adm.b.row(i).iter().sum();
        let scale = adm.g[(i, i)].abs().max(adm.b[(i, i)].abs());
        let charging: f64 = net
            .branches
            .iter()
            .filter(|b| {
                b.in_service && (b.from_bus == net.buses[i].id || b.to_bus == net.buses[i].id)
            })
            .map(|b| b.b_sh / 2.0)
            .sum();
        assert!((g_sum - net.buses[i].gs).abs() <= 1e-12 * scale);
        assert!((b_sum - net.buses[i].bs - charging).abs() <= 1e-12 * scale);
    }
}

#[test]
fn jacobian_has_no_slack_angle_column() {
    let (net, adm) = feeder();
    let plan = full_plan(&net);
    let x = StateVector::flat(33, 0);
    let jac = eval_jacobian(&x, &plan, &adm);
    assert_eq!(jac.ncols(), 2 * 33 - 1);
    let slack_angle_row = plan
        .specs()
        .iter()
        .position(|s| s.kind == MeasurementKind::Vang(0))
        .unwrap();
    assert!(jac.row(slack_angle_row).iter().all(|v| *v == 0.0));
}
