//! Measurement functions, their Jacobian, and measurement plans.
//!
//! All quantities are per unit with angles in radians. Branch flows are
//! always taken at the from-end of the branch.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{AdmittanceMatrix, Network};

/// Noise standard deviation for power injections and flows, p.u.
pub const SIGMA_POWER: f64 = 0.01;
/// Noise standard deviation for voltage magnitudes (p.u.) and angles (rad).
pub const SIGMA_VOLTAGE: f64 = 0.001;

/// Bus voltage magnitudes and angles. The slack angle is pinned to zero and
/// excluded from the free-variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    slack: usize,
}

impl StateVector {
    pub fn new(v: Vec<f64>, mut theta: Vec<f64>, slack: usize) -> Result<Self> {
        if v.len() != theta.len() {
            return Err(Error::Shape {
                expected: v.len(),
                got: theta.len(),
            });
        }
        if slack >= v.len() {
            return Err(Error::Structure(format!(
                "slack index {slack} out of range"
            )));
        }
        theta[slack] = 0.0;
        Ok(StateVector { v, theta, slack })
    }

    /// Flat start: all magnitudes 1 p.u., all angles 0.
    pub fn flat(n: usize, slack: usize) -> Self {
        StateVector {
            v: vec![1.0; n],
            theta: vec![0.0; n],
            slack,
        }
    }

    pub fn n_buses(&self) -> usize {
        self.v.len()
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    /// Number of free variables, `2n - 1`.
    pub fn n_free(&self) -> usize {
        2 * self.v.len() - 1
    }

    /// Free-variable column of bus `j`'s angle, `None` for the slack.
    pub fn theta_col(&self, j: usize) -> Option<usize> {
        theta_col(self.v.len(), self.slack, j)
    }

    /// `[v_1..v_n, theta (all but slack)]`.
    pub fn to_free(&self) -> DVector<f64> {
        let n = self.v.len();
        let mut x = DVector::zeros(2 * n - 1);
        for i in 0..n {
            x[i] = self.v[i];
            if let Some(c) = self.theta_col(i) {
                x[c] = self.theta[i];
            }
        }
        x
    }

    pub fn from_free(x: &DVector<f64>, n: usize, slack: usize) -> Self {
        debug_assert_eq!(x.len(), 2 * n - 1);
        let mut st = StateVector::flat(n, slack);
        for i in 0..n {
            st.v[i] = x[i];
            if let Some(c) = theta_col(n, slack, i) {
                st.theta[i] = x[c];
            }
        }
        st
    }

    /// Apply an increment in free-variable layout.
    pub fn step(&self, dx: &DVector<f64>) -> Self {
        let mut x = self.to_free();
        x += dx;
        StateVector::from_free(&x, self.v.len(), self.slack)
    }
}

fn theta_col(n: usize, slack: usize, j: usize) -> Option<usize> {
    match j.cmp(&slack) {
        std::cmp::Ordering::Less => Some(n + j),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(n + j - 1),
    }
}

/// What a sensor measures. Bus and branch locations are dense 0-based
/// indices into the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeasurementKind {
    Vmag(usize),
    Vang(usize),
    Pinj(usize),
    Qinj(usize),
    Pflow(usize),
    Qflow(usize),
}

impl MeasurementKind {
    pub fn token(&self) -> &'static str {
        match self {
            MeasurementKind::Vmag(_) => "vmag",
            MeasurementKind::Vang(_) => "vang",
            MeasurementKind::Pinj(_) => "pinj",
            MeasurementKind::Qinj(_) => "qinj",
            MeasurementKind::Pflow(_) => "pflow",
            MeasurementKind::Qflow(_) => "qflow",
        }
    }

    pub fn location(&self) -> usize {
        match *self {
            MeasurementKind::Vmag(i)
            | MeasurementKind::Vang(i)
            | MeasurementKind::Pinj(i)
            | MeasurementKind::Qinj(i)
            | MeasurementKind::Pflow(i)
            | MeasurementKind::Qflow(i) => i,
        }
    }

    pub fn is_branch(&self) -> bool {
        matches!(self, MeasurementKind::Pflow(_) | MeasurementKind::Qflow(_))
    }

    pub fn is_power(&self) -> bool {
        !matches!(self, MeasurementKind::Vmag(_) | MeasurementKind::Vang(_))
    }

    fn from_token(token: &str, loc: usize) -> Option<Self> {
        Some(match token {
            "vmag" => MeasurementKind::Vmag(loc),
            "vang" => MeasurementKind::Vang(loc),
            "pinj" => MeasurementKind::Pinj(loc),
            "qinj" => MeasurementKind::Qinj(loc),
            "pflow" => MeasurementKind::Pflow(loc),
            "qflow" => MeasurementKind::Qflow(loc),
            _ => return None,
        })
    }

    /// Human-readable label using external bus ids and 1-based branch
    /// numbers, e.g. `pinj_19`.
    pub fn label(&self, net: &Network) -> String {
        let loc = if self.is_branch() {
            self.location() + 1
        } else {
            net.buses[self.location()].id
        };
        format!("{}_{}", self.token(), loc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Availability {
    Realtime,
    Delayed,
}

impl fmt::Display for Availability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Availability::Realtime => "realtime",
            Availability::Delayed => "delayed",
        })
    }
}

impl FromStr for Availability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "realtime" => Ok(Availability::Realtime),
            "delayed" => Ok(Availability::Delayed),
            other => Err(Error::Plan(format!("unknown availability {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSpec {
    pub kind: MeasurementKind,
    pub sigma: f64,
    pub availability: Availability,
}

impl MeasurementSpec {
    pub fn realtime(kind: MeasurementKind, sigma: f64) -> Self {
        MeasurementSpec {
            kind,
            sigma,
            availability: Availability::Realtime,
        }
    }

    pub fn delayed(kind: MeasurementKind, sigma: f64) -> Self {
        MeasurementSpec {
            kind,
            sigma,
            availability: Availability::Delayed,
        }
    }
}

/// An ordered set of sensors. Real-time entries always precede delayed
/// ones, so the full measurement vector is `[z_a; z_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    specs: Vec<MeasurementSpec>,
    m_a: usize,
    n_buses: usize,
    n_branches: usize,
}

impl MeasurementPlan {
    pub fn new(specs: Vec<MeasurementSpec>, n_buses: usize, n_branches: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &specs {
            if !s.sigma.is_finite() || s.sigma <= 0.0 {
                return Err(Error::Plan(format!(
                    "{} at {} has non-positive sigma {}",
                    s.kind.token(),
                    s.kind.location(),
                    s.sigma
                )));
            }
            let limit = if s.kind.is_branch() {
                n_branches
            } else {
                n_buses
            };
            if s.kind.location() >= limit {
                return Err(Error::Plan(format!(
                    "{} location {} out of range",
                    s.kind.token(),
                    s.kind.location()
                )));
            }
            if !seen.insert((s.kind, s.availability)) {
                return Err(Error::Plan(format!(
                    "duplicate {} at location {} ({})",
                    s.kind.token(),
                    s.kind.location(),
                    s.availability
                )));
            }
        }
        let (mut ordered, delayed): (Vec<_>, Vec<_>) = specs
            .into_iter()
            .partition(|s| s.availability == Availability::Realtime);
        let m_a = ordered.len();
        ordered.extend(delayed);
        Ok(MeasurementPlan {
            specs: ordered,
            m_a,
            n_buses,
            n_branches,
        })
    }

    pub fn specs(&self) -> &[MeasurementSpec] {
        &self.specs
    }

    pub fn m(&self) -> usize {
        self.specs.len()
    }

    pub fn m_a(&self) -> usize {
        self.m_a
    }

    pub fn m_d(&self) -> usize {
        self.specs.len() - self.m_a
    }

    pub fn realtime(&self) -> MeasurementPlan {
        self.slice(0, self.m_a)
    }

    pub fn delayed(&self) -> MeasurementPlan {
        self.slice(self.m_a, self.specs.len())
    }

    fn slice(&self, lo: usize, hi: usize) -> MeasurementPlan {
        let specs = self.specs[lo..hi].to_vec();
        let m_a = specs
            .iter()
            .filter(|s| s.availability == Availability::Realtime)
            .count();
        MeasurementPlan {
            specs,
            m_a,
            n_buses: self.n_buses,
            n_branches: self.n_branches,
        }
    }

    /// Diagonal of the WLS weight matrix, `sigma^-2`.
    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.specs.iter().map(|s| s.sigma.powi(-2)))
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.sigma).collect()
    }

    /// `kind,location,sigma,availability` rows with external bus ids and
    /// 1-based branch numbers.
    pub fn to_csv(&self, net: &Network) -> String {
        let mut out = String::from("kind,location,sigma,availability\n");
        for s in &self.specs {
            let loc = if s.kind.is_branch() {
                s.kind.location() + 1
            } else {
                net.buses[s.kind.location()].id
            };
            out.push_str(&format!(
                "{},{},{:?},{}\n",
                s.kind.token(),
                loc,
                s.sigma,
                s.availability
            ));
        }
        out
    }

    pub fn from_csv(text: &str, net: &Network) -> Result<Self> {
        let mut specs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line.starts_with("kind")) {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                line: line_no,
                message: msg,
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let [token, loc, sigma, avail] = cols.as_slice() else {
                return Err(bad(format!("expected 4 columns, got {}", cols.len())));
            };
            let loc: usize = loc
                .parse()
                .map_err(|_| bad(format!("bad location {loc:?}")))?;
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| bad(format!("bad sigma {sigma:?}")))?;
            let probe = MeasurementKind::from_token(token, 0)
                .ok_or_else(|| bad(format!("unknown kind {token:?}")))?;
            let dense = if probe.is_branch() {
                loc.checked_sub(1)
                    .filter(|&k| k < net.n_branches())
                    .ok_or_else(|| bad(format!("unknown branch {loc}")))?
            } else {
                net.bus_index(loc)
                    .ok_or_else(|| bad(format!("unknown bus {loc}")))?
            };
            let kind = MeasurementKind::from_token(token, dense).expect("token checked");
            specs.push(MeasurementSpec {
                kind,
                sigma,
                availability: avail.parse()?,
            });
        }
        MeasurementPlan::new(specs, net.n_buses(), net.n_branches())
    }
}

/// Noise-free electrical quantities for a state: injections at every bus
/// and from-end flows on every branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutputs {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub pf: Vec<f64>,
    pub qf: Vec<f64>,
}

impl PowerOutputs {
    /// Apparent from-end flow per branch.
    pub fn sf(&self) -> Vec<f64> {
        self.pf
            .iter()
            .zip(&self.qf)
            .map(|(p, q)| p.hypot(*q))
            .collect()
    }
}

fn injection(state: &StateVector, adm: &AdmittanceMatrix, i: usize) -> (f64, f64) {
    let vi = state.v[i];
    let (gii, bii) = (adm.g[(i, i)], adm.b[(i, i)]);
    let mut p = vi * gii;
    let mut q = -vi * bii;
    for &j in &adm.neighbors[i] {
        let (g, b) = (adm.g[(i, j)], adm.b[(i, j)]);
        let (s, c) = (state.theta[i] - state.theta[j]).sin_cos();
        p += state.v[j] * (g * c + b * s);
        q += state.v[j] * (g * s - b * c);
    }
    (vi * p, vi * q)
}

fn flow(state: &StateVector, adm: &AdmittanceMatrix, k: usize) -> (f64, f64) {
    let br = &adm.branches[k];
    if !br.in_service {
        return (0.0, 0.0);
    }
    let (i, j) = (br.from, br.to);
    let (vi, vj) = (state.v[i], state.v[j]);
    let (s, c) = (state.theta[i] - state.theta[j]).sin_cos();
    // bus-admittance off-diagonal of this branch alone
    let (gij, bij) = (-br.g, -br.b);
    let p = vi * vj * (gij * c + bij * s) - gij * vi * vi;
    let q = vi * vj * (gij * s - bij * c) + vi * vi * (bij - br.b_sh / 2.0);
    (p, q)
}

pub fn power_outputs(state: &StateVector, adm: &AdmittanceMatrix) -> PowerOutputs {
    let n = adm.n_buses();
    let (p, q) = (0..n).map(|i| injection(state, adm, i)).unzip();
    let (pf, qf) = (0..adm.n_branches()).map(|k| flow(state, adm, k)).unzip();
    PowerOutputs { p, q, pf, qf }
}

/// Evaluate the measurement functions for every row of `plan`.
pub fn eval_h(state: &StateVector, plan: &MeasurementPlan, adm: &AdmittanceMatrix) -> DVector<f64> {
    DVector::from_iterator(
        plan.m(),
        plan.specs().iter().map(|s| match s.kind {
            MeasurementKind::Vmag(i) => state.v[i],
            MeasurementKind::Vang(i) => state.theta[i],
            MeasurementKind::Pinj(i) => injection(state, adm, i).0,
            MeasurementKind::Qinj(i) => injection(state, adm, i).1,
            MeasurementKind::Pflow(k) => flow(state, adm, k).0,
            MeasurementKind::Qflow(k) => flow(state, adm, k).1,
        }),
    )
}

/// Analytic Jacobian of [`eval_h`], rows in plan order, columns in
/// free-variable layout `[v, theta \ slack]`.
pub fn eval_jacobian(
    state: &StateVector,
    plan: &MeasurementPlan,
    adm: &AdmittanceMatrix,
) -> DMatrix<f64> {
    let n = state.n_buses();
    let mut jac = DMatrix::zeros(plan.m(), 2 * n - 1);
    for (row, spec) in plan.specs().iter().enumerate() {
        match spec.kind {
            MeasurementKind::Vmag(i) => jac[(row, i)] = 1.0,
            MeasurementKind::Vang(i) => {
                if let Some(c) = state.theta_col(i) {
                    jac[(row, c)] = 1.0;
                }
            }
            MeasurementKind::Pinj(i) | MeasurementKind::Qinj(i) => {
                let active = matches!(spec.kind, MeasurementKind::Pinj(_));
                injection_row(state, adm, i, active, &mut jac, row);
            }
            MeasurementKind::Pflow(k) | MeasurementKind::Qflow(k) => {
                let active = matches!(spec.kind, MeasurementKind::Pflow(_));
                flow_row(state, adm, k, active, &mut jac, row);
            }
        }
    }
    jac
}

fn injection_row(
    state: &StateVector,
    adm: &AdmittanceMatrix,
    i: usize,
    active: bool,
    jac: &mut DMatrix<f64>,
    row: usize,
) {
    let vi = state.v[i];
    let (gii, bii) = (adm.g[(i, i)], adm.b[(i, i)]);
    // sums over off-diagonal neighbours
    let mut a = 0.0; // sum V_j (G c + B s)
    let mut r = 0.0; // sum V_j (G s - B c)
    for &j in &adm.neighbors[i] {
        let (g, b) = (adm.g[(i, j)], adm.b[(i, j)]);
        let (s, c) = (state.theta[i] - state.theta[j]).sin_cos();
        let vj = state.v[j];
        a += vj * (g * c + b * s);
        r += vj * (g * s - b * c);
        let col_t = state.theta_col(j);
        if active {
            jac[(row, j)] = vi * (g * c + b * s);
            if let Some(ct) = col_t {
                jac[(row, ct)] = vi * vj * (g * s - b * c);
            }
        } else {
            jac[(row, j)] = vi * (g * s - b * c);
            if let Some(ct) = col_t {
                jac[(row, ct)] = -vi * vj * (g * c + b * s);
            }
        }
    }
    let ct = state.theta_col(i);
    if active {
        jac[(row, i)] = a + 2.0 * vi * gii;
        if let Some(ct) = ct {
            jac[(row, ct)] = -vi * r;
        }
    } else {
        jac[(row, i)] = r - 2.0 * vi * bii;
        if let Some(ct) = ct {
            jac[(row, ct)] = vi * a;
        }
    }
}

fn flow_row(
    state: &StateVector,
    adm: &AdmittanceMatrix,
    k: usize,
    active: bool,
    jac: &mut DMatrix<f64>,
    row: usize,
) {
    let br = &adm.branches[k];
    if !br.in_service {
        return;
    }
    let (i, j) = (br.from, br.to);
    let (vi, vj) = (state.v[i], state.v[j]);
    let (s, c) = (state.theta[i] - state.theta[j]).sin_cos();
    let (gij, bij) = (-br.g, -br.b);
    let cc = gij * c + bij * s;
    let ss = gij * s - bij * c;
    let (dvi, dvj, dti) = if active {
        (vj * cc - 2.0 * gij * vi, vi * cc, -vi * vj * ss)
    } else {
        (
            vj * ss + 2.0 * vi * (bij - br.b_sh / 2.0),
            vi * ss,
            vi * vj * cc,
        )
    };
    jac[(row, i)] += dvi;
    jac[(row, j)] += dvj;
    if let Some(ct) = state.theta_col(i) {
        jac[(row, ct)] += dti;
    }
    if let Some(ct) = state.theta_col(j) {
        jac[(row, ct)] -= dti;
    }
}

/// Explicit sensor locations (external bus ids). Unset lists fall back to
/// the built-in placement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Placement {
    pub pmu_buses: Option<Vec<usize>>,
    pub scada_buses: Option<Vec<usize>>,
    pub smart_meter_buses: Option<Vec<usize>>,
    /// Add a delayed injection meter at the slack bus.
    pub slack_smart_meter: bool,
}

impl Placement {
    /// The reference configuration: 5 PMUs, 15 SCADA injections, 17
    /// non-slack smart meters plus one at the substation.
    pub fn reference() -> Self {
        Placement {
            slack_smart_meter: true,
            ..Placement::default()
        }
    }
}

/// SCADA injection buses in selection order for the 33-bus feeder. The
/// first fifteen are the reference set; the tail spreads additional units
/// over the buses that otherwise carry smart meters.
const SCADA_PRIORITY: [usize; 32] = [
    2, 6, 13, 24, 31, 3, 9, 17, 21, 29, 5, 8, 12, 15, 33, 19, 27, 10, 25, 16, 22, 4, 30, 14, 11, 7,
    18, 20, 23, 26, 28, 32,
];

const PMU_PRIORITY: [usize; 15] = [3, 9, 15, 21, 29, 6, 12, 18, 25, 33, 5, 11, 17, 23, 31];

/// Non-slack buses ordered by a priority list; buses missing from the list
/// follow in ascending id order.
fn priority_order(net: &Network, head: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = head
        .iter()
        .copied()
        .filter(|&id| id != net.slack_bus && net.bus_index(id).is_some())
        .collect();
    let mut seen: BTreeSet<usize> = order.iter().copied().collect();
    for bus in &net.buses {
        if bus.id != net.slack_bus && seen.insert(bus.id) {
            order.push(bus.id);
        }
    }
    order
}

fn resolve(net: &Network, ids: &[usize], what: &str) -> Result<Vec<usize>> {
    let mut seen = BTreeSet::new();
    ids.iter()
        .map(|&id| {
            if !seen.insert(id) {
                return Err(Error::Plan(format!("{what} bus {id} listed twice")));
            }
            net.bus_index(id)
                .ok_or_else(|| Error::Plan(format!("{what} bus {id} does not exist")))
        })
        .collect()
}

/// Build the FTU + SCADA + PMU real-time set and the smart-meter delayed
/// set.
pub fn default_plan(
    net: &Network,
    n_pmu: usize,
    n_scada: usize,
    placement: &Placement,
) -> Result<MeasurementPlan> {
    let n = net.n_buses();
    let slack = net.slack_index();
    if n_pmu > n - 1 || n_scada > n - 1 {
        return Err(Error::Plan(format!(
            "{n_pmu} PMUs / {n_scada} SCADA units do not fit on {} non-slack buses",
            n - 1
        )));
    }

    let scada_ids = match &placement.scada_buses {
        Some(ids) => ids.clone(),
        None => priority_order(net, &SCADA_PRIORITY)[..n_scada].to_vec(),
    };
    let pmu_ids = match &placement.pmu_buses {
        Some(ids) => ids.clone(),
        None => priority_order(net, &PMU_PRIORITY)[..n_pmu].to_vec(),
    };
    if scada_ids.len() != n_scada {
        return Err(Error::Plan(format!(
            "{} SCADA buses listed but n_scada = {n_scada}",
            scada_ids.len()
        )));
    }
    if pmu_ids.len() != n_pmu {
        return Err(Error::Plan(format!(
            "{} PMU buses listed but n_pmu = {n_pmu}",
            pmu_ids.len()
        )));
    }
    let scada = resolve(net, &scada_ids, "SCADA")?;
    let pmu = resolve(net, &pmu_ids, "PMU")?;
    if scada.contains(&slack) {
        return Err(Error::Plan(
            "SCADA injection placed at the slack bus".into(),
        ));
    }
    if pmu.contains(&slack) {
        return Err(Error::Plan("PMU placed at the slack bus".into()));
    }

    let meters = match &placement.smart_meter_buses {
        Some(ids) => {
            let m = resolve(net, ids, "smart meter")?;
            if let Some(&clash) = m.iter().find(|i| scada.contains(i)) {
                return Err(Error::Plan(format!(
                    "bus {} has both a SCADA and a smart-meter injection",
                    net.buses[clash].id
                )));
            }
            m
        }
        None => {
            let mut m: Vec<usize> = (0..n)
                .filter(|i| *i != slack && !scada.contains(i))
                .collect();
            if placement.slack_smart_meter {
                m.insert(0, slack);
            }
            m
        }
    };

    let ftu = (0..net.n_branches())
        .find(|&k| {
            let (f, t) = net.branch_ends(k);
            net.branches[k].in_service && (f == slack || t == slack)
        })
        .ok_or_else(|| Error::Plan("slack bus has no in-service branch".into()))?;

    let mut specs = vec![
        MeasurementSpec::realtime(MeasurementKind::Vmag(slack), SIGMA_VOLTAGE),
        MeasurementSpec::realtime(MeasurementKind::Pflow(ftu), SIGMA_POWER),
        MeasurementSpec::realtime(MeasurementKind::Qflow(ftu), SIGMA_POWER),
    ];
    for &i in &scada {
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Pinj(i),
            SIGMA_POWER,
        ));
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Qinj(i),
            SIGMA_POWER,
        ));
    }
    for &i in &pmu {
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Vmag(i),
            SIGMA_VOLTAGE,
        ));
        specs.push(MeasurementSpec::realtime(
            MeasurementKind::Vang(i),
            SIGMA_VOLTAGE,
        ));
    }
    for &i in &meters {
        specs.push(MeasurementSpec::delayed(
            MeasurementKind::Pinj(i),
            SIGMA_POWER,
        ));
        specs.push(MeasurementSpec::delayed(
            MeasurementKind::Qinj(i),
            SIGMA_POWER,
        ));
    }
    MeasurementPlan::new(specs, n, net.n_branches())
}
