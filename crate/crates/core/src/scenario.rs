//! Random operating points, noisy measurements and train/test datasets.
//!
//! Every instance draws from its own ChaCha8 stream (`seed`, stream =
//! instance index), so a dataset is identical whether it is generated
//! sequentially or in parallel, and any single instance can be regenerated
//! in isolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{AdmittanceMatrix, Network};
use crate::measurement::{eval_h, power_outputs, MeasurementPlan, PowerOutputs, StateVector};

/// Stream id reserved for the train/test shuffle.
const SPLIT_STREAM: u64 = u64::MAX;

/// Uniform sampling ranges for magnitudes (p.u.) and non-slack angles (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariabilityScenario {
    pub v_range: (f64, f64),
    pub theta_range: (f64, f64),
}

impl VariabilityScenario {
    pub fn new(v_range: (f64, f64), theta_range: (f64, f64)) -> Result<Self> {
        for (name, (lo, hi)) in [("v_range", v_range), ("theta_range", theta_range)] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!(
                    "{name} bounds [{lo}, {hi}] are not ordered"
                )));
            }
        }
        Ok(VariabilityScenario {
            v_range,
            theta_range,
        })
    }

    fn symmetric(dv: f64, deg: f64) -> Self {
        VariabilityScenario {
            v_range: (1.0 - dv, 1.0 + dv),
            theta_range: (-deg.to_radians(), deg.to_radians()),
        }
    }

    pub fn low() -> Self {
        Self::symmetric(0.025, 7.5)
    }

    /// ±5 % magnitudes, ±15° angles.
    pub fn medium() -> Self {
        Self::symmetric(0.05, 15.0)
    }

    /// Medium variant with the ±15.5° angle range of the variability table.
    pub fn medium_wide() -> Self {
        Self::symmetric(0.05, 15.5)
    }

    pub fn high() -> Self {
        Self::symmetric(0.075, 22.5)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "low" => Ok(Self::low()),
            "medium" => Ok(Self::medium()),
            "medium-wide" => Ok(Self::medium_wide()),
            "high" => Ok(Self::high()),
            other => Err(Error::Config(format!(
                "unknown variability preset {other:?} (low, medium, medium-wide, high)"
            ))),
        }
    }
}

pub fn sample_state<R: Rng + ?Sized>(
    scenario: &VariabilityScenario,
    n: usize,
    slack: usize,
    rng: &mut R,
) -> StateVector {
    let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    let v = (0..n).map(|_| uniform(rng, scenario.v_range)).collect();
    let theta = (0..n)
        .map(|i| {
            if i == slack {
                0.0
            } else {
                uniform(rng, scenario.theta_range)
            }
        })
        .collect();
    StateVector::new(v, theta, slack).expect("dimensions are consistent")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x_true: StateVector,
    pub z_a: DVector<f64>,
    pub z_d: DVector<f64>,
    /// Noise-free injections and flows for every bus and branch.
    pub y_true: PowerOutputs,
}

/// `z = h(x) + e` with `e ~ N(0, sigma^2)` per plan row.
pub fn simulate_measurements<R: Rng + ?Sized>(
    x: &StateVector,
    plan: &MeasurementPlan,
    adm: &AdmittanceMatrix,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>, PowerOutputs) {
    let mut z = eval_h(x, plan, adm);
    for (zi, spec) in z.iter_mut().zip(plan.specs()) {
        let e: f64 = rng.sample(StandardNormal);
        *zi += spec.sigma * e;
    }
    let z_a = z.rows(0, plan.m_a()).into_owned();
    let z_d = z.rows(plan.m_a(), plan.m_d()).into_owned();
    (z_a, z_d, power_outputs(x, adm))
}

pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Regenerate instance `index` of the dataset defined by the arguments.
pub fn generate_instance(
    index: usize,
    seed: u64,
    scenario: &VariabilityScenario,
    plan: &MeasurementPlan,
    adm: &AdmittanceMatrix,
) -> Instance {
    let mut rng = instance_rng(seed, index);
    let x_true = sample_state(scenario, adm.n_buses(), adm.slack, &mut rng);
    let (z_a, z_d, y_true) = simulate_measurements(&x_true, plan, adm, &mut rng);
    Instance {
        x_true,
        z_a,
        z_d,
        y_true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    /// Sorted training indices.
    pub train: Vec<usize>,
    /// Sorted test indices.
    pub test: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
    pub plan: MeasurementPlan,
    pub scenario: VariabilityScenario,
}

pub fn build_dataset(
    n: usize,
    train_fraction: f64,
    scenario: &VariabilityScenario,
    plan: &MeasurementPlan,
    adm: &AdmittanceMatrix,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Config(format!(
            "dataset needs at least 2 instances, got {n}"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let n_train = n_train.clamp(1, n - 1);

    let instances: Vec<Instance> = (0..n)
        .into_par_iter()
        .map(|k| generate_instance(k, seed, scenario, plan, adm))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut instance_rng(seed, SPLIT_STREAM as usize));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    Ok(Dataset {
        instances,
        train,
        test,
        seed,
        train_fraction,
        plan: plan.clone(),
        scenario: *scenario,
    })
}

/// Hex SHA-256 of the plan's CSV form.
pub fn plan_hash(plan: &MeasurementPlan, net: &Network) -> String {
    Sha256::digest(plan.to_csv(net).as_bytes()).iter().fold(
        String::with_capacity(64),
        |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        },
    )
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

impl Dataset {
    /// One row per instance: true state, noisy measurements and noise-free
    /// outputs. Angles are in radians, everything else per unit.
    pub fn to_csv(&self, net: &Network) -> String {
        let n = net.n_buses();
        let nb = net.n_branches();
        let mut cols: Vec<String> = Vec::new();
        cols.extend(net.buses.iter().map(|b| format!("v_{}", b.id)));
        cols.extend(net.buses.iter().map(|b| format!("th_{}", b.id)));
        cols.extend((1..=self.plan.m_a()).map(|k| format!("za_{k}")));
        cols.extend((1..=self.plan.m_d()).map(|k| format!("zd_{k}")));
        for kind in ["p", "q"] {
            cols.extend(net.buses.iter().map(|b| format!("y_{kind}_{}", b.id)));
        }
        for kind in ["pf", "qf"] {
            cols.extend((1..=nb).map(|k| format!("y_{kind}_{k}")));
        }
        let mut out = cols.join(",");
        out.push('\n');
        for inst in &self.instances {
            let y = &inst.y_true;
            let fields = inst
                .x_true
                .v
                .iter()
                .chain(&inst.x_true.theta)
                .chain(inst.z_a.iter())
                .chain(inst.z_d.iter())
                .chain(&y.p)
                .chain(&y.q)
                .chain(&y.pf)
                .chain(&y.qf)
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>();
            debug_assert_eq!(fields.len(), 2 * n + self.plan.m() + 2 * n + 2 * nb);
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// `key = value` sidecar describing how the dataset was produced.
    pub fn metadata(&self, net: &Network) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "n_instances = {}", self.instances.len());
        let _ = writeln!(out, "train_fraction = {:?}", self.train_fraction);
        let _ = writeln!(out, "v_range = {:?} {:?}", s.v_range.0, s.v_range.1);
        let _ = writeln!(
            out,
            "theta_range = {:?} {:?}",
            s.theta_range.0, s.theta_range.1
        );
        let _ = writeln!(out, "m_a = {}", self.plan.m_a());
        let _ = writeln!(out, "m_d = {}", self.plan.m_d());
        let _ = writeln!(out, "plan_hash = {}", plan_hash(&self.plan, net));
        let _ = writeln!(out, "train = {}", join(&self.train));
        let _ = writeln!(out, "test = {}", join(&self.test));
        out
    }

    /// Load a dataset written by [`Dataset::to_csv`] and
    /// [`Dataset::metadata`]. The plan must be the one it was generated
    /// with; a hash mismatch is an error.
    pub fn from_files(
        csv: &str,
        metadata: &str,
        plan: &MeasurementPlan,
        net: &Network,
    ) -> Result<Self> {
        let meta = parse_key_values(metadata)?;
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("dataset metadata lacks {k:?}")))
        };
        let num = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad value {t:?} for {k}")))
                })
                .collect()
        };
        let idx = |k: &str| -> Result<Vec<usize>> {
            get(k)?
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad index {t:?} in {k}")))
                })
                .collect()
        };
        if get("plan_hash")? != plan_hash(plan, net) {
            return Err(Error::Plan(
                "dataset was generated with a different plan".into(),
            ));
        }
        let seed: u64 = get("seed")?
            .parse()
            .map_err(|_| Error::Config("bad seed".into()))?;
        let (v, th) = (num("v_range")?, num("theta_range")?);
        if v.len() != 2 || th.len() != 2 {
            return Err(Error::Config("ranges need two bounds".into()));
        }
        let scenario = VariabilityScenario::new((v[0], v[1]), (th[0], th[1]))?;
        let train_fraction = num("train_fraction")?
            .first()
            .copied()
            .ok_or_else(|| Error::Config("empty train_fraction".into()))?;

        let n = net.n_buses();
        let nb = net.n_branches();
        let width = 4 * n + plan.m() + 2 * nb;
        let mut instances = Vec::new();
        for (ln, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: ln + 1,
                        message: format!("bad number {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != width {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: format!("expected {width} columns, got {}", vals.len()),
                });
            }
            let mut at = 0;
            let mut take = |len: usize| {
                let s = vals[at..at + len].to_vec();
                at += len;
                s
            };
            let x_true = StateVector::new(take(n), take(n), net.slack_index())?;
            let z_a = DVector::from_vec(take(plan.m_a()));
            let z_d = DVector::from_vec(take(plan.m_d()));
            let y_true = PowerOutputs {
                p: take(n),
                q: take(n),
                pf: take(nb),
                qf: take(nb),
            };
            instances.push(Instance {
                x_true,
                z_a,
                z_d,
                y_true,
            });
        }
        let (train, test) = (idx("train")?, idx("test")?);
        if train.len() + test.len() != instances.len() {
            return Err(Error::Config("split does not cover the dataset".into()));
        }
        Ok(Dataset {
            instances,
            train,
            test,
            seed,
            train_fraction,
            plan: plan.clone(),
            scenario,
        })
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: ln + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}
