//! Error metrics over estimate sets and the CSV reports built from them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::measurement::{MeasurementKind, PowerOutputs, StateVector};
use crate::pipelines::{EstimateSet, Method};
use crate::scenario::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Magnitude {
    /// Voltage magnitude, p.u.
    V,
    /// Voltage angle, degrees.
    Theta,
    /// Active injection, MW.
    P,
    /// Reactive injection, MVAr.
    Q,
    /// Active from-end flow, MW.
    Pf,
    /// Reactive from-end flow, MVAr.
    Qf,
    /// Apparent from-end flow, MVA.
    Sf,
}

impl Magnitude {
    pub const ALL: [Magnitude; 7] = [
        Magnitude::V,
        Magnitude::Theta,
        Magnitude::P,
        Magnitude::Q,
        Magnitude::Pf,
        Magnitude::Qf,
        Magnitude::Sf,
    ];
    /// Columns of the method-by-magnitude RMSE table.
    pub const TABLE: [Magnitude; 6] = [
        Magnitude::V,
        Magnitude::Theta,
        Magnitude::P,
        Magnitude::Q,
        Magnitude::Pf,
        Magnitude::Qf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Magnitude::V => "V",
            Magnitude::Theta => "theta",
            Magnitude::P => "P",
            Magnitude::Q => "Q",
            Magnitude::Pf => "Pf",
            Magnitude::Qf => "Qf",
            Magnitude::Sf => "Sf",
        }
    }

    pub fn is_branch(self) -> bool {
        matches!(self, Magnitude::Pf | Magnitude::Qf | Magnitude::Sf)
    }

    fn position(self) -> usize {
        Magnitude::ALL
            .iter()
            .position(|m| *m == self)
            .expect("listed")
    }
}

/// Per-element errors `truth - estimate` in reporting units. Branch
/// magnitudes cover in-service branches only; angle errors are wrapped
/// to (-180°, 180°].
pub fn element_errors(
    magnitude: Magnitude,
    truth: (&StateVector, &PowerOutputs),
    estimate: (&StateVector, &PowerOutputs),
    in_service: &[bool],
    base_mva: f64,
) -> Vec<f64> {
    let (xt, yt) = truth;
    let (xe, ye) = estimate;
    let diff = |a: &[f64], b: &[f64], scale: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(a, b)| (a - b) * scale).collect()
    };
    let branch = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(in_service)
            .filter(|(_, on)| **on)
            .map(|((a, b), _)| (a - b) * base_mva)
            .collect()
    };
    match magnitude {
        Magnitude::V => diff(&xt.v, &xe.v, 1.0),
        Magnitude::Theta => xt
            .theta
            .iter()
            .zip(&xe.theta)
            .map(|(a, b)| wrap_angle(a - b).to_degrees())
            .collect(),
        Magnitude::P => diff(&yt.p, &ye.p, base_mva),
        Magnitude::Q => diff(&yt.q, &ye.q, base_mva),
        Magnitude::Pf => branch(&yt.pf, &ye.pf),
        Magnitude::Qf => branch(&yt.qf, &ye.qf),
        Magnitude::Sf => branch(&yt.sf(), &ye.sf()),
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Root of the mean squared entry over a collection of error vectors.
pub fn rmse_of<'a, I>(errors: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let (mut sum, mut count) = (0.0, 0usize);
    for row in errors {
        sum += row.iter().map(|e| e * e).sum::<f64>();
        count += row.len();
    }
    if count == 0 {
        return Err(Error::Empty("no paired errors".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Instances kept for paired comparison: converged in every set. All sets
/// must cover the same instances in the same order.
pub fn paired_mask(sets: &[EstimateSet]) -> Result<Vec<bool>> {
    let Some(first) = sets.first() else {
        return Ok(Vec::new());
    };
    for s in sets {
        if s.instances != first.instances {
            return Err(Error::Config(format!(
                "{} and {} cover different instances",
                first.method, s.method
            )));
        }
    }
    Ok((0..first.len())
        .map(|r| sets.iter().all(|s| s.converged[r]))
        .collect())
}

/// RMSE of one magnitude against the dataset's noise-free truth over the
/// rows selected by `mask` (all rows when `None`).
pub fn rmse(
    set: &EstimateSet,
    dataset: &Dataset,
    net: &Network,
    magnitude: Magnitude,
    mask: Option<&[bool]>,
) -> Result<f64> {
    let errs = set_errors(set, dataset, net, magnitude, mask);
    rmse_of(errs.iter().map(|(_, e)| e.as_slice()))
}

fn set_errors(
    set: &EstimateSet,
    dataset: &Dataset,
    net: &Network,
    magnitude: Magnitude,
    mask: Option<&[bool]>,
) -> Vec<(usize, Vec<f64>)> {
    let in_service: Vec<bool> = net.branches.iter().map(|b| b.in_service).collect();
    (0..set.len())
        .filter(|&r| kept(mask, r))
        .map(|r| {
            let k = set.instances[r];
            let inst = &dataset.instances[k];
            let e = element_errors(
                magnitude,
                (&inst.x_true, &inst.y_true),
                (&set.states[r], &set.outputs[r]),
                &in_service,
                net.base_mva,
            );
            (k, e)
        })
        .collect()
}

fn kept(mask: Option<&[bool]>, r: usize) -> bool {
    mask.map_or(true, |m| m[r])
}

/// RMSE of every magnitude for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: Method,
    /// Paired instances used.
    pub instances: usize,
    /// Identifies the dataset and pairing the report was computed on.
    pub fingerprint: String,
    rmse: [f64; 7],
}

impl MethodReport {
    pub fn compute(
        set: &EstimateSet,
        dataset: &Dataset,
        net: &Network,
        mask: Option<&[bool]>,
    ) -> Result<Self> {
        let mut rmse = [0.0; 7];
        for m in Magnitude::ALL {
            rmse[m.position()] = self::rmse(set, dataset, net, m, mask)?;
        }
        let used: Vec<usize> = (0..set.len())
            .filter(|&r| kept(mask, r))
            .map(|r| set.instances[r])
            .collect();
        Ok(MethodReport {
            method: set.method,
            instances: used.len(),
            fingerprint: fingerprint(dataset, &used),
            rmse,
        })
    }

    pub fn rmse(&self, magnitude: Magnitude) -> f64 {
        self.rmse[magnitude.position()]
    }
}

fn fingerprint(dataset: &Dataset, used: &[usize]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &k in used {
        h = (h ^ k as u64).wrapping_mul(0x0100_0000_01b3);
    }
    format!(
        "seed={};n={};m={};pairs={h:016x}",
        dataset.seed,
        dataset.instances.len(),
        dataset.plan.m()
    )
}

/// `RMSE(standard) - RMSE(enhanced)`; positive when the enhanced method
/// has lower error.
pub fn delta_rmse(
    standard: &MethodReport,
    enhanced: &MethodReport,
    magnitude: Magnitude,
) -> Result<f64> {
    if standard.fingerprint != enhanced.fingerprint {
        return Err(Error::Config(format!(
            "reports for {} and {} come from different runs",
            standard.method, enhanced.method
        )));
    }
    Ok(standard.rmse(magnitude) - enhanced.rmse(magnitude))
}

/// Mean and standard deviation of `z_d - z_d_hat` per delayed measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub method: Method,
    pub kinds: Vec<MeasurementKind>,
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    /// Sample standard deviation.
    pub std: Vec<f64>,
    pub samples: usize,
}

/// Residual statistics of a method's delayed-measurement estimates over
/// the masked test rows, in MW/MVAr for power rows.
pub fn residual_stats(
    set: &EstimateSet,
    dataset: &Dataset,
    net: &Network,
    mask: Option<&[bool]>,
) -> Result<ResidualStats> {
    let pseudo = set.pseudo.as_ref().ok_or_else(|| {
        Error::UnsupportedMethod(format!("{} has no pseudo-measurements", set.method))
    })?;
    let delayed = dataset.plan.delayed();
    let specs = delayed.specs();
    let scales: Vec<f64> = specs
        .iter()
        .map(|s| if s.kind.is_power() { net.base_mva } else { 1.0 })
        .collect();
    let rows: Vec<usize> = (0..set.len()).filter(|&r| kept(mask, r)).collect();
    if rows.len() < 2 {
        return Err(Error::Empty(
            "residual statistics need two instances".into(),
        ));
    }
    let n = rows.len() as f64;
    let md = specs.len();
    let mut mean = vec![0.0; md];
    let mut sq = vec![0.0; md];
    for &r in &rows {
        let z_d = &dataset.instances[set.instances[r]].z_d;
        for j in 0..md {
            let e = (z_d[j] - pseudo[r][j]) * scales[j];
            mean[j] += e;
            sq[j] += e * e;
        }
    }
    let mut std = vec![0.0; md];
    for j in 0..md {
        mean[j] /= n;
        std[j] = ((sq[j] - n * mean[j] * mean[j]).max(0.0) / (n - 1.0)).sqrt();
    }
    Ok(ResidualStats {
        method: set.method,
        kinds: specs.iter().map(|s| s.kind).collect(),
        labels: specs.iter().map(|s| s.kind.label(net)).collect(),
        mean,
        std,
        samples: rows.len(),
    })
}

/// One row of the ΔRMSE sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variability: String,
    pub n_pmu: usize,
    pub n_scada: usize,
    /// `None` when the cell could not be run.
    pub pm: Option<(f64, f64)>,
    pub sf: Option<(f64, f64)>,
    pub note: String,
}

fn num(x: f64) -> String {
    format!("{x:.9}")
}

/// Method-by-magnitude RMSE table.
pub fn table2_csv(reports: &[MethodReport]) -> String {
    let mut out = String::from("method");
    for m in Magnitude::TABLE {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for r in reports {
        out.push_str(r.method.tag());
        for m in Magnitude::TABLE {
            out.push(',');
            out.push_str(&num(r.rmse(m)));
        }
        out.push('\n');
    }
    out
}

/// Active-injection residual mean and standard deviation per delayed bus.
pub fn table1_csv(stats: &[ResidualStats], net: &Network) -> String {
    let mut out = String::from("bus");
    for s in stats {
        let _ = write!(out, ",{}_mean", s.method);
    }
    for s in stats {
        let _ = write!(out, ",{}_std", s.method);
    }
    out.push('\n');
    let Some(first) = stats.first() else {
        return out;
    };
    for (j, kind) in first.kinds.iter().enumerate() {
        let MeasurementKind::Pinj(bus) = kind else {
            continue;
        };
        out.push_str(&net.buses[*bus].id.to_string());
        for s in stats {
            let _ = write!(out, ",{}", num(s.mean[j]));
        }
        for s in stats {
            let _ = write!(out, ",{}", num(s.std[j]));
        }
        out.push('\n');
    }
    out
}

pub fn table4_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "variability,n_pmu,n_scada,pm_delta_V,pm_delta_Sf,sf_delta_V,sf_delta_Sf,status\n",
    );
    let pair = |p: Option<(f64, f64)>| match p {
        Some((a, b)) => format!("{},{}", num(a), num(b)),
        None => ",".to_string(),
    };
    for r in rows {
        let status = if r.note.is_empty() {
            "ok"
        } else {
            r.note.as_str()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.variability,
            r.n_pmu,
            r.n_scada,
            pair(r.pm),
            pair(r.sf),
            status.replace(',', ";")
        );
    }
    out
}

/// Absolute per-element errors of V and Sf for every paired instance.
pub fn errors_raw_csv(
    sets: &[EstimateSet],
    dataset: &Dataset,
    net: &Network,
    mask: Option<&[bool]>,
) -> String {
    let mut out = String::from("instance,method,magnitude,element,abs_error\n");
    let branch_ids: Vec<usize> = (0..net.n_branches())
        .filter(|&k| net.branches[k].in_service)
        .map(|k| k + 1)
        .collect();
    for set in sets {
        for magnitude in [Magnitude::V, Magnitude::Sf] {
            for (k, errs) in set_errors(set, dataset, net, magnitude, mask) {
                for (j, e) in errs.iter().enumerate() {
                    let element = if magnitude.is_branch() {
                        branch_ids[j]
                    } else {
                        net.buses[j].id
                    };
                    let _ = writeln!(
                        out,
                        "{k},{},{},{element},{:e}",
                        set.method,
                        magnitude.name(),
                        e.abs()
                    );
                }
            }
        }
    }
    out
}

/// Everything written by [`emit_report`].
#[derive(Debug, Clone, Default)]
pub struct ReportFiles {
    pub table2: String,
    pub table1: Option<String>,
    pub table4: Option<String>,
    pub errors_raw: Option<String>,
}

/// Write the report tables into `dir`, creating it if needed.
pub fn emit_report(files: &ReportFiles, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write("table2.csv", &files.table2)?;
    if let Some(t) = &files.table1 {
        write("table1.csv", t)?;
    }
    if let Some(t) = &files.table4 {
        write("table4.csv", t)?;
    }
    if let Some(t) = &files.errors_raw {
        write("errors_raw.csv", t)?;
    }
    Ok(())
}
