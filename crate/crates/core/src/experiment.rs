//! Run configuration and the end-to-end benchmark, sweep and dataset
//! generation runs built on the other modules.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimator::{SolverOptions, EXACT_FIT_OBJECTIVE};
use crate::evaluation::{
    delta_rmse, emit_report, errors_raw_csv, paired_mask, residual_stats, table1_csv, table2_csv,
    table4_csv, Magnitude, MethodReport, ReportFiles, ResidualStats, SweepRow,
};
use crate::grid::{build_admittance, parse_case, AdmittanceMatrix, Network, IEEE33_CASE};
use crate::measurement::{default_plan, MeasurementPlan, Placement};
use crate::pipelines::{parse_methods, EstimateSet, Method, Pipeline, PipelineOutcome};
use crate::scenario::{build_dataset, parse_key_values, Dataset, VariabilityScenario};

pub const DESK_INSTANCES: usize = 2_500;
pub const PAPER_INSTANCES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 2024;

/// One cell of the variability × sensor-count sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub variability: String,
    pub n_pmu: usize,
    pub n_scada: usize,
}

impl SweepCell {
    pub fn new(variability: &str, n_pmu: usize, n_scada: usize) -> Self {
        SweepCell {
            variability: variability.to_string(),
            n_pmu,
            n_scada,
        }
    }
}

/// The five cells of the reference sensitivity study.
pub fn reference_sweep() -> Vec<SweepCell> {
    vec![
        SweepCell::new("low", 5, 15),
        SweepCell::new("medium", 5, 15),
        SweepCell::new("high", 5, 15),
        SweepCell::new("medium", 15, 5),
        SweepCell::new("medium", 5, 25),
    ]
}

fn parse_cells(text: &str) -> Result<Vec<SweepCell>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|cell| {
            let parts: Vec<&str> = cell.trim().split(':').collect();
            let [var, pmu, scada] = parts[..] else {
                return Err(Error::Config(format!(
                    "sweep cell {cell:?} is not variability:n_pmu:n_scada"
                )));
            };
            VariabilityScenario::preset(var)?;
            Ok(SweepCell::new(
                var,
                parse_num(pmu, "n_pmu")?,
                parse_num(scada, "n_scada")?,
            ))
        })
        .collect()
}

fn format_cells(cells: &[SweepCell]) -> String {
    cells
        .iter()
        .map(|c| format!("{}:{}:{}", c.variability, c.n_pmu, c.n_scada))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_num<T: std::str::FromStr>(text: &str, key: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {text:?}")))
}

fn parse_pair(text: &str, key: &str) -> Result<(f64, f64)> {
    let v: Vec<f64> = text
        .split_whitespace()
        .map(|t| parse_num(t, key))
        .collect::<Result<_>>()?;
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!(
            "{key}: expected two numbers, got {text:?}"
        ))),
    }
}

fn parse_ids(text: &str, key: &str) -> Result<Option<Vec<usize>>> {
    if text.trim() == "auto" {
        return Ok(None);
    }
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(t, key))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn format_ids(ids: &Option<Vec<usize>>) -> String {
    match ids {
        None => "auto".into(),
        Some(v) => v.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
    }
}

fn parse_bool(text: &str, key: &str) -> Result<bool> {
    match text.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!(
            "{key}: expected true or false, got {other:?}"
        ))),
    }
}

/// Every setting of a run. Defaults reproduce the reference setup at
/// desk scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// MATPOWER case file; the bundled 33-bus feeder when unset.
    pub case_path: Option<PathBuf>,
    pub seed: u64,
    pub n_instances: usize,
    pub train_fraction: f64,
    /// Preset name, overridden by explicit ranges.
    pub variability: String,
    pub v_range: Option<(f64, f64)>,
    /// Degrees.
    pub theta_range: Option<(f64, f64)>,
    pub n_pmu: usize,
    pub n_scada: usize,
    pub placement: Placement,
    pub solver: SolverOptions,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    /// Largest tolerated fraction of non-converged solves.
    pub max_divergence: f64,
    pub sweep: Vec<SweepCell>,
    /// Also report SF vs SF* in sweeps.
    pub sweep_sf: bool,
    pub raw_errors: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case_path: None,
            seed: DEFAULT_SEED,
            n_instances: DESK_INSTANCES,
            train_fraction: 0.8,
            variability: "medium".into(),
            v_range: None,
            theta_range: None,
            n_pmu: 5,
            n_scada: 15,
            placement: Placement::reference(),
            solver: SolverOptions::default(),
            methods: Method::ALL.to_vec(),
            out_dir: PathBuf::from("out"),
            max_divergence: 0.001,
            sweep: reference_sweep(),
            sweep_sf: false,
            raw_errors: true,
        }
    }
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "case" => self.case_path = (v != "builtin").then(|| PathBuf::from(v)),
            "seed" => self.seed = parse_num(v, key)?,
            "n_instances" => self.n_instances = parse_num(v, key)?,
            "train_fraction" => self.train_fraction = parse_num(v, key)?,
            "variability" => self.variability = v.to_string(),
            "v_range" => self.v_range = (v != "preset").then(|| parse_pair(v, key)).transpose()?,
            "theta_range_deg" => {
                self.theta_range = (v != "preset").then(|| parse_pair(v, key)).transpose()?
            }
            "n_pmu" => self.n_pmu = parse_num(v, key)?,
            "n_scada" => self.n_scada = parse_num(v, key)?,
            "pmu_buses" => self.placement.pmu_buses = parse_ids(v, key)?,
            "scada_buses" => self.placement.scada_buses = parse_ids(v, key)?,
            "smart_meter_buses" => self.placement.smart_meter_buses = parse_ids(v, key)?,
            "slack_smart_meter" => self.placement.slack_smart_meter = parse_bool(v, key)?,
            "grad_tol" => self.solver.grad_tol = parse_num(v, key)?,
            "step_tol" => self.solver.step_tol = parse_num(v, key)?,
            "stall_step_tol" => self.solver.stall_step_tol = parse_num(v, key)?,
            "max_iter" => self.solver.max_iter = parse_num(v, key)?,
            "methods" => self.methods = parse_methods(v)?,
            "out" => self.out_dir = PathBuf::from(v),
            "max_divergence" => self.max_divergence = parse_num(v, key)?,
            "sweep" => self.sweep = parse_cells(v)?,
            "sweep_sf" => self.sweep_sf = parse_bool(v, key)?,
            "raw_errors" => self.raw_errors = parse_bool(v, key)?,
            other => return Err(Error::Config(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Defaults overridden by a `key = value` text.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Resolved settings in the same format `from_text` reads.
    pub fn to_text(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert(
            "case",
            self.case_path
                .as_ref()
                .map_or("builtin".into(), |p| p.display().to_string()),
        );
        kv.insert("seed", self.seed.to_string());
        kv.insert("n_instances", self.n_instances.to_string());
        kv.insert("train_fraction", format!("{:?}", self.train_fraction));
        kv.insert("variability", self.variability.clone());
        let pair =
            |p: Option<(f64, f64)>| p.map_or("preset".into(), |(a, b)| format!("{a:?} {b:?}"));
        kv.insert("v_range", pair(self.v_range));
        kv.insert("theta_range_deg", pair(self.theta_range));
        kv.insert("n_pmu", self.n_pmu.to_string());
        kv.insert("n_scada", self.n_scada.to_string());
        kv.insert("pmu_buses", format_ids(&self.placement.pmu_buses));
        kv.insert("scada_buses", format_ids(&self.placement.scada_buses));
        kv.insert(
            "smart_meter_buses",
            format_ids(&self.placement.smart_meter_buses),
        );
        kv.insert(
            "slack_smart_meter",
            self.placement.slack_smart_meter.to_string(),
        );
        kv.insert("grad_tol", format!("{:?}", self.solver.grad_tol));
        kv.insert("step_tol", format!("{:?}", self.solver.step_tol));
        kv.insert(
            "stall_step_tol",
            format!("{:?}", self.solver.stall_step_tol),
        );
        kv.insert("max_iter", self.solver.max_iter.to_string());
        kv.insert(
            "methods",
            self.methods
                .iter()
                .map(|m| m.tag())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv.insert("out", self.out_dir.display().to_string());
        kv.insert("max_divergence", format!("{:?}", self.max_divergence));
        kv.insert("sweep", format_cells(&self.sweep));
        kv.insert("sweep_sf", self.sweep_sf.to_string());
        kv.insert("raw_errors", self.raw_errors.to_string());
        kv.into_iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_instances < 2 {
            return Err(Error::Config("n_instances must be at least 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.max_divergence) {
            return Err(Error::Config("max_divergence must lie in [0, 1]".into()));
        }
        if self.solver.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        self.scenario()?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<VariabilityScenario> {
        let base = VariabilityScenario::preset(&self.variability)?;
        let theta = self
            .theta_range
            .map(|(a, b)| (a.to_radians(), b.to_radians()))
            .unwrap_or(base.theta_range);
        VariabilityScenario::new(self.v_range.unwrap_or(base.v_range), theta)
    }

    pub fn load_network(&self) -> Result<Network> {
        match &self.case_path {
            None => parse_case(IEEE33_CASE),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_case(&text)
            }
        }
    }

    pub fn plan(&self, net: &Network) -> Result<MeasurementPlan> {
        default_plan(net, self.n_pmu, self.n_scada, &self.placement)
    }
}

/// Results of a full benchmark run.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub dataset: Dataset,
    pub outcome: PipelineOutcome,
    /// Test rows converged in every method.
    pub mask: Vec<bool>,
    pub reports: Vec<MethodReport>,
    pub stats: Vec<ResidualStats>,
}

impl Benchmark {
    pub fn report(&self, method: Method) -> Option<&MethodReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    pub fn stats(&self, method: Method) -> Option<&ResidualStats> {
        self.stats.iter().find(|s| s.method == method)
    }

    pub fn set(&self, method: Method) -> Option<&EstimateSet> {
        self.outcome.set(method)
    }

    /// Fraction of test `un` solves reaching an exact fit.
    pub fn exact_un_fraction(&self) -> f64 {
        let un = &self.outcome.test_un;
        if un.is_empty() {
            return 1.0;
        }
        un.iter()
            .filter(|s| s.objective <= EXACT_FIT_OBJECTIVE)
            .count() as f64
            / un.len() as f64
    }

    pub fn divergence_fraction(&self) -> f64 {
        self.outcome.divergence_fraction()
    }

    pub fn n_paired(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// The report tables.
    pub fn files(&self, net: &Network, raw_errors: bool) -> ReportFiles {
        ReportFiles {
            table2: table2_csv(&self.reports),
            table1: (!self.stats.is_empty()).then(|| table1_csv(&self.stats, net)),
            table4: None,
            errors_raw: raw_errors
                .then(|| errors_raw_csv(&self.outcome.sets, &self.dataset, net, Some(&self.mask))),
        }
    }

    pub fn summary(&self) -> String {
        let o = &self.outcome;
        let mut s = String::new();
        let _ = writeln!(s, "n_train_used = {}", o.n_train_used);
        let _ = writeln!(s, "train_excluded = {}", o.train_excluded.len());
        let _ = writeln!(s, "n_test = {}", o.test_indices.len());
        let _ = writeln!(s, "n_paired = {}", self.n_paired());
        let _ = writeln!(s, "solves = {}", o.solves);
        let _ = writeln!(s, "diverged = {}", o.diverged);
        let _ = writeln!(s, "divergence_fraction = {:?}", self.divergence_fraction());
        let _ = writeln!(s, "exact_un_fraction = {:?}", self.exact_un_fraction());
        for set in &o.sets {
            let _ = writeln!(s, "flagged_{} = {}", set.method, set.n_flagged());
        }
        s
    }
}

/// Dataset, labels, fits, estimates and metrics for one configuration.
pub fn run_benchmark(cfg: &RunConfig, net: &Network, adm: &AdmittanceMatrix) -> Result<Benchmark> {
    let plan = cfg.plan(net).map_err(Error::in_stage("plan"))?;
    let scenario = cfg.scenario().map_err(Error::in_stage("config"))?;
    let dataset = build_dataset(
        cfg.n_instances,
        cfg.train_fraction,
        &scenario,
        &plan,
        adm,
        cfg.seed,
    )
    .map_err(Error::in_stage("dataset"))?;
    benchmark_on(cfg, net, adm, dataset)
}

/// Benchmark on an existing dataset.
pub fn benchmark_on(
    cfg: &RunConfig,
    net: &Network,
    adm: &AdmittanceMatrix,
    dataset: Dataset,
) -> Result<Benchmark> {
    let pipeline = Pipeline::new(net, adm, &dataset.plan, cfg.solver.clone());
    let outcome = pipeline.run(&dataset, &cfg.methods)?;
    let evaluate = || -> Result<(Vec<bool>, Vec<MethodReport>, Vec<ResidualStats>)> {
        let mask = paired_mask(&outcome.sets)?;
        let reports = outcome
            .sets
            .iter()
            .map(|s| MethodReport::compute(s, &dataset, net, Some(&mask)))
            .collect::<Result<Vec<_>>>()?;
        let stats = outcome
            .sets
            .iter()
            .filter(|s| s.method.has_pseudo())
            .map(|s| residual_stats(s, &dataset, net, Some(&mask)))
            .collect::<Result<Vec<_>>>()?;
        Ok((mask, reports, stats))
    };
    let (mask, reports, stats) = evaluate().map_err(Error::in_stage("evaluate"))?;
    let flagged = mask.iter().filter(|m| !**m).count();
    if flagged > 0 {
        log::warn!("{flagged} test instances dropped from every method after failed solves");
    }
    Ok(Benchmark {
        dataset,
        outcome,
        mask,
        reports,
        stats,
    })
}

/// Write reports, estimates, fitted models, the run summary and the
/// resolved configuration into `cfg.out_dir`.
pub fn write_benchmark(cfg: &RunConfig, bench: &Benchmark, net: &Network) -> Result<()> {
    let dir = &cfg.out_dir;
    emit_report(&bench.files(net, cfg.raw_errors), dir).map_err(Error::in_stage("report"))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::in_stage("report")(Error::io(path, e)))
    };
    write("config.txt", &cfg.to_text())?;
    write("summary.txt", &bench.summary())?;
    let mut estimates = String::new();
    for (i, set) in bench.outcome.sets.iter().enumerate() {
        let csv = set.to_csv(net);
        let body = if i == 0 {
            &csv[..]
        } else {
            csv.split_once('\n').map_or("", |(_, b)| b)
        };
        estimates.push_str(body);
    }
    write("estimates.csv", &estimates)?;
    let m = &bench.outcome.models;
    for (tag, model) in [
        ("SF", &m.sf),
        ("SFstar", &m.sf_star),
        ("PM", &m.pm),
        ("PMstar", &m.pm_star),
    ] {
        if let Some(model) = model {
            write(&format!("model_{tag}.csv"), &model.to_csv())?;
        }
    }
    Ok(())
}

/// ΔRMSE rows for every sweep cell. Infeasible cells are reported with a
/// note instead of aborting the sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub solves: usize,
    pub diverged: usize,
}

impl Sweep {
    pub fn divergence_fraction(&self) -> f64 {
        if self.solves == 0 {
            0.0
        } else {
            self.diverged as f64 / self.solves as f64
        }
    }
}

pub fn run_sweep(cfg: &RunConfig, net: &Network, adm: &AdmittanceMatrix) -> Result<Sweep> {
    if cfg.sweep.is_empty() {
        return Err(Error::Config("sweep needs at least one cell".into()));
    }
    let mut methods = vec![Method::Pm, Method::PmStar];
    if cfg.sweep_sf {
        methods.extend([Method::Sf, Method::SfStar]);
    }
    let mut rows = Vec::new();
    let (mut solves, mut diverged) = (0, 0);
    for cell in &cfg.sweep {
        let mut cell_cfg = cfg.clone();
        cell_cfg.variability = cell.variability.clone();
        cell_cfg.v_range = None;
        cell_cfg.theta_range = None;
        cell_cfg.n_pmu = cell.n_pmu;
        cell_cfg.n_scada = cell.n_scada;
        cell_cfg.placement = Placement {
            slack_smart_meter: cfg.placement.slack_smart_meter,
            ..Placement::default()
        };
        cell_cfg.methods = methods.clone();
        let mut row = SweepRow {
            variability: cell.variability.clone(),
            n_pmu: cell.n_pmu,
            n_scada: cell.n_scada,
            pm: None,
            sf: None,
            note: String::new(),
        };
        match run_benchmark(&cell_cfg, net, adm) {
            Ok(b) => {
                solves += b.outcome.solves;
                diverged += b.outcome.diverged;
                let delta = |std: Method, enh: Method| -> Result<(f64, f64)> {
                    let (s, e) = (b.report(std), b.report(enh));
                    let (Some(s), Some(e)) = (s, e) else {
                        return Err(Error::Config("missing report".into()));
                    };
                    Ok((
                        delta_rmse(s, e, Magnitude::V)?,
                        delta_rmse(s, e, Magnitude::Sf)?,
                    ))
                };
                row.pm = Some(delta(Method::Pm, Method::PmStar)?);
                if cfg.sweep_sf {
                    row.sf = Some(delta(Method::Sf, Method::SfStar)?);
                }
            }
            Err(e @ Error::Stage { stage: "plan", .. }) => {
                log::warn!("sweep cell {cell:?} skipped: {e}");
                row.note = format!("infeasible: {e}");
            }
            Err(e) => return Err(e),
        }
        rows.push(row);
    }
    Ok(Sweep {
        rows,
        solves,
        diverged,
    })
}

pub fn write_sweep(cfg: &RunConfig, sweep: &Sweep) -> Result<()> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in [
        ("table4.csv", table4_csv(&sweep.rows)),
        ("config.txt", cfg.to_text()),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Generate a dataset and write `dataset.csv`, `dataset.meta`,
/// `plan.csv` and `config.txt` into `cfg.out_dir`.
pub fn generate(cfg: &RunConfig, net: &Network, adm: &AdmittanceMatrix) -> Result<Dataset> {
    let plan = cfg.plan(net).map_err(Error::in_stage("plan"))?;
    let dataset = build_dataset(
        cfg.n_instances,
        cfg.train_fraction,
        &cfg.scenario()?,
        &plan,
        adm,
        cfg.seed,
    )
    .map_err(Error::in_stage("dataset"))?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in [
        ("dataset.csv", dataset.to_csv(net)),
        ("dataset.meta", dataset.metadata(net)),
        ("plan.csv", plan.to_csv(net)),
        ("config.txt", cfg.to_text()),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(dataset)
}

/// Network and admittance matrix for a configuration.
pub fn load_case(cfg: &RunConfig) -> Result<(Network, AdmittanceMatrix)> {
    let net = cfg.load_network().map_err(Error::in_stage("case"))?;
    let adm = build_admittance(&net).map_err(Error::in_stage("case"))?;
    Ok((net, adm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("seed", "7").unwrap();
        cfg.set("methods", "BN,PM*").unwrap();
        cfg.set("pmu_buses", "3 9 15 21 29").unwrap();
        cfg.set("theta_range_deg", "-10 10").unwrap();
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("nonsense", "1").is_err());
        assert!(cfg.set("seed", "abc").is_err());
        assert!(cfg.set("methods", "BN,XX").is_err());
        assert!(cfg.set("sweep", "medium:5").is_err());
        cfg.set("train_fraction", "1.5").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_cells_parse() {
        let cells = parse_cells("low:5:15, high:15:5").unwrap();
        assert_eq!(
            cells,
            vec![SweepCell::new("low", 5, 15), SweepCell::new("high", 15, 5)]
        );
        assert_eq!(format_cells(&reference_sweep()).split(',').count(), 5);
    }
}
