//! `lbse` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lbse_core::experiment::{
    generate, load_case, run_benchmark, run_sweep, write_benchmark, write_sweep, PAPER_INSTANCES,
};
use lbse_core::{Network, RunConfig};

#[derive(Parser)]
#[command(
    name = "lbse",
    version,
    about = "Learning-based static state estimation benchmark"
)]
struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print network size, base MVA and measurement counts.
    Inspect {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sample a dataset and write it with its plan and configuration.
    Generate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every selected method and write the report tables.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
    },
    /// ΔRMSE of PM vs PM* over variability and sensor-count cells.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Cells as `variability:n_pmu:n_scada`, comma separated.
        #[arg(long)]
        cells: Option<String>,
        /// Also compare SF with SF*.
        #[arg(long)]
        sweep_sf: bool,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// MATPOWER case file (default: bundled 33-bus feeder).
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_instances: Option<usize>,
    /// 10 000 instances with an 8 000 / 2 000 split.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// low, medium, medium-wide or high.
    #[arg(long)]
    variability: Option<String>,
    #[arg(long)]
    n_pmu: Option<usize>,
    #[arg(long)]
    n_scada: Option<usize>,
    /// Comma-separated method tags, e.g. `BN,PM,PM*`.
    #[arg(long)]
    methods: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_divergence: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if self.paper_scale {
            cfg.n_instances = PAPER_INSTANCES;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut flag = |key, value: Option<String>| {
            if let Some(v) = value {
                flags.push((key, v));
            }
        };
        flag("case", self.case.as_ref().map(|p| p.display().to_string()));
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("n_instances", self.n_instances.map(|v| v.to_string()));
        flag("train_fraction", self.train_fraction.map(|v| v.to_string()));
        flag("variability", self.variability.clone());
        flag("n_pmu", self.n_pmu.map(|v| v.to_string()));
        flag("n_scada", self.n_scada.map(|v| v.to_string()));
        flag("methods", self.methods.clone());
        flag("out", self.out.as_ref().map(|p| p.display().to_string()));
        flag("max_divergence", self.max_divergence.map(|v| v.to_string()));
        flag("max_iter", self.max_iter.map(|v| v.to_string()));
        for (key, value) in flags {
            cfg.set(key, &value)
                .with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
        for item in &self.overrides {
            let Some((key, value)) = item.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {item:?}");
            };
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn plural(n: usize, word: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { word } else { many })
}

fn inspect(cfg: &RunConfig, net: &Network) {
    let source = cfg
        .case_path
        .as_ref()
        .map_or("bundled IEEE 33-bus feeder".to_string(), |p| {
            p.display().to_string()
        });
    println!("case: {source}");
    println!(
        "{}, {} ({} in service)",
        plural(net.n_buses(), "bus", "buses"),
        plural(net.n_branches(), "branch", "branches"),
        net.n_in_service()
    );
    println!("base MVA: {}", net.base_mva);
    println!("slack bus: {}", net.slack_bus);
    match cfg.plan(net) {
        Ok(plan) => {
            println!(
                "plan ({} PMU, {} SCADA): {} measurements, {} real-time, {} delayed",
                cfg.n_pmu,
                cfg.n_scada,
                plan.m(),
                plan.m_a(),
                plan.m_d()
            );
            println!("state variables: {}", 2 * net.n_buses() - 1);
        }
        Err(e) => println!("plan: unavailable ({e})"),
    }
}

fn check_divergence(fraction: f64, limit: f64) -> ExitCode {
    if fraction > limit {
        eprintln!(
            "error: {:.3}% of solves did not converge (limit {:.3}%)",
            100.0 * fraction,
            100.0 * limit
        );
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Inspect { run } => {
            let cfg = run.resolve()?;
            let (net, _) = load_case(&cfg)?;
            inspect(&cfg, &net);
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { run } => {
            let cfg = run.resolve()?;
            let (net, adm) = load_case(&cfg)?;
            let dataset = generate(&cfg, &net, &adm)?;
            println!(
                "wrote {} instances ({} train, {} test) to {}",
                dataset.instances.len(),
                dataset.train.len(),
                dataset.test.len(),
                cfg.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Benchmark { run } => {
            let cfg = run.resolve()?;
            let (net, adm) = load_case(&cfg)?;
            let bench = run_benchmark(&cfg, &net, &adm)?;
            write_benchmark(&cfg, &bench, &net)?;
            print!("{}", bench.files(&net, false).table2);
            log::info!("reports written to {}", cfg.out_dir.display());
            Ok(check_divergence(
                bench.divergence_fraction(),
                cfg.max_divergence,
            ))
        }
        Command::Sweep {
            run,
            cells,
            sweep_sf,
        } => {
            let mut cfg = run.resolve()?;
            if let Some(cells) = cells {
                cfg.set("sweep", &cells)?;
            }
            cfg.sweep_sf |= sweep_sf;
            let (net, adm) = load_case(&cfg)?;
            let sweep = run_sweep(&cfg, &net, &adm)?;
            write_sweep(&cfg, &sweep)?;
            print!("{}", lbse_core::evaluation::table4_csv(&sweep.rows));
            Ok(check_divergence(
                sweep.divergence_fraction(),
                cfg.max_divergence,
            ))
        }
    }
}

/// The error chain, skipping causes whose text the outer message already
/// includes.
fn render(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::FAILURE
        }
    }
}
