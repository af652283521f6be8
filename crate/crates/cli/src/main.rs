//! `cellfree-sim`: command-line front end for the cell-free massive MIMO
//! downlink simulator.
//!
//! Subcommands map one-to-one onto the library's studies. Settings resolve in
//! three layers: command-line flags override config-file values, which
//! override the built-in reference scenario. Every run writes a manifest
//! (the fully resolved configuration) next to its outputs, sufficient to
//! reproduce the run byte for byte.
//!
//! Exit codes: 0 success, 2 configuration error, 3 power-control solver
//! failure.

use cellfree_core::harness::{
    chd_study, compare_metrics, run_experiment, run_realization, write_chd_csv, write_metrics_csv,
    write_results_csv, write_single_shot_csv, ExperimentConfig, PowerMode, SchemeSeries,
};
use cellfree_core::pilot::{Selection, UtilityVariant};
use cellfree_core::SimError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cellfree-sim",
    version,
    about = "Downlink simulator for cell-free massive MIMO with selective downlink training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution of the per-UE channel hardening degree over deployments.
    ChdCdf(RunArgs),
    /// Compare the statistical-CSI, instantaneous-CSI and utility-based schemes.
    CompareSchemes(RunArgs),
    /// Compare pilot-utility metrics on identical realizations.
    CompareMetrics(RunArgs),
    /// Run a single realization and dump every per-UE quantity.
    SingleShot(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ChdCdf(_) => "chd-cdf",
            Command::CompareSchemes(_) => "compare-schemes",
            Command::CompareMetrics(_) => "compare-metrics",
            Command::SingleShot(_) => "single-shot",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::ChdCdf(a)
            | Command::CompareSchemes(a)
            | Command::CompareMetrics(a)
            | Command::SingleShot(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of access points.
    #[arg(long = "M")]
    num_aps: Option<usize>,
    /// Number of users.
    #[arg(long = "K")]
    num_ues: Option<usize>,
    /// Side of the square area in meters.
    #[arg(long)]
    side: Option<f64>,
    /// Symbols per TDD frame (coherence interval).
    #[arg(long)]
    tau: Option<usize>,
    /// Uplink pilot symbols per frame.
    #[arg(long = "tau-up")]
    tau_up: Option<usize>,
    /// Downlink pilot symbols per frame.
    #[arg(long = "tau-dp")]
    tau_dp: Option<usize>,
    /// Monte-Carlo realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Master seed; realization i uses stream (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Power control rule.
    #[arg(long, value_enum)]
    power: Option<PowerArg>,
    /// Pilot-utility metric for the utility-based scheme.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Mobility weight in the utility, in [0, 1].
    #[arg(long)]
    w: Option<f64>,
    /// Select exactly this many top-utility UEs.
    #[arg(long, conflicts_with = "threshold")]
    budget: Option<usize>,
    /// Select every UE with utility strictly above this value.
    #[arg(long)]
    threshold: Option<f64>,
    /// Directory for CSV outputs and the manifest.
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    /// Worker thread cap; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PowerArg {
    Uniform,
    Maxmin,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    #[value(name = "abs_rate")]
    AbsRate,
    #[value(name = "abs_throughput")]
    AbsThroughput,
    #[value(name = "rel_rate")]
    RelRate,
    #[value(name = "rel_throughput")]
    RelThroughput,
    #[value(name = "inverse_rate")]
    InverseRate,
    #[value(name = "chd_add")]
    ChdAdd,
    #[value(name = "chd_mul")]
    ChdMul,
}

impl From<PowerArg> for PowerMode {
    fn from(p: PowerArg) -> Self {
        match p {
            PowerArg::Uniform => PowerMode::Uniform,
            PowerArg::Maxmin => PowerMode::MaxMin,
        }
    }
}

impl From<MetricArg> for UtilityVariant {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::AbsRate => UtilityVariant::AbsRate,
            MetricArg::AbsThroughput => UtilityVariant::AbsThroughput,
            MetricArg::RelRate => UtilityVariant::RelRate,
            MetricArg::RelThroughput => UtilityVariant::RelThroughput,
            MetricArg::InverseRate => UtilityVariant::InverseRate,
            MetricArg::ChdAdd => UtilityVariant::ChdAdditive,
            MetricArg::ChdMul => UtilityVariant::ChdMultiplicative,
        }
    }
}

enum RunError {
    Config(String),
    Solver(String),
    Other(String),
}

impl RunError {
    fn exit_code(&self) -> ExitCode {
        match self {
            RunError::Config(_) => ExitCode::from(2),
            RunError::Solver(_) => ExitCode::from(3),
            RunError::Other(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Solver(m) | RunError::Other(m) => m,
        }
    }
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidArgument(_) => RunError::Config(e.to_string()),
            SimError::PowerSolverFailure { .. } => RunError::Solver(e.to_string()),
            SimError::Io(_) => RunError::Other(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(command: &Command) -> Result<(), RunError> {
    let resolved = resolve(command.args())?;
    let out_dir = resolved.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| RunError::Other(e.to_string()))?;
    write_manifest(&out_dir.join("manifest.txt"), command.name(), &resolved)?;

    let work = || -> Result<(), RunError> {
        let cfg = &resolved.cfg;
        match command {
            Command::ChdCdf(_) => {
                let study = chd_study(cfg)?;
                write_chd_csv(&out_dir.join("chd.csv"), &study)?;
                let samples = study.all_samples();
                let below = samples
                    .iter()
                    .filter(|&&c| c < study.collocated_reference)
                    .count();
                println!(
                    "chd-cdf: {} samples, collocated reference {:.4}, {:.1}% below it",
                    samples.len(),
                    study.collocated_reference,
                    100.0 * below as f64 / samples.len() as f64
                );
            }
            Command::CompareSchemes(_) => {
                let result = run_experiment(cfg)?;
                write_results_csv(&out_dir.join("results.csv"), &result)?;
                for series in [&result.scsi, &result.icsi, &result.ubpa] {
                    print_series(series);
                }
            }
            Command::CompareMetrics(_) => {
                let cmp = compare_metrics(cfg)?;
                write_metrics_csv(&out_dir.join("metrics.csv"), &cmp)?;
                for (_, series) in &cmp.variants {
                    print_series(series);
                }
            }
            Command::SingleShot(_) => {
                cfg.validate_for_schemes()?;
                let output = run_realization(cfg, 0)?;
                write_single_shot_csv(&out_dir.join("realization.csv"), &output)?;
                println!(
                    "single-shot: sum throughput scsi {:.3e}, icsi {:.3e}, ubpa {:.3e} bits/s",
                    output.scsi.sum_throughput(),
                    output.icsi.sum_throughput(),
                    output.ubpa.sum_throughput()
                );
            }
        }
        Ok(())
    };

    match resolved.jobs {
        Some(jobs) => {
            let pool = rayon_pool(jobs)?;
            pool.install(work)
        }
        None => work(),
    }
}

fn rayon_pool(jobs: usize) -> Result<rayon::ThreadPool, RunError> {
    if jobs == 0 {
        return Err(RunError::Config("jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError::Other(e.to_string()))
}

fn print_series(series: &SchemeSeries) {
    println!(
        "{}: mean per-UE throughput {:.4e} bits/s, sum-throughput p5/p50/p90 = {:.4e}/{:.4e}/{:.4e}",
        series.label,
        series.avg_per_ue_throughput,
        series.summary.p5,
        series.summary.p50,
        series.summary.p90
    );
}

// --- configuration resolution ----------------------------------------------

struct ResolvedRun {
    cfg: ExperimentConfig,
    output_dir: PathBuf,
    jobs: Option<usize>,
    /// Whether the selection was given explicitly (file or flag).
    explicit_selection: Option<Selection>,
}

/// Keys accepted in config files; they mirror the long flag names.
const CONFIG_KEYS: &[&str] = &[
    "M",
    "K",
    "side",
    "tau",
    "tau-up",
    "tau-dp",
    "realizations",
    "seed",
    "power",
    "metric",
    "w",
    "budget",
    "threshold",
    "output-dir",
    "jobs",
];

fn resolve(args: &RunArgs) -> Result<ResolvedRun, RunError> {
    let mut cfg = ExperimentConfig::default();
    let mut output_dir = PathBuf::from("out");
    let mut jobs = None;
    let mut selection: Option<Selection> = None;

    if let Some(path) = &args.config {
        apply_config_file(path, &mut cfg, &mut output_dir, &mut jobs, &mut selection)?;
    }

    // Flags win over file values.
    if let Some(v) = args.num_aps {
        cfg.num_aps = v;
    }
    if let Some(v) = args.num_ues {
        cfg.num_ues = v;
    }
    if let Some(v) = args.side {
        cfg.side_m = v;
    }
    if let Some(v) = args.tau {
        cfg.tau = v;
    }
    if let Some(v) = args.tau_up {
        cfg.tau_up = v;
    }
    if let Some(v) = args.tau_dp {
        cfg.tau_dp = v;
    }
    if let Some(v) = args.realizations {
        cfg.realizations = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.power {
        cfg.power_mode = v.into();
    }
    if let Some(v) = args.metric {
        cfg.utility_variant = v.into();
    }
    if let Some(v) = args.w {
        cfg.utility_weight = v;
    }
    if let Some(b) = args.budget {
        selection = Some(Selection::Budget(b));
    }
    if let Some(t) = args.threshold {
        selection = Some(Selection::Threshold(t));
    }
    if let Some(d) = &args.output_dir {
        output_dir = d.clone();
    }
    if let Some(j) = args.jobs {
        jobs = Some(j);
    }

    cfg.selection = selection.unwrap_or(Selection::Budget(cfg.tau_dp));
    Ok(ResolvedRun {
        cfg,
        output_dir,
        jobs,
        explicit_selection: selection,
    })
}

fn apply_config_file(
    path: &Path,
    cfg: &mut ExperimentConfig,
    output_dir: &mut PathBuf,
    jobs: &mut Option<usize>,
    selection: &mut Option<Selection>,
) -> Result<(), RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let diag =
        |line: usize, msg: String| RunError::Config(format!("{}:{line}: {msg}", path.display()));
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| diag(line_no, format!("expected key = value, got '{raw}'")))?;
        let key = key.trim();
        let value = value.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(diag(line_no, format!("unknown key '{key}'")));
        }
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|e| diag(line_no, format!("invalid integer '{v}': {e}")))
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| diag(line_no, format!("invalid number '{v}': {e}")))
        };
        match key {
            "M" => cfg.num_aps = parse_usize(value)?,
            "K" => cfg.num_ues = parse_usize(value)?,
            "side" => cfg.side_m = parse_f64(value)?,
            "tau" => cfg.tau = parse_usize(value)?,
            "tau-up" => cfg.tau_up = parse_usize(value)?,
            "tau-dp" => cfg.tau_dp = parse_usize(value)?,
            "realizations" => cfg.realizations = parse_usize(value)?,
            "seed" => {
                cfg.seed = value
                    .parse::<u64>()
                    .map_err(|e| diag(line_no, format!("invalid seed '{value}': {e}")))?
            }
            "power" => {
                cfg.power_mode = match value {
                    "uniform" => PowerMode::Uniform,
                    "maxmin" => PowerMode::MaxMin,
                    other => {
                        return Err(diag(
                            line_no,
                            format!("power must be uniform or maxmin, got '{other}'"),
                        ))
                    }
                }
            }
            "metric" => {
                cfg.utility_variant = match value {
                    "abs_rate" => UtilityVariant::AbsRate,
                    "abs_throughput" => UtilityVariant::AbsThroughput,
                    "rel_rate" => UtilityVariant::RelRate,
                    "rel_throughput" => UtilityVariant::RelThroughput,
                    "inverse_rate" => UtilityVariant::InverseRate,
                    "chd_add" => UtilityVariant::ChdAdditive,
                    "chd_mul" => UtilityVariant::ChdMultiplicative,
                    other => return Err(diag(line_no, format!("unknown metric '{other}'"))),
                }
            }
            "w" => cfg.utility_weight = parse_f64(value)?,
            "budget" => *selection = Some(Selection::Budget(parse_usize(value)?)),
            "threshold" => *selection = Some(Selection::Threshold(parse_f64(value)?)),
            "output-dir" => *output_dir = PathBuf::from(value),
            "jobs" => *jobs = Some(parse_usize(value)?),
            _ => unreachable!("key list checked above"),
        }
    }
    Ok(())
}

/// Writes the fully resolved configuration. Re-running any subcommand with
/// this file as `--config` reproduces the run exactly.
fn write_manifest(path: &Path, subcommand: &str, run: &ResolvedRun) -> Result<(), RunError> {
    let cfg = &run.cfg;
    let mut out = String::new();
    let _ = writeln!(out, "# cellfree-sim run manifest");
    let _ = writeln!(out, "# subcommand: {subcommand}");
    let _ = writeln!(out, "M = {}", cfg.num_aps);
    let _ = writeln!(out, "K = {}", cfg.num_ues);
    let _ = writeln!(out, "side = {}", cfg.side_m);
    let _ = writeln!(out, "tau = {}", cfg.tau);
    let _ = writeln!(out, "tau-up = {}", cfg.tau_up);
    let _ = writeln!(out, "tau-dp = {}", cfg.tau_dp);
    let _ = writeln!(out, "realizations = {}", cfg.realizations);
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "power = {}", cfg.power_mode.name());
    let _ = writeln!(out, "metric = {}", cfg.utility_variant.name());
    let _ = writeln!(out, "w = {}", cfg.utility_weight);
    match run.explicit_selection.unwrap_or(cfg.selection) {
        Selection::Budget(b) => {
            let _ = writeln!(out, "budget = {b}");
        }
        Selection::Threshold(t) => {
            let _ = writeln!(out, "threshold = {t}");
        }
    }
    let _ = writeln!(out, "output-dir = {}", run.output_dir.display());
    if let Some(jobs) = run.jobs {
        let _ = writeln!(out, "jobs = {jobs}");
    }
    std::fs::write(path, out).map_err(|e| RunError::Other(e.to_string()))
}
