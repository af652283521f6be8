//! Monte-Carlo experiment driver: draws large-scale realizations, runs power
//! control once per realization, evaluates the three downlink schemes on the
//! shared state, and aggregates throughput distributions.
//!
//! Realization `i` of a run with seed `s` always consumes RNG stream `(s, i)`,
//! so results are independent of execution order and worker count, and any
//! run is reproducible bit for bit from its manifest.

use crate::error::{Result, SimError};
use crate::geometry::Deployment;
use crate::pilot::{
    evaluate_scheme, Assignment, RateReport, SchemeKind, SchemeSpec, Selection, UtilityConfig,
    UtilityVariant,
};
use crate::power::{maxmin_power, uniform_power, MaxMinSettings, PowerCoefficients};
use crate::propagation::{
    cost231_constant, estimate_quality, large_scale_fading, LargeScaleState, PropagationParams,
    RadioConfig,
};
use crate::rates::{channel_hardening_degree, FrameConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    Uniform,
    MaxMin,
}

impl PowerMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::MaxMin => "maxmin",
        }
    }
}

/// Full description of an experiment. The default is the reference scenario:
/// 200 APs and 50 UEs on a 1 km^2 wrap-around square, 200-symbol frames with
/// 50 uplink and 25 downlink pilot symbols, 20 MHz at 2 GHz, 8 dB shadowing,
/// max-min power control, and the absolute-rate-increase utility with a
/// budget of 25 pilots.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub num_aps: usize,
    pub num_ues: usize,
    pub side_m: f64,
    pub tau: usize,
    pub tau_up: usize,
    pub tau_dp: usize,
    pub radio: RadioConfig,
    pub propagation: PropagationParams,
    pub utility_variant: UtilityVariant,
    pub utility_weight: f64,
    pub priority: f64,
    pub doppler: f64,
    pub selection: Selection,
    pub power_mode: PowerMode,
    pub maxmin: MaxMinSettings,
    pub realizations: usize,
    pub seed: u64,
    pub quad_order: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_aps: 200,
            num_ues: 50,
            side_m: 1000.0,
            tau: 200,
            tau_up: 50,
            tau_dp: 25,
            radio: RadioConfig::default(),
            propagation: PropagationParams::default(),
            utility_variant: UtilityVariant::AbsRate,
            utility_weight: 0.0,
            priority: 1.0,
            doppler: 0.0,
            selection: Selection::Budget(25),
            power_mode: PowerMode::MaxMin,
            maxmin: MaxMinSettings::default(),
            realizations: 200,
            seed: 1,
            quad_order: 24,
        }
    }
}

impl ExperimentConfig {
    /// Checks the parts every study needs: geometry, frame and sampling.
    pub fn validate_geometry(&self) -> Result<()> {
        if self.num_aps == 0 || self.num_ues == 0 {
            return Err(SimError::invalid("need at least one AP and one UE"));
        }
        if self.side_m.is_nan() || self.side_m <= 0.0 {
            return Err(SimError::invalid("area side must be positive"));
        }
        if self.realizations == 0 {
            return Err(SimError::invalid("need at least one realization"));
        }
        self.propagation.validate()?;
        Ok(())
    }

    /// Checks everything the scheme comparison needs on top of geometry:
    /// more APs than UEs, orthogonal uplink pilots, constructible frames and
    /// a selection that fits the downlink training phase.
    pub fn validate_for_schemes(&self) -> Result<()> {
        self.validate_geometry()?;
        if self.num_aps <= self.num_ues {
            return Err(SimError::invalid(format!(
                "need more APs than UEs, got M={} K={}",
                self.num_aps, self.num_ues
            )));
        }
        if self.tau_up < self.num_ues {
            return Err(SimError::invalid(format!(
                "orthogonal uplink pilots need tau_up >= K, got tau_up={} K={}",
                self.tau_up, self.num_ues
            )));
        }
        if self.quad_order < 2 {
            return Err(SimError::invalid("quadrature order must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.utility_weight) {
            return Err(SimError::invalid("utility weight must lie in [0, 1]"));
        }
        if let Selection::Budget(b) = self.selection {
            if b > self.tau_dp {
                return Err(SimError::invalid(format!(
                    "budget {b} exceeds the {} downlink pilot symbols",
                    self.tau_dp
                )));
            }
        }
        self.maxmin.validate()?;
        self.scheme_specs()?;
        self.utility_config(self.utility_variant)?;
        Ok(())
    }

    /// The three frame splits under comparison: no downlink training, one
    /// pilot per UE, and the configured selective split.
    pub fn scheme_specs(&self) -> Result<[SchemeSpec; 3]> {
        let scsi = SchemeSpec::new(
            SchemeKind::Scsi,
            FrameConfig::new(self.tau, self.tau_up, 0)?,
            self.num_ues,
        )?;
        let icsi = SchemeSpec::new(
            SchemeKind::Icsi,
            FrameConfig::new(self.tau, self.tau_up, self.num_ues)?,
            self.num_ues,
        )?;
        let ubpa = SchemeSpec::new(
            SchemeKind::Ubpa,
            FrameConfig::new(self.tau, self.tau_up, self.tau_dp)?,
            self.num_ues,
        )?;
        Ok([scsi, icsi, ubpa])
    }

    pub fn utility_config(&self, variant: UtilityVariant) -> Result<UtilityConfig> {
        UtilityConfig::uniform(
            variant,
            self.utility_weight,
            self.priority,
            self.doppler,
            self.selection,
            self.num_ues,
        )
    }

    /// The dedicated RNG stream of one realization.
    pub fn stream(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Shared large-scale state of one realization: everything upstream of the
/// pilot-assignment decision.
#[derive(Debug, Clone)]
pub struct RealizationState {
    pub index: usize,
    pub large_scale: LargeScaleState,
    pub eta: PowerCoefficients,
    pub chd: Vec<f64>,
}

/// Draws deployment, path gains, estimate qualities and power coefficients
/// for realization `index`. Deterministic in `(seed, index)`.
pub fn draw_realization_state(cfg: &ExperimentConfig, index: usize) -> Result<RealizationState> {
    let mut rng = cfg.stream(index);
    let dep = Deployment::generate(cfg.num_aps, cfg.num_ues, cfg.side_m, &mut rng)?;
    let l = cost231_constant(&cfg.propagation);
    let beta = large_scale_fading(&dep, &cfg.propagation, l, &mut rng)?;
    let gamma = estimate_quality(&beta, cfg.tau_up, cfg.radio.rho_up);
    let large_scale = LargeScaleState::new(beta, gamma)?;
    let eta = match cfg.power_mode {
        PowerMode::Uniform => uniform_power(&large_scale.gamma),
        PowerMode::MaxMin => maxmin_power(
            &large_scale.beta,
            &large_scale.gamma,
            cfg.radio.rho_d,
            &cfg.maxmin,
        )?,
    };
    let chd = channel_hardening_degree(&large_scale.beta)?;
    Ok(RealizationState {
        index,
        large_scale,
        eta,
        chd,
    })
}

/// One realization's outputs under all three schemes.
#[derive(Debug, Clone)]
pub struct RealizationOutput {
    pub index: usize,
    pub chd: Vec<f64>,
    pub scsi: RateReport,
    pub icsi: RateReport,
    pub ubpa: RateReport,
    pub assignment: Assignment,
}

pub fn run_realization(cfg: &ExperimentConfig, index: usize) -> Result<RealizationOutput> {
    let state = draw_realization_state(cfg, index)?;
    let [scsi_spec, icsi_spec, ubpa_spec] = cfg.scheme_specs()?;
    let utility = cfg.utility_config(cfg.utility_variant)?;
    let eval = |spec: &SchemeSpec| {
        evaluate_scheme(
            spec,
            &state.eta,
            &state.large_scale.beta,
            &state.large_scale.gamma,
            &cfg.radio,
            &utility,
            cfg.quad_order,
        )
    };
    let scsi = eval(&scsi_spec)?;
    let icsi = eval(&icsi_spec)?;
    let ubpa = eval(&ubpa_spec)?;
    Ok(RealizationOutput {
        index,
        chd: state.chd,
        scsi: scsi.report,
        icsi: icsi.report,
        ubpa: ubpa.report,
        assignment: ubpa
            .assignment
            .expect("utility-based scheme always selects"),
    })
}

/// Empirical distribution summary: sorted samples plus the percentiles the
/// studies report.
#[derive(Debug, Clone)]
pub struct StatSummary {
    sorted: Vec<f64>,
    pub mean: f64,
    pub p5: f64,
    pub p50: f64,
    pub p90: f64,
}

impl StatSummary {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(SimError::invalid("cannot summarize an empty sample set"));
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(SimError::invalid("samples must not be NaN"));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("NaN ruled out above"));
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let p5 = percentile_sorted(&samples, 5.0);
        let p50 = percentile_sorted(&samples, 50.0);
        let p90 = percentile_sorted(&samples, 90.0);
        Ok(Self {
            sorted: samples,
            mean,
            p5,
            p50,
            p90,
        })
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn percentile(&self, p: f64) -> Result<f64> {
        if !(0.0..=100.0).contains(&p) {
            return Err(SimError::invalid("percentile must lie in [0, 100]"));
        }
        Ok(percentile_sorted(&self.sorted, p))
    }
}

/// The empirical CDF as sorted `(value, probability)` steps.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(SimError::invalid("cannot build a CDF from no samples"));
    }
    let mut sorted = samples.to_vec();
    if sorted.iter().any(|s| s.is_nan()) {
        return Err(SimError::invalid("samples must not be NaN"));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN ruled out above"));
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(SimError::invalid("cannot take a percentile of no samples"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(SimError::invalid("percentile must lie in [0, 100]"));
    }
    let mut sorted = samples.to_vec();
    if sorted.iter().any(|s| s.is_nan()) {
        return Err(SimError::invalid("samples must not be NaN"));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN ruled out above"));
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Per-scheme aggregate over a run: the sum-throughput sample per
/// realization (in realization order), its distribution summary, and the
/// average per-UE net throughput.
#[derive(Debug, Clone)]
pub struct SchemeSeries {
    pub label: String,
    pub sum_throughput: Vec<f64>,
    pub summary: StatSummary,
    pub avg_per_ue_throughput: f64,
}

impl SchemeSeries {
    fn new(label: &str, sums: Vec<f64>, num_ues: usize) -> Result<Self> {
        let summary = StatSummary::from_samples(sums.clone())?;
        let avg = summary.mean / num_ues as f64;
        Ok(Self {
            label: label.to_string(),
            sum_throughput: sums,
            summary,
            avg_per_ue_throughput: avg,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scsi: SchemeSeries,
    pub icsi: SchemeSeries,
    pub ubpa: SchemeSeries,
    pub num_ues: usize,
}

/// Runs the configured number of realizations (in parallel) and aggregates
/// the downlink net sum throughput per scheme.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate_for_schemes()?;
    let outputs: Vec<RealizationOutput> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| run_realization(cfg, i))
        .collect::<Result<_>>()?;
    let sums = |pick: fn(&RealizationOutput) -> &RateReport| -> Vec<f64> {
        outputs.iter().map(|o| pick(o).sum_throughput()).collect()
    };
    Ok(ExperimentResult {
        scsi: SchemeSeries::new("scsi", sums(|o| &o.scsi), cfg.num_ues)?,
        icsi: SchemeSeries::new("icsi", sums(|o| &o.icsi), cfg.num_ues)?,
        ubpa: SchemeSeries::new("ubpa", sums(|o| &o.ubpa), cfg.num_ues)?,
        num_ues: cfg.num_ues,
    })
}

/// Channel-hardening study: the distribution of the per-UE hardening degree
/// over deployments, against the collocated-array reference `1 - 1/M`.
#[derive(Debug, Clone)]
pub struct ChdStudy {
    /// One vector of per-UE hardening degrees per realization.
    pub per_realization: Vec<Vec<f64>>,
    pub collocated_reference: f64,
}

impl ChdStudy {
    pub fn all_samples(&self) -> Vec<f64> {
        self.per_realization.iter().flatten().copied().collect()
    }
}

/// Computes hardening degrees over fresh deployments. Skips power control
/// entirely; hardening only depends on the path gains.
pub fn chd_study(cfg: &ExperimentConfig) -> Result<ChdStudy> {
    cfg.validate_geometry()?;
    let per_realization: Vec<Vec<f64>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.stream(i);
            let dep = Deployment::generate(cfg.num_aps, cfg.num_ues, cfg.side_m, &mut rng)?;
            let l = cost231_constant(&cfg.propagation);
            let beta = large_scale_fading(&dep, &cfg.propagation, l, &mut rng)?;
            channel_hardening_degree(&beta)
        })
        .collect::<Result<_>>()?;
    Ok(ChdStudy {
        per_realization,
        collocated_reference: 1.0 - 1.0 / cfg.num_aps as f64,
    })
}

#[derive(Debug, Clone)]
pub struct MetricComparison {
    pub scsi: SchemeSeries,
    pub icsi: SchemeSeries,
    /// Utility-based scheme aggregates, one per compared metric, all
    /// evaluated on identical realizations (same seed, same power control).
    pub variants: Vec<(UtilityVariant, SchemeSeries)>,
}

/// The metric variants the comparison study reports.
pub const COMPARED_METRICS: [UtilityVariant; 3] = [
    UtilityVariant::AbsRate,
    UtilityVariant::AbsThroughput,
    UtilityVariant::ChdMultiplicative,
];

/// Compares pilot-utility metrics on shared realizations: each realization's
/// deployment, fading and power control are computed once, then the
/// utility-based scheme is evaluated once per metric. The baselines come
/// along for free.
pub fn compare_metrics(cfg: &ExperimentConfig) -> Result<MetricComparison> {
    cfg.validate_for_schemes()?;
    for variant in COMPARED_METRICS {
        cfg.utility_config(variant)?;
    }
    struct PerRealization {
        scsi: f64,
        icsi: f64,
        ubpa: Vec<f64>,
    }
    let rows: Vec<PerRealization> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| -> Result<PerRealization> {
            let state = draw_realization_state(cfg, i)?;
            let [scsi_spec, icsi_spec, ubpa_spec] = cfg.scheme_specs()?;
            let any_utility = cfg.utility_config(cfg.utility_variant)?;
            let eval = |spec: &SchemeSpec, utility: &UtilityConfig| {
                evaluate_scheme(
                    spec,
                    &state.eta,
                    &state.large_scale.beta,
                    &state.large_scale.gamma,
                    &cfg.radio,
                    utility,
                    cfg.quad_order,
                )
            };
            let scsi = eval(&scsi_spec, &any_utility)?.report.sum_throughput();
            let icsi = eval(&icsi_spec, &any_utility)?.report.sum_throughput();
            let ubpa = COMPARED_METRICS
                .iter()
                .map(|&variant| {
                    let utility = cfg.utility_config(variant)?;
                    Ok(eval(&ubpa_spec, &utility)?.report.sum_throughput())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(PerRealization { scsi, icsi, ubpa })
        })
        .collect::<Result<_>>()?;

    let variants = COMPARED_METRICS
        .iter()
        .enumerate()
        .map(|(vi, &variant)| {
            let sums: Vec<f64> = rows.iter().map(|r| r.ubpa[vi]).collect();
            Ok((
                variant,
                SchemeSeries::new(variant.name(), sums, cfg.num_ues)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricComparison {
        scsi: SchemeSeries::new("scsi", rows.iter().map(|r| r.scsi).collect(), cfg.num_ues)?,
        icsi: SchemeSeries::new("icsi", rows.iter().map(|r| r.icsi).collect(), cfg.num_ues)?,
        variants,
    })
}

// --- CSV serialization ----------------------------------------------------
//
// Formats are part of the tool's contract:
//   results.csv: realization,scheme,sum_throughput_bps,mean_per_ue_throughput_bps
//   chd.csv:     realization,ue,chd
//   metrics.csv: metric,realization,sum_throughput_bps
//   single.csv:  ue,chd,rate_scsi_bps_hz,rate_icsi_bps_hz,rate_ubpa_bps_hz,
//                throughput_scsi_bps,throughput_icsi_bps,throughput_ubpa_bps,dl_pilot
// Rows are ordered by realization index (schemes in scsi, icsi, ubpa order
// within a realization), so identical runs produce identical bytes.

pub fn write_results_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut out = String::new();
    out.push_str("realization,scheme,sum_throughput_bps,mean_per_ue_throughput_bps\n");
    let k = result.num_ues as f64;
    for i in 0..result.scsi.sum_throughput.len() {
        for series in [&result.scsi, &result.icsi, &result.ubpa] {
            let sum = series.sum_throughput[i];
            out.push_str(&format!("{i},{},{sum},{}\n", series.label, sum / k));
        }
    }
    write_file(path, &out)
}

pub fn write_chd_csv(path: &Path, study: &ChdStudy) -> Result<()> {
    let mut out = String::new();
    out.push_str("realization,ue,chd\n");
    for (i, per_ue) in study.per_realization.iter().enumerate() {
        for (ue, chd) in per_ue.iter().enumerate() {
            out.push_str(&format!("{i},{ue},{chd}\n"));
        }
    }
    write_file(path, &out)
}

pub fn write_metrics_csv(path: &Path, comparison: &MetricComparison) -> Result<()> {
    let mut out = String::new();
    out.push_str("metric,realization,sum_throughput_bps\n");
    for (variant, series) in &comparison.variants {
        for (i, sum) in series.sum_throughput.iter().enumerate() {
            out.push_str(&format!("{},{i},{sum}\n", variant.name()));
        }
    }
    write_file(path, &out)
}

pub fn write_single_shot_csv(path: &Path, output: &RealizationOutput) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "ue,chd,rate_scsi_bps_hz,rate_icsi_bps_hz,rate_ubpa_bps_hz,\
         throughput_scsi_bps,throughput_icsi_bps,throughput_ubpa_bps,dl_pilot\n",
    );
    for ue in 0..output.chd.len() {
        out.push_str(&format!(
            "{ue},{},{},{},{},{},{},{},{}\n",
            output.chd[ue],
            output.scsi.rates[ue],
            output.icsi.rates[ue],
            output.ubpa.rates[ue],
            output.scsi.throughputs[ue],
            output.icsi.throughputs[ue],
            output.ubpa.throughputs[ue],
            output.assignment.is_selected(ue) as u8,
        ));
    }
    write_file(path, &out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}
