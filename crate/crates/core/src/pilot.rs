//! Utility-based downlink pilot assignment and the three downlink schemes.
//!
//! Every UE always gets an orthogonal uplink pilot. Downlink pilots are the
//! scarce resource: the statistical-CSI scheme sends none, the
//! instantaneous-CSI scheme sends one per UE, and the utility-based scheme
//! ranks UEs by a pilot-utility metric and trains only the ones that need the
//! instantaneous estimate the most. UEs left out still pay the downlink
//! training overhead, since those symbols are blocked for everyone to avoid
//! data-to-pilot interference.
//!
//! Utilities are computed from large-scale quantities only (path gains,
//! estimate qualities, power coefficients and the rates derived from them);
//! no small-scale realization enters the decision.

use crate::error::{Result, SimError};
use crate::mat::Mat;
use crate::power::PowerCoefficients;
use crate::propagation::RadioConfig;
use crate::rates::{
    ahat_stats, channel_hardening_degree, interference_terms, net_throughput, rate_icsi, rate_scsi,
    FrameConfig,
};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityVariant {
    /// `w D + (1-w)(1-ChD) + alpha`
    ChdAdditive,
    /// `alpha [w D + (1-w)(1-ChD)]`
    ChdMultiplicative,
    /// `alpha [w D + (1-w)(R_icsi - R_scsi)]`
    AbsRate,
    /// `alpha [w D + (1-w)(T_icsi - T_scsi)]`
    AbsThroughput,
    /// `alpha [w D + (1-w)(R_icsi - R_scsi)/R_icsi]`
    RelRate,
    /// `alpha [w D + (1-w)(T_icsi - T_scsi)/T_icsi]`
    RelThroughput,
    /// `alpha [w D + (1-w)/R_scsi]`
    InverseRate,
}

impl UtilityVariant {
    pub fn needs_hardening(&self) -> bool {
        matches!(self, Self::ChdAdditive | Self::ChdMultiplicative)
    }

    pub fn needs_rates(&self) -> bool {
        matches!(self, Self::AbsRate | Self::RelRate | Self::InverseRate)
    }

    pub fn needs_throughputs(&self) -> bool {
        matches!(self, Self::AbsThroughput | Self::RelThroughput)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ChdAdditive => "chd_add",
            Self::ChdMultiplicative => "chd_mul",
            Self::AbsRate => "abs_rate",
            Self::AbsThroughput => "abs_throughput",
            Self::RelRate => "rel_rate",
            Self::RelThroughput => "rel_throughput",
            Self::InverseRate => "inverse_rate",
        }
    }
}

/// How the ranked UEs are admitted to the downlink training phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Every UE whose utility strictly exceeds the threshold, truncated to
    /// the available pilot symbols if oversubscribed.
    Threshold(f64),
    /// Exactly this many top-utility UEs.
    Budget(usize),
}

#[derive(Debug, Clone)]
pub struct UtilityConfig {
    pub variant: UtilityVariant,
    /// Weight trading mobility against the channel term, in [0, 1].
    pub weight: f64,
    /// Per-UE QoS priority, each in [0, 1].
    pub priority: Vec<f64>,
    /// Per-UE normalized Doppler spread, each in [0, 1].
    pub doppler: Vec<f64>,
    pub selection: Selection,
}

impl UtilityConfig {
    pub fn new(
        variant: UtilityVariant,
        weight: f64,
        priority: Vec<f64>,
        doppler: Vec<f64>,
        selection: Selection,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(SimError::invalid("weight must lie in [0, 1]"));
        }
        if priority.len() != doppler.len() {
            return Err(SimError::invalid("priority/doppler length mismatch"));
        }
        if priority.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(SimError::invalid("priorities must lie in [0, 1]"));
        }
        if doppler.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(SimError::invalid("Doppler spreads must lie in [0, 1]"));
        }
        Ok(Self {
            variant,
            weight,
            priority,
            doppler,
            selection,
        })
    }

    /// All UEs share one priority and one Doppler value.
    pub fn uniform(
        variant: UtilityVariant,
        weight: f64,
        priority: f64,
        doppler: f64,
        selection: Selection,
        num_ues: usize,
    ) -> Result<Self> {
        Self::new(
            variant,
            weight,
            vec![priority; num_ues],
            vec![doppler; num_ues],
            selection,
        )
    }

    pub fn num_ues(&self) -> usize {
        self.priority.len()
    }
}

/// Per-UE inputs the utility variants draw from; only the slices a variant
/// needs have to be present.
#[derive(Debug, Clone, Copy, Default)]
pub struct UtilityInputs<'a> {
    pub hardening: Option<&'a [f64]>,
    pub rate_scsi: Option<&'a [f64]>,
    pub rate_icsi: Option<&'a [f64]>,
    pub throughput_scsi: Option<&'a [f64]>,
    pub throughput_icsi: Option<&'a [f64]>,
}

/// The set of UEs granted an orthogonal downlink pilot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pilot_ues: BTreeSet<usize>,
}

impl Assignment {
    pub fn is_selected(&self, ue: usize) -> bool {
        self.pilot_ues.contains(&ue)
    }

    pub fn len(&self) -> usize {
        self.pilot_ues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilot_ues.is_empty()
    }

    pub fn ues(&self) -> impl Iterator<Item = usize> + '_ {
        self.pilot_ues.iter().copied()
    }
}

/// Evaluates the configured pilot-utility metric for every UE. A zero
/// denominator in the relative and inverse variants marks the UE as maximally
/// needing a pilot (`+inf`), except that a zero priority always pins the
/// multiplicative variants to zero.
pub fn pilot_utility(cfg: &UtilityConfig, inputs: &UtilityInputs) -> Result<Vec<f64>> {
    let k = cfg.num_ues();
    let need = |slice: Option<&[f64]>, what: &str| -> Result<Vec<f64>> {
        let s = slice.ok_or_else(|| {
            SimError::invalid(format!("{what} required for {}", cfg.variant.name()))
        })?;
        if s.len() != k {
            return Err(SimError::invalid(format!(
                "{what} has {} entries, expected {k}",
                s.len()
            )));
        }
        Ok(s.to_vec())
    };

    // Channel-quality term of the metric, before weighting.
    let channel: Vec<f64> = match cfg.variant {
        UtilityVariant::ChdAdditive | UtilityVariant::ChdMultiplicative => {
            need(inputs.hardening, "channel hardening degrees")?
                .iter()
                .map(|c| 1.0 - c)
                .collect()
        }
        UtilityVariant::AbsRate => {
            let rs = need(inputs.rate_scsi, "statistical-CSI rates")?;
            let ri = need(inputs.rate_icsi, "instantaneous-CSI rates")?;
            ri.iter().zip(&rs).map(|(i, s)| i - s).collect()
        }
        UtilityVariant::AbsThroughput => {
            let ts = need(inputs.throughput_scsi, "statistical-CSI throughputs")?;
            let ti = need(inputs.throughput_icsi, "instantaneous-CSI throughputs")?;
            ti.iter().zip(&ts).map(|(i, s)| i - s).collect()
        }
        UtilityVariant::RelRate => {
            let rs = need(inputs.rate_scsi, "statistical-CSI rates")?;
            let ri = need(inputs.rate_icsi, "instantaneous-CSI rates")?;
            ri.iter()
                .zip(&rs)
                .map(|(i, s)| {
                    if *i == 0.0 {
                        f64::INFINITY
                    } else {
                        (i - s) / i
                    }
                })
                .collect()
        }
        UtilityVariant::RelThroughput => {
            let ts = need(inputs.throughput_scsi, "statistical-CSI throughputs")?;
            let ti = need(inputs.throughput_icsi, "instantaneous-CSI throughputs")?;
            ti.iter()
                .zip(&ts)
                .map(|(i, s)| {
                    if *i == 0.0 {
                        f64::INFINITY
                    } else {
                        (i - s) / i
                    }
                })
                .collect()
        }
        UtilityVariant::InverseRate => need(inputs.rate_scsi, "statistical-CSI rates")?
            .iter()
            .map(|r| if *r == 0.0 { f64::INFINITY } else { 1.0 / r })
            .collect(),
    };

    Ok((0..k)
        .map(|ue| {
            let w = cfg.weight;
            let mobility = w * cfg.doppler[ue];
            // At w = 1 the channel term drops entirely, even if infinite.
            let inner = if w == 1.0 {
                mobility
            } else {
                mobility + (1.0 - w) * channel[ue]
            };
            let alpha = cfg.priority[ue];
            match cfg.variant {
                UtilityVariant::ChdAdditive => inner + alpha,
                // A zero-priority UE is never selected, whatever its channel.
                _ if alpha == 0.0 => 0.0,
                _ => alpha * inner,
            }
        })
        .collect())
}

/// Picks the UEs to train. Budget mode admits exactly `budget` UEs by
/// descending utility; threshold mode admits every UE strictly above the
/// threshold, truncated to the `tau_dp` best if oversubscribed. Ties break
/// toward the lowest UE index.
pub fn select_ues(utility: &[f64], selection: &Selection, tau_dp: usize) -> Result<Assignment> {
    if utility.iter().any(|u| u.is_nan()) {
        return Err(SimError::invalid("utilities must not be NaN"));
    }
    let mut order: Vec<usize> = (0..utility.len()).collect();
    order.sort_by(|&a, &b| {
        utility[b]
            .partial_cmp(&utility[a])
            .expect("NaN ruled out above")
            .then(a.cmp(&b))
    });
    let picked: BTreeSet<usize> = match *selection {
        Selection::Budget(budget) => {
            if budget > tau_dp {
                return Err(SimError::invalid(format!(
                    "budget {budget} exceeds the {tau_dp} downlink pilot symbols"
                )));
            }
            order.into_iter().take(budget).collect()
        }
        Selection::Threshold(threshold) => order
            .into_iter()
            .filter(|&ue| utility[ue] > threshold)
            .take(tau_dp)
            .collect(),
    };
    Ok(Assignment { pilot_ues: picked })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// No downlink training; every UE decodes from statistics.
    Scsi,
    /// One orthogonal downlink pilot per UE.
    Icsi,
    /// Utility-based selective downlink training.
    Ubpa,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Scsi => "scsi",
            Self::Icsi => "icsi",
            Self::Ubpa => "ubpa",
        }
    }
}

/// A scheme together with its frame split. Construction checks the split
/// matches the scheme: no downlink pilots for `Scsi`, one per UE for `Icsi`,
/// and between one and `K` for `Ubpa`.
#[derive(Debug, Clone, Copy)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub frame: FrameConfig,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, frame: FrameConfig, num_ues: usize) -> Result<Self> {
        match kind {
            SchemeKind::Scsi if frame.tau_dp() != 0 => Err(SimError::invalid(
                "statistical-CSI scheme must not reserve downlink pilot symbols",
            )),
            SchemeKind::Icsi if frame.tau_dp() != num_ues => Err(SimError::invalid(format!(
                "instantaneous-CSI scheme needs one downlink pilot per UE ({num_ues}), got {}",
                frame.tau_dp()
            ))),
            SchemeKind::Ubpa if frame.tau_dp() == 0 || frame.tau_dp() > num_ues => {
                Err(SimError::invalid(format!(
                    "utility-based scheme needs between 1 and {num_ues} downlink pilot symbols, got {}",
                    frame.tau_dp()
                )))
            }
            _ => Ok(Self { kind, frame }),
        }
    }
}

/// Per-UE rates (bits/s/Hz) and net throughputs (bits/s) under one scheme.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub scheme: SchemeKind,
    pub rates: Vec<f64>,
    pub throughputs: Vec<f64>,
}

impl RateReport {
    pub fn sum_throughput(&self) -> f64 {
        self.throughputs.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub report: RateReport,
    /// Which UEs got a downlink pilot; only the utility-based scheme selects.
    pub assignment: Option<Assignment>,
}

/// Evaluates one scheme on a realization's large-scale state.
///
/// For the utility-based scheme, both candidate rates are computed with the
/// scheme's own downlink training length, utilities are formed per the
/// config, the best UEs are admitted, and each UE is charged the full pilot
/// overhead whether or not it was trained. Throughput-based utilities compare
/// the two baseline schemes' overheads (no training vs. training everyone).
pub fn evaluate_scheme(
    spec: &SchemeSpec,
    eta: &PowerCoefficients,
    beta: &Mat,
    gamma: &Mat,
    radio: &RadioConfig,
    utility: &UtilityConfig,
    quad_order: usize,
) -> Result<SchemeOutcome> {
    let num_ues = beta.cols();
    let frame = &spec.frame;
    match spec.kind {
        SchemeKind::Scsi => {
            let rates = rate_scsi(eta, beta, gamma, radio.rho_d);
            let throughputs = net_throughput(&rates, frame, radio.bandwidth_hz);
            Ok(SchemeOutcome {
                report: RateReport {
                    scheme: spec.kind,
                    rates,
                    throughputs,
                },
                assignment: None,
            })
        }
        SchemeKind::Icsi => {
            let varsigma = interference_terms(eta, beta, gamma);
            let selfs: Vec<f64> = (0..num_ues).map(|k| varsigma.self_term(k)).collect();
            let ahat = ahat_stats(eta, gamma, &selfs, frame.tau_dp(), radio.rho_dp);
            let rates = rate_icsi(
                &ahat,
                &varsigma,
                radio.rho_d,
                frame.tau_dp(),
                radio.rho_dp,
                quad_order,
            )?;
            let throughputs = net_throughput(&rates, frame, radio.bandwidth_hz);
            Ok(SchemeOutcome {
                report: RateReport {
                    scheme: spec.kind,
                    rates,
                    throughputs,
                },
                assignment: None,
            })
        }
        SchemeKind::Ubpa => {
            if frame.tau_dp() == 0 {
                return Err(SimError::invalid(
                    "utility-based scheme is degenerate without downlink pilots",
                ));
            }
            let r_scsi = rate_scsi(eta, beta, gamma, radio.rho_d);
            let varsigma = interference_terms(eta, beta, gamma);
            let selfs: Vec<f64> = (0..num_ues).map(|k| varsigma.self_term(k)).collect();
            let ahat = ahat_stats(eta, gamma, &selfs, frame.tau_dp(), radio.rho_dp);
            let r_icsi = rate_icsi(
                &ahat,
                &varsigma,
                radio.rho_d,
                frame.tau_dp(),
                radio.rho_dp,
                quad_order,
            )?;

            let hardening;
            let t_scsi;
            let t_icsi;
            let mut inputs = UtilityInputs {
                rate_scsi: Some(&r_scsi),
                rate_icsi: Some(&r_icsi),
                ..UtilityInputs::default()
            };
            if utility.variant.needs_hardening() {
                hardening = channel_hardening_degree(beta)?;
                inputs.hardening = Some(&hardening);
            }
            if utility.variant.needs_throughputs() {
                let scsi_frame = FrameConfig::new(frame.tau(), frame.tau_up(), 0)?;
                let icsi_frame = FrameConfig::new(frame.tau(), frame.tau_up(), num_ues)?;
                t_scsi = net_throughput(&r_scsi, &scsi_frame, radio.bandwidth_hz);
                t_icsi = net_throughput(&r_icsi, &icsi_frame, radio.bandwidth_hz);
                inputs.throughput_scsi = Some(&t_scsi);
                inputs.throughput_icsi = Some(&t_icsi);
            }

            let utilities = pilot_utility(utility, &inputs)?;
            let assignment = select_ues(&utilities, &utility.selection, frame.tau_dp())?;

            let rates: Vec<f64> = (0..num_ues)
                .map(|ue| {
                    if assignment.is_selected(ue) {
                        r_icsi[ue]
                    } else {
                        r_scsi[ue]
                    }
                })
                .collect();
            // Everyone pays the training overhead: the pilot symbols are
            // blocked for data regardless of selection.
            let throughputs = net_throughput(&rates, frame, radio.bandwidth_hz);
            Ok(SchemeOutcome {
                report: RateReport {
                    scheme: spec.kind,
                    rates,
                    throughputs,
                },
                assignment: Some(assignment),
            })
        }
    }
}
