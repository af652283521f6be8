//! Achievable downlink rates, channel hardening, effective-channel-estimate
//! statistics, and pilot-overhead-discounted net throughput.
//!
//! Two rate expressions are evaluated per UE from the same large-scale state:
//! the statistical-CSI rate, a closed form, and the instantaneous-CSI rate, an
//! expectation over the downlink channel estimate evaluated by 2-D
//! Gauss-Hermite quadrature (with a Monte-Carlo twin used as an oracle).

use crate::error::{Result, SimError};
use crate::mat::Mat;
use crate::power::{sinr_scsi, PowerCoefficients};
use crate::quad::gauss_hermite;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// TDD frame split: `tau` symbols per coherence interval, of which `tau_up`
/// carry uplink pilots and `tau_dp` downlink pilots. The remaining
/// `tau - tau_p` symbols split evenly between downlink and uplink data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    tau: usize,
    tau_up: usize,
    tau_dp: usize,
}

impl FrameConfig {
    pub fn new(tau: usize, tau_up: usize, tau_dp: usize) -> Result<Self> {
        if tau == 0 {
            return Err(SimError::invalid("frame length must be positive"));
        }
        if tau_up + tau_dp > tau {
            return Err(SimError::invalid(format!(
                "pilot overhead {} exceeds frame length {tau}",
                tau_up + tau_dp
            )));
        }
        Ok(Self {
            tau,
            tau_up,
            tau_dp,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn tau_up(&self) -> usize {
        self.tau_up
    }

    pub fn tau_dp(&self) -> usize {
        self.tau_dp
    }

    /// Total pilot overhead per frame.
    pub fn tau_p(&self) -> usize {
        self.tau_up + self.tau_dp
    }

    /// Data symbols per direction under the symmetric split. Fractional when
    /// `tau - tau_p` is odd; the throughput expression absorbs the half.
    pub fn data_symbols_per_direction(&self) -> f64 {
        (self.tau - self.tau_p()) as f64 / 2.0
    }

    /// Whether pilots stay within half the coherence interval, the rule of
    /// thumb that keeps the frame worth transmitting in.
    pub fn respects_half_frame_rule(&self) -> bool {
        2 * self.tau_p() <= self.tau
    }
}

/// The K x K interference coupling matrix with entries
/// `varsigma[k][k'] = sum_m eta[m][k'] beta[m][k] gamma[m][k']`: how much of
/// the power spent on UE `k'` lands at UE `k`.
#[derive(Debug, Clone)]
pub struct InterferenceTerms {
    varsigma: Mat,
}

impl InterferenceTerms {
    pub fn varsigma(&self) -> &Mat {
        &self.varsigma
    }

    /// The `k = k'` self term, the beamforming-uncertainty penalty.
    pub fn self_term(&self, ue: usize) -> f64 {
        self.varsigma[(ue, ue)]
    }

    /// Interference from all other UEs' beams: `sum_{k' != k}`.
    pub fn cross_sum(&self, ue: usize) -> f64 {
        (0..self.varsigma.cols())
            .filter(|&j| j != ue)
            .map(|j| self.varsigma[(ue, j)])
            .sum()
    }
}

pub fn interference_terms(eta: &PowerCoefficients, beta: &Mat, gamma: &Mat) -> InterferenceTerms {
    let e = eta.eta();
    assert!(
        e.same_shape(beta) && e.same_shape(gamma),
        "power/beta/gamma shape mismatch"
    );
    let m = e.rows();
    let k = e.cols();
    let varsigma = Mat::from_fn(k, k, |victim, source| {
        (0..m)
            .map(|ap| e[(ap, source)] * beta[(ap, victim)] * gamma[(ap, source)])
            .sum()
    });
    InterferenceTerms { varsigma }
}

/// Statistical-CSI achievable rate per UE, `log2(1 + SINR)` with the SINR of
/// [`sinr_scsi`].
pub fn rate_scsi(eta: &PowerCoefficients, beta: &Mat, gamma: &Mat, rho_d: f64) -> Vec<f64> {
    sinr_scsi(eta, beta, gamma, rho_d)
        .into_iter()
        .map(|s| (1.0 + s).log2())
        .collect()
}

/// Second-order statistics of the per-UE effective-channel estimate after
/// downlink training: real mean `sum_m sqrt(eta) gamma` and total complex
/// variance `e s^2 / (e s + 1)` with `e = tau_dp rho_dp` and `s` the
/// self-interference term.
#[derive(Debug, Clone)]
pub struct AhatStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn ahat_stats(
    eta: &PowerCoefficients,
    gamma: &Mat,
    varsigma_self: &[f64],
    tau_dp: usize,
    rho_dp: f64,
) -> AhatStats {
    let e = eta.eta();
    assert!(e.same_shape(gamma), "power/gamma shape mismatch");
    assert_eq!(varsigma_self.len(), e.cols(), "self-term length mismatch");
    let energy = tau_dp as f64 * rho_dp;
    let mean = (0..e.cols())
        .map(|ue| {
            (0..e.rows())
                .map(|ap| e[(ap, ue)].sqrt() * gamma[(ap, ue)])
                .sum()
        })
        .collect();
    let variance = varsigma_self
        .iter()
        .map(|&s| {
            if s == 0.0 {
                0.0
            } else {
                energy * s * s / (energy * s + 1.0)
            }
        })
        .collect();
    AhatStats { mean, variance }
}

fn icsi_denominator(
    varsigma: &InterferenceTerms,
    rho_d: f64,
    tau_dp: usize,
    rho_dp: f64,
    ue: usize,
) -> f64 {
    let s = varsigma.self_term(ue);
    let energy = tau_dp as f64 * rho_dp;
    rho_d * s / (energy * s + 1.0) + rho_d * varsigma.cross_sum(ue) + 1.0
}

/// Instantaneous-CSI achievable rate per UE:
/// `E[ log2(1 + rho_d |a_hat|^2 / D) ]` with `a_hat` complex Gaussian around
/// the real mean (independent real/imaginary parts of variance `var/2`).
/// The expectation is a tensor-product Gauss-Hermite quadrature with
/// `quad_order` nodes per axis.
pub fn rate_icsi(
    ahat: &AhatStats,
    varsigma: &InterferenceTerms,
    rho_d: f64,
    tau_dp: usize,
    rho_dp: f64,
    quad_order: usize,
) -> Result<Vec<f64>> {
    let (nodes, weights) = gauss_hermite(quad_order)?;
    let norm = std::f64::consts::PI;
    Ok((0..ahat.mean.len())
        .map(|ue| {
            let d = icsi_denominator(varsigma, rho_d, tau_dp, rho_dp, ue);
            let mean = ahat.mean[ue];
            let var = ahat.variance[ue];
            if var == 0.0 {
                return (1.0 + rho_d * mean * mean / d).log2();
            }
            let sigma = var.sqrt();
            let mut acc = 0.0;
            for (&u, &wu) in nodes.iter().zip(&weights) {
                let re = mean + sigma * u;
                for (&v, &wv) in nodes.iter().zip(&weights) {
                    let im = sigma * v;
                    let mag2 = re * re + im * im;
                    acc += wu * wv * (1.0 + rho_d * mag2 / d).log2();
                }
            }
            acc / norm
        })
        .collect())
}

/// Monte-Carlo twin of [`rate_icsi`]: draws the effective gain, the pilot
/// noise, and the resulting estimate explicitly, instead of integrating the
/// estimate's closed-form law. Used as an independent oracle.
///
/// Draws come in antithetic pairs (each Gaussian draw is reused with its
/// sign flipped), which cancels the odd part of the integrand's fluctuation
/// around the mean gain and sharply cuts the estimator's variance without
/// biasing it.
pub fn rate_icsi_mc(
    ahat: &AhatStats,
    varsigma: &InterferenceTerms,
    rho_d: f64,
    tau_dp: usize,
    rho_dp: f64,
    draws: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(draws >= 1, "need at least one draw");
    let energy = tau_dp as f64 * rho_dp;
    (0..ahat.mean.len())
        .map(|ue| {
            let d = icsi_denominator(varsigma, rho_d, tau_dp, rho_dp, ue);
            let mean = ahat.mean[ue];
            let s = varsigma.self_term(ue);
            let gain_scale = (s / 2.0).sqrt();
            let denom = energy * s + 1.0;
            let w_scale = (0.5f64).sqrt();
            let mut acc = 0.0;
            let mut done = 0usize;
            while done < draws {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let z3: f64 = StandardNormal.sample(rng);
                let z4: f64 = StandardNormal.sample(rng);
                for sign in [1.0, -1.0] {
                    if done == draws {
                        break;
                    }
                    // Effective gain around its mean, then the pilot observation.
                    let a_re = mean + gain_scale * sign * z1;
                    let a_im = gain_scale * sign * z2;
                    let est_re =
                        (energy * s * a_re + energy.sqrt() * s * w_scale * sign * z3 + mean)
                            / denom;
                    let est_im =
                        (energy * s * a_im + energy.sqrt() * s * w_scale * sign * z4) / denom;
                    let mag2 = est_re * est_re + est_im * est_im;
                    acc += (1.0 + rho_d * mag2 / d).log2();
                    done += 1;
                }
            }
            acc / draws as f64
        })
        .collect()
}

/// Channel hardening degree per UE under i.i.d. Rayleigh fading:
/// `1 - sum_m beta^2 / (sum_m beta)^2`, the complement of the normalized
/// variance of the total channel power. Errors on an all-zero column, where
/// the ratio is undefined.
pub fn channel_hardening_degree(beta: &Mat) -> Result<Vec<f64>> {
    (0..beta.cols())
        .map(|ue| {
            let sum: f64 = beta.col(ue).sum();
            if sum <= 0.0 {
                return Err(SimError::invalid(format!(
                    "UE {ue} has an all-zero path-gain column; hardening undefined"
                )));
            }
            let sum_sq: f64 = beta.col(ue).map(|b| b * b).sum();
            Ok(1.0 - sum_sq / (sum * sum))
        })
        .collect()
}

/// Net throughput per UE in bits/s: `(B/2) (1 - tau_p/tau) R`, half the
/// bandwidth for the downlink share of the symmetric frame and the pilot
/// fraction removed.
pub fn net_throughput(rates: &[f64], frame: &FrameConfig, bandwidth_hz: f64) -> Vec<f64> {
    let overhead = 1.0 - frame.tau_p() as f64 / frame.tau() as f64;
    rates
        .iter()
        .map(|r| bandwidth_hz / 2.0 * overhead * r)
        .collect()
}
