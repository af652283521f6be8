//! Downlink power control: per-AP constrained coefficients, a uniform
//! full-power baseline, the statistical-CSI SINR they induce, and max-min
//! fairness optimization via bisection over second-order-cone feasibility
//! problems.

use crate::error::{Result, SimError};
use crate::mat::Mat;
use crate::socp::{ConeOutcome, MaxMinConeProblem};

/// Power-control coefficients `eta`, APs x UEs. Feasible coefficients are
/// non-negative and satisfy `sum_k eta[m][k] * gamma[m][k] <= 1` per AP.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCoefficients {
    eta: Mat,
}

impl PowerCoefficients {
    pub fn from_matrix(eta: Mat) -> Self {
        Self { eta }
    }

    pub fn eta(&self) -> &Mat {
        &self.eta
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaxMinSettings {
    /// Relative width of the final bisection bracket on the SINR target.
    pub bisection_tol: f64,
    /// Hard cap on bisection iterations (feasibility solves).
    pub max_bisection_iters: usize,
    /// Allowed per-AP constraint violation when validating coefficients.
    pub feasibility_tol: f64,
}

impl Default for MaxMinSettings {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-2,
            max_bisection_iters: 40,
            feasibility_tol: 1e-6,
        }
    }
}

impl MaxMinSettings {
    pub fn validate(&self) -> Result<()> {
        if [self.bisection_tol, self.feasibility_tol]
            .iter()
            .any(|t| t.is_nan() || *t <= 0.0)
        {
            return Err(SimError::invalid("tolerances must be positive"));
        }
        if self.max_bisection_iters == 0 {
            return Err(SimError::invalid("iteration budget must be positive"));
        }
        Ok(())
    }
}

/// Full per-AP power split equally over the estimate-quality weights:
/// `eta[m][k] = 1 / sum_k' gamma[m][k']`, so each AP meets its power
/// constraint with equality. APs with an all-zero gamma row transmit nothing.
pub fn uniform_power(gamma: &Mat) -> PowerCoefficients {
    let eta = Mat::from_fn(gamma.rows(), gamma.cols(), |ap, _| {
        let s: f64 = gamma.row(ap).iter().sum();
        if s > 0.0 {
            1.0 / s
        } else {
            0.0
        }
    });
    PowerCoefficients { eta }
}

/// Statistical-CSI SINR per UE:
///
/// ```text
/// SINR_k = rho_d (sum_m sqrt(eta[m][k]) gamma[m][k])^2
///          / (rho_d sum_k' varsigma[k][k'] + 1)
/// ```
///
/// where `varsigma[k][k'] = sum_m eta[m][k'] beta[m][k] gamma[m][k']`. The
/// sum in the denominator includes `k' = k`, the beamforming-uncertainty
/// penalty from decoding with statistics only.
pub fn sinr_scsi(eta: &PowerCoefficients, beta: &Mat, gamma: &Mat, rho_d: f64) -> Vec<f64> {
    let e = &eta.eta;
    assert!(
        e.same_shape(beta) && e.same_shape(gamma),
        "power/beta/gamma shape mismatch"
    );
    let m = e.rows();
    let k = e.cols();
    // Total interference at UE k collapses to sum_m beta[m][k] * load_m with
    // load_m the power AP m actually spends.
    let loads: Vec<f64> = (0..m)
        .map(|ap| {
            e.row(ap)
                .iter()
                .zip(gamma.row(ap))
                .map(|(&eta_mk, &g)| eta_mk * g)
                .sum()
        })
        .collect();
    (0..k)
        .map(|ue| {
            let num_amp: f64 = (0..m).map(|ap| e[(ap, ue)].sqrt() * gamma[(ap, ue)]).sum();
            let interference: f64 = (0..m).map(|ap| beta[(ap, ue)] * loads[ap]).sum();
            rho_d * num_amp * num_amp / (rho_d * interference + 1.0)
        })
        .collect()
}

/// Checks the per-AP power constraint. Returns whether every AP satisfies
/// `sum_k eta gamma <= 1 + tol`, together with the worst per-AP load.
pub fn validate_power(eta: &PowerCoefficients, gamma: &Mat, tol: f64) -> (bool, f64) {
    let e = &eta.eta;
    assert!(e.same_shape(gamma), "power/gamma shape mismatch");
    let worst = (0..e.rows())
        .map(|ap| {
            e.row(ap)
                .iter()
                .zip(gamma.row(ap))
                .map(|(&eta_mk, &g)| eta_mk * g)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    (worst <= 1.0 + tol, worst)
}

/// Maximizes the minimum statistical-CSI SINR over feasible power
/// coefficients, by bisection on the common SINR target with a cone
/// feasibility solve per probe.
///
/// The bracket starts at the uniform-power minimum SINR (feasible by
/// construction) and at the smallest interference-free full-power SINR over
/// UEs (an upper bound on what the worst UE can ever reach); the upper end is
/// doubled if a probe ever proves it attainable. After the bracket closes to
/// `bisection_tol`, one final solve at the certified target additionally
/// minimizes total spent power, which tightens every SINR constraint and
/// returns a balanced solution.
///
/// Fails with [`SimError::PowerSolverFailure`] carrying the best feasible
/// coefficients found so far if the iteration budget is exhausted or the
/// feasibility solver repeatedly returns without a certificate.
pub fn maxmin_power(
    beta: &Mat,
    gamma: &Mat,
    rho_d: f64,
    settings: &MaxMinSettings,
) -> Result<PowerCoefficients> {
    settings.validate()?;
    if !beta.same_shape(gamma) {
        return Err(SimError::invalid("beta/gamma shape mismatch"));
    }
    if beta.rows() == 0 || beta.cols() == 0 {
        return Err(SimError::invalid("empty network"));
    }
    if rho_d.is_nan() || rho_d <= 0.0 {
        return Err(SimError::invalid("rho_d must be positive"));
    }
    if gamma.data().iter().any(|&g| g.is_nan() || g < 0.0) {
        return Err(SimError::invalid("gamma entries must be non-negative"));
    }
    let num_ues = beta.cols();

    // Feasible incumbent.
    let uniform = uniform_power(gamma);
    let uniform_min = min_sinr(&sinr_scsi(&uniform, beta, gamma, rho_d));
    let mut best_eta = uniform.eta.clone();
    let mut best_min = uniform_min;

    // A UE with no estimate quality anywhere pins the optimum at zero.
    if (0..num_ues).any(|ue| gamma.col_sum(ue) == 0.0) {
        return Ok(PowerCoefficients { eta: best_eta });
    }

    // Rescale so the largest gamma entry is 1; SINRs are invariant under
    // (beta, gamma, rho) -> (c beta, c gamma, rho/c) with eta mapped back by
    // eta = c * eta_scaled, and the solver sees well-conditioned data.
    let gmax = gamma.data().iter().cloned().fold(0.0, f64::max);
    let c = 1.0 / gmax;
    let beta_s = beta.map(|v| v * c);
    let gamma_s = gamma.map(|v| v * c);
    let problem = MaxMinConeProblem::new(&beta_s, &gamma_s, rho_d * gmax);

    let mut t_lo = uniform_min;
    let mut t_hi = (0..num_ues)
        .map(|ue| {
            let amp: f64 = gamma.col(ue).map(f64::sqrt).sum();
            rho_d * amp * amp
        })
        .fold(f64::INFINITY, f64::min);
    if t_hi <= t_lo {
        t_hi = 2.0 * t_lo.max(f64::MIN_POSITIVE);
    }

    let mut iterations = 0usize;
    let mut inconclusive = 0usize;

    // Confirm the upper end is out of reach, doubling while it is not.
    loop {
        iterations += 1;
        if iterations > settings.max_bisection_iters {
            return Err(budget_exhausted(iterations - 1, best_eta));
        }
        match problem.solve(t_hi, false) {
            ConeOutcome::Infeasible => break,
            ConeOutcome::Feasible(eta_scaled) => {
                let (eta, achieved) = accept(eta_scaled, c, beta, gamma, rho_d);
                if achieved > best_min {
                    best_min = achieved;
                    best_eta = eta;
                    t_lo = t_lo.max(achieved);
                }
                t_hi *= 2.0;
            }
            ConeOutcome::Inconclusive(detail) => {
                inconclusive += 1;
                if inconclusive > 6 {
                    return Err(solver_failure(iterations, detail, best_eta));
                }
                break; // treat the cap as unreachable and bisect below it
            }
        }
    }

    while t_hi - t_lo > settings.bisection_tol * t_hi {
        iterations += 1;
        if iterations > settings.max_bisection_iters {
            return Err(budget_exhausted(iterations - 1, best_eta));
        }
        let t = 0.5 * (t_lo + t_hi);
        match problem.solve(t, false) {
            ConeOutcome::Feasible(eta_scaled) => {
                let (eta, achieved) = accept(eta_scaled, c, beta, gamma, rho_d);
                if achieved > best_min {
                    best_min = achieved;
                    best_eta = eta;
                }
                if achieved >= t * (1.0 - 1e-7) {
                    t_lo = t;
                } else {
                    // Solution did not actually certify t; keep what it proved.
                    t_lo = t_lo.max(achieved);
                    t_hi = t;
                }
            }
            ConeOutcome::Infeasible => t_hi = t,
            ConeOutcome::Inconclusive(detail) => {
                inconclusive += 1;
                if inconclusive > 6 {
                    return Err(solver_failure(iterations, detail, best_eta));
                }
                t_hi = t;
            }
        }
    }

    // Balancing pass: minimum total power at the certified target makes all
    // SINR constraints tight, so the returned coefficients equalize the UEs.
    if best_min > 0.0 {
        if let ConeOutcome::Feasible(eta_scaled) = problem.solve(best_min, true) {
            let (eta, achieved) = accept(eta_scaled, c, beta, gamma, rho_d);
            if achieved >= uniform_min
                && achieved >= best_min * (1.0 - 0.1 * settings.bisection_tol)
            {
                best_eta = eta;
            }
        }
    }

    Ok(PowerCoefficients { eta: best_eta })
}

/// Unscales a solver solution, enforces the per-AP constraint exactly by a
/// global shrink if numerics left it microscopically violated, and measures
/// the minimum SINR it actually achieves.
fn accept(eta_scaled: Mat, c: f64, beta: &Mat, gamma: &Mat, rho_d: f64) -> (Mat, f64) {
    let mut eta = eta_scaled.map(|v| v * c);
    let (ok, worst) = validate_power(&PowerCoefficients { eta: eta.clone() }, gamma, 0.0);
    if !ok && worst > 0.0 {
        eta = eta.map(|v| v / worst);
    }
    let coeffs = PowerCoefficients { eta };
    let achieved = min_sinr(&sinr_scsi(&coeffs, beta, gamma, rho_d));
    (coeffs.eta, achieved)
}

fn min_sinr(sinrs: &[f64]) -> f64 {
    sinrs.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn budget_exhausted(iterations: usize, eta: Mat) -> SimError {
    SimError::PowerSolverFailure {
        iterations,
        detail: "bisection iteration budget exhausted".into(),
        last_feasible: Some(Box::new(PowerCoefficients { eta })),
    }
}

fn solver_failure(iterations: usize, detail: String, eta: Mat) -> SimError {
    SimError::PowerSolverFailure {
        iterations,
        detail,
        last_feasible: Some(Box::new(PowerCoefficients { eta })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_power_single_entry() {
        let gamma = Mat::from_rows(&[&[0.5]]);
        let eta = uniform_power(&gamma);
        assert!((eta.eta()[(0, 0)] - 2.0).abs() < 1e-15);
        let (ok, worst) = validate_power(&eta, &gamma, 1e-9);
        assert!(ok);
        assert!((worst - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_power_two_ues() {
        let gamma = Mat::from_rows(&[&[0.5, 0.5]]);
        let eta = uniform_power(&gamma);
        assert!((eta.eta()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((eta.eta()[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_power_scales_inversely_with_gamma() {
        let gamma = Mat::from_rows(&[&[0.2, 0.3], &[0.1, 0.4]]);
        let scaled = gamma.map(|g| g * 5.0);
        let e1 = uniform_power(&gamma);
        let e2 = uniform_power(&scaled);
        for ap in 0..2 {
            for ue in 0..2 {
                assert!((e2.eta()[(ap, ue)] * 5.0 - e1.eta()[(ap, ue)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_power_zero_row_transmits_nothing() {
        let gamma = Mat::from_rows(&[&[0.0, 0.0], &[0.5, 0.5]]);
        let eta = uniform_power(&gamma);
        assert_eq!(eta.eta()[(0, 0)], 0.0);
        assert_eq!(eta.eta()[(0, 1)], 0.0);
        assert!(eta.eta()[(1, 0)] > 0.0);
    }

    #[test]
    fn sinr_zero_power_is_zero() {
        let beta = Mat::from_rows(&[&[1.0, 2.0]]);
        let gamma = beta.map(|b| 0.5 * b);
        let eta = PowerCoefficients::from_matrix(Mat::zeros(1, 2));
        assert_eq!(sinr_scsi(&eta, &beta, &gamma, 3.0), vec![0.0, 0.0]);
    }

    #[test]
    fn sinr_hand_value() {
        // M=1, K=1, beta=1, gamma=0.5, eta=2, rho=1:
        // num = (sqrt(2)*0.5)^2 = 0.5, den = 1*2*1*0.5 + 1 = 2, SINR = 0.25.
        let beta = Mat::from_rows(&[&[1.0]]);
        let gamma = Mat::from_rows(&[&[0.5]]);
        let eta = PowerCoefficients::from_matrix(Mat::from_rows(&[&[2.0]]));
        let s = sinr_scsi(&eta, &beta, &gamma, 1.0);
        assert!((s[0] - 0.25).abs() < 1e-15, "got {}", s[0]);
    }

    #[test]
    fn sinr_symmetric_ues_are_equal() {
        let beta = Mat::from_rows(&[&[1.0, 1.0], &[0.5, 0.5]]);
        let gamma = beta.map(|b| 0.4 * b);
        let eta = uniform_power(&gamma);
        let s = sinr_scsi(&eta, &beta, &gamma, 2.0);
        assert!((s[0] - s[1]).abs() < 1e-12);
    }

    #[test]
    fn sinr_invariant_under_ue_permutation() {
        let beta = Mat::from_rows(&[&[1.0, 0.2, 0.5], &[0.3, 0.8, 0.1]]);
        let gamma = beta.map(|b| 0.6 * b);
        let eta = uniform_power(&gamma);
        let s = sinr_scsi(&eta, &beta, &gamma, 3.0);
        // Rotate the UE axis everywhere and compare rotated outputs.
        let perm = [2usize, 0, 1];
        let beta_p = Mat::from_fn(2, 3, |m, k| beta[(m, perm[k])]);
        let gamma_p = Mat::from_fn(2, 3, |m, k| gamma[(m, perm[k])]);
        let eta_p =
            PowerCoefficients::from_matrix(Mat::from_fn(2, 3, |m, k| eta.eta()[(m, perm[k])]));
        let s_p = sinr_scsi(&eta_p, &beta_p, &gamma_p, 3.0);
        for k in 0..3 {
            assert!((s_p[k] - s[perm[k]]).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_power_flags_overload() {
        let gamma = Mat::from_rows(&[&[0.5, 0.5]]);
        let tight = uniform_power(&gamma);
        let doubled = PowerCoefficients::from_matrix(tight.eta().map(|v| v * 2.0));
        let (ok, worst) = validate_power(&doubled, &gamma, 1e-6);
        assert!(!ok);
        assert!((worst - 2.0).abs() < 1e-12);
        let zero = PowerCoefficients::from_matrix(Mat::zeros(1, 2));
        let (ok, worst) = validate_power(&zero, &gamma, 1e-6);
        assert!(ok);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn maxmin_single_ue_uses_full_power() {
        // K=1: the optimum is full power at every AP, which the uniform
        // baseline already is; the solver must match it.
        let beta = Mat::from_rows(&[&[1.0], &[0.6], &[0.3]]);
        let gamma = beta.map(|b| 0.7 * b);
        let rho = 4.0;
        let settings = MaxMinSettings::default();
        let eta = maxmin_power(&beta, &gamma, rho, &settings).unwrap();
        let full = uniform_power(&gamma);
        let s_opt = sinr_scsi(&eta, &beta, &gamma, rho)[0];
        let s_full = sinr_scsi(&full, &beta, &gamma, rho)[0];
        assert!(
            s_opt >= s_full * (1.0 - 2.0 * settings.bisection_tol),
            "optimized {s_opt} fell below analytic {s_full}"
        );
        let (ok, _) = validate_power(&eta, &gamma, settings.feasibility_tol);
        assert!(ok);
    }

    #[test]
    fn maxmin_symmetric_ues_balanced() {
        let beta = Mat::from_rows(&[&[1.0, 1.0], &[0.4, 0.4], &[0.2, 0.2]]);
        let gamma = beta.map(|b| 0.5 * b);
        let rho = 2.0;
        let settings = MaxMinSettings::default();
        let eta = maxmin_power(&beta, &gamma, rho, &settings).unwrap();
        let s = sinr_scsi(&eta, &beta, &gamma, rho);
        let spread = (s[0] - s[1]).abs() / s[0].max(s[1]);
        assert!(spread < 2.0 * settings.bisection_tol, "spread {spread}");
        let (ok, _) = validate_power(&eta, &gamma, settings.feasibility_tol);
        assert!(ok);
    }

    #[test]
    fn maxmin_beats_uniform_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let settings = MaxMinSettings::default();
        for trial in 0..5 {
            let beta = Mat::from_fn(4, 2, |_, _| 10f64.powf(rng.random_range(-1.5..0.5)));
            let gamma = beta.map(|b| b * 0.9 / (b + 1.0));
            let rho = 10f64.powf(rng.random_range(0.0..2.0));
            let eta = maxmin_power(&beta, &gamma, rho, &settings).unwrap();
            let opt = sinr_scsi(&eta, &beta, &gamma, rho)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let uni = sinr_scsi(&uniform_power(&gamma), &beta, &gamma, rho)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(
                opt >= uni,
                "trial {trial}: maxmin {opt} below uniform {uni}"
            );
            let (ok, worst) = validate_power(&eta, &gamma, settings.feasibility_tol);
            assert!(ok, "trial {trial}: per-AP constraint violated ({worst})");
        }
    }

    #[test]
    fn maxmin_rejects_bad_shapes() {
        let beta = Mat::zeros(2, 2);
        let gamma = Mat::zeros(3, 2);
        assert!(maxmin_power(&beta, &gamma, 1.0, &MaxMinSettings::default()).is_err());
    }
}
