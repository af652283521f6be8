//! Sparse second-order-cone feasibility subproblem behind the max-min
//! bisection, solved with Clarabel.
//!
//! Decision variables are `x = [u; q]` with `u[m][k] = sqrt(gamma[m][k] *
//! eta[m][k])` stacked UE-major (so `u^2` is the share of AP `m`'s power
//! budget spent on UE `k`), and `q[m]` an upper bound on the amplitude
//! `sqrt(sum_k u[m][k]^2)` AP `m` spends in total. Two structural reductions
//! keep the cones small and well scaled:
//!
//! * the interference a UE sees depends on the per-AP spent powers only,
//!   `sum_m beta[m][k] q[m]^2`, so each SINR constraint couples one `u`
//!   column with `q` instead of with all of `u`;
//! * in the `u` variables every per-AP norm has unit coefficients, and the
//!   numerator coefficients `sqrt(gamma)` span half the decibel range the
//!   raw estimate qualities do.
//!
//! ```text
//! UE k:  sum_m sqrt(gamma[m][k]) u[m][k]
//!            >= sqrt(t) * || sqrt(beta[:,k]) .* q ; 1/sqrt(rho) ||
//! AP m:  || u[m,:] || <= q_m,   q_m <= 1
//! ```
//!
//! Feasibility of this relaxation is equivalent to feasibility of the
//! original per-AP problem: shrinking each `q_m` to its row norm only lowers
//! interference, and signs of `u` never matter because `eta` recovers as
//! `u^2 / gamma` and flipping a negative entry can only raise a numerator.
//!
//! Links whose estimate quality is negligible next to the best link of the
//! same UE are fixed to zero power. That restricts the feasible set by a
//! relative amount bounded by `M * DROP_TOL` in any numerator, far below the
//! bisection tolerance, and spares the solver the worst of the path-gain
//! dynamic range.

use crate::mat::Mat;
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{NonnegativeConeT, SecondOrderConeT},
};

/// Per-UE relative estimate-quality floor below which a link is not used.
const DROP_TOL: f64 = 1e-6;

#[derive(Debug)]
pub(crate) enum ConeOutcome {
    /// A feasible power matrix `eta` (same scaling as the inputs).
    Feasible(Mat),
    Infeasible,
    /// The solver stopped without a certificate either way.
    Inconclusive(String),
}

pub(crate) struct MaxMinConeProblem {
    num_aps: usize,
    num_ues: usize,
    gamma: Mat,
    sqrt_gamma: Mat,
    sqrt_beta: Mat,
    /// Links allowed to carry power.
    active: Vec<bool>,
    inv_sqrt_rho: f64,
}

impl MaxMinConeProblem {
    pub fn new(beta: &Mat, gamma: &Mat, rho_d: f64) -> Self {
        assert!(beta.same_shape(gamma), "beta/gamma shape mismatch");
        let m = beta.rows();
        let k = beta.cols();
        let mut active = vec![false; m * k];
        for ue in 0..k {
            let best = gamma.col(ue).fold(0.0, f64::max);
            for ap in 0..m {
                active[ue * m + ap] = gamma[(ap, ue)] > best * DROP_TOL;
            }
        }
        Self {
            num_aps: m,
            num_ues: k,
            gamma: gamma.clone(),
            sqrt_gamma: gamma.map(f64::sqrt),
            sqrt_beta: beta.map(f64::sqrt),
            active,
            inv_sqrt_rho: 1.0 / rho_d.sqrt(),
        }
    }

    /// Checks whether every UE can reach SINR `target` under the per-AP
    /// constraint. With `minimize_power` the solve additionally minimizes
    /// `sum_m q_m`, which drives every SINR constraint to equality and so
    /// returns a balanced solution at `target`.
    pub fn solve(&self, target: f64, minimize_power: bool) -> ConeOutcome {
        debug_assert!(target > 0.0);
        let m = self.num_aps;
        let k = self.num_ues;
        let n = m * k + m;
        let nrows = m + k * (m + 2) + m * (k + 1);
        let sqrt_t = target.sqrt();

        // Row layout: [q <= 1 bounds | K SINR cones of dim M+2 | M AP cones of dim K+1].
        let sinr_head = |ue: usize| m + ue * (m + 2);
        let ap_head = |ap: usize| m + k * (m + 2) + ap * (k + 1);

        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::with_capacity(2 * m * k + m * (k + 2));
        let mut nzval: Vec<f64> = Vec::with_capacity(rowval.capacity());
        colptr.push(0);
        for ue in 0..k {
            for ap in 0..m {
                if self.active[ue * m + ap] {
                    rowval.push(sinr_head(ue));
                    nzval.push(-self.sqrt_gamma[(ap, ue)] / sqrt_t);
                    rowval.push(ap_head(ap) + 1 + ue);
                    nzval.push(-1.0);
                }
                colptr.push(rowval.len());
            }
        }
        for ap in 0..m {
            rowval.push(ap);
            nzval.push(1.0);
            for ue in 0..k {
                let sb = self.sqrt_beta[(ap, ue)];
                if sb != 0.0 {
                    rowval.push(sinr_head(ue) + 1 + ap);
                    nzval.push(-sb);
                }
            }
            rowval.push(ap_head(ap));
            nzval.push(-1.0);
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(nrows, n, colptr, rowval, nzval);
        let p = CscMatrix::zeros((n, n));

        let mut lin_cost = vec![0.0; n];
        if minimize_power {
            for ap in 0..m {
                lin_cost[m * k + ap] = 1.0;
            }
        }

        let mut b = vec![0.0; nrows];
        b[..m].fill(1.0);
        for ue in 0..k {
            b[sinr_head(ue) + m + 1] = self.inv_sqrt_rho;
        }

        let mut cones = Vec::with_capacity(1 + k + m);
        cones.push(NonnegativeConeT(m));
        cones.extend(std::iter::repeat_n(SecondOrderConeT(m + 2), k));
        cones.extend(std::iter::repeat_n(SecondOrderConeT(k + 1), m));

        let settings = DefaultSettings {
            verbose: false,
            max_iter: 200,
            tol_gap_abs: 1e-7,
            tol_gap_rel: 1e-7,
            tol_feas: 1e-7,
            reduced_tol_gap_abs: 1e-4,
            reduced_tol_gap_rel: 1e-4,
            reduced_tol_feas: 1e-5,
            equilibrate_max_scaling: 1e6,
            equilibrate_min_scaling: 1e-6,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&p, &lin_cost, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return ConeOutcome::Inconclusive(format!("solver setup failed: {e:?}")),
        };
        solver.solve();

        match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                let x = &solver.solution.x;
                let eta = Mat::from_fn(m, k, |ap, ue| {
                    if self.active[ue * m + ap] {
                        let u = x[ue * m + ap];
                        u * u / self.gamma[(ap, ue)]
                    } else {
                        0.0
                    }
                });
                ConeOutcome::Feasible(eta)
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                ConeOutcome::Infeasible
            }
            status => ConeOutcome::Inconclusive(format!("solver stopped with {status:?}")),
        }
    }
}
