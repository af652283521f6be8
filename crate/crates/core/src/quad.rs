//! Gauss-Hermite quadrature (physicists' convention, weight `exp(-x^2)`).
//!
//! Nodes and weights come from the Golub-Welsch construction: the nodes are
//! the eigenvalues of the symmetric tridiagonal Jacobi matrix of the Hermite
//! recurrence, and each weight is `sqrt(pi)` times the squared first component
//! of the corresponding eigenvector. The eigenproblem is solved with the
//! implicit QL algorithm, accumulating only the first row of the eigenvector
//! matrix since that is all the weights need.

use crate::error::{Result, SimError};

/// Returns `(nodes, weights)` of the `n`-point Gauss-Hermite rule, nodes in
/// ascending order. Weights sum to `sqrt(pi)`.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(SimError::invalid(format!(
            "quadrature order must be at least 2, got {n}"
        )));
    }
    // Jacobi matrix of the (physicists') Hermite recurrence: zero diagonal,
    // off-diagonal sqrt((i+1)/2).
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for (i, o) in off.iter_mut().enumerate().take(n - 1) {
        *o = ((i + 1) as f64 / 2.0).sqrt();
    }
    let mut first_row = vec![0.0; n];
    first_row[0] = 1.0;

    tridiag_ql(&mut diag, &mut off, &mut first_row)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].partial_cmp(&diag[b]).expect("finite eigenvalues"));

    let mu0 = std::f64::consts::PI.sqrt();
    let nodes = order.iter().map(|&i| diag[i]).collect();
    let weights = order
        .iter()
        .map(|&i| mu0 * first_row[i] * first_row[i])
        .collect();
    Ok((nodes, weights))
}

/// Implicit QL with Wilkinson shifts for a symmetric tridiagonal matrix.
/// `d` holds the diagonal (eigenvalues on exit), `e` the sub-diagonal in
/// `e[0..n-1]`. `z` is one row of an orthogonal accumulator; the rotations
/// are applied to it so it ends as that row of the eigenvector matrix.
fn tridiag_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find the first negligible sub-diagonal at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(SimError::invalid(
                    "tridiagonal QL iteration failed to converge",
                ));
            }
            // Wilkinson shift.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate the tracked eigenvector row.
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.7724538509055159;

    #[test]
    fn rejects_trivial_orders() {
        assert!(gauss_hermite(0).is_err());
        assert!(gauss_hermite(1).is_err());
        assert!(gauss_hermite(2).is_ok());
    }

    #[test]
    fn two_point_rule_is_exact() {
        let (x, w) = gauss_hermite(2).unwrap();
        let r = 0.5f64.sqrt();
        assert!((x[0] + r).abs() < 1e-14 && (x[1] - r).abs() < 1e-14);
        assert!((w[0] - SQRT_PI / 2.0).abs() < 1e-14);
        assert!((w[1] - SQRT_PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn three_point_rule_matches_closed_form() {
        let (x, w) = gauss_hermite(3).unwrap();
        let r = (1.5f64).sqrt();
        assert!((x[0] + r).abs() < 1e-13);
        assert!(x[1].abs() < 1e-13);
        assert!((x[2] - r).abs() < 1e-13);
        assert!((w[1] - 2.0 * SQRT_PI / 3.0).abs() < 1e-13);
        assert!((w[0] - SQRT_PI / 6.0).abs() < 1e-13);
    }

    #[test]
    fn moments_are_exact_at_order_24() {
        let (x, w) = gauss_hermite(24).unwrap();
        let moment = |p: u32| -> f64 {
            x.iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * xi.powi(p as i32))
                .sum()
        };
        // Integrals of x^p exp(-x^2): sqrt(pi) * (p-1)!! / 2^(p/2) for even p.
        assert!((moment(0) - SQRT_PI).abs() < 1e-12);
        assert!(moment(1).abs() < 1e-12);
        assert!((moment(2) - SQRT_PI / 2.0).abs() < 1e-12);
        assert!((moment(4) - 3.0 * SQRT_PI / 4.0).abs() < 1e-12);
        assert!((moment(6) - 15.0 * SQRT_PI / 8.0).abs() < 1e-11);
        // Highest even degree the 24-point rule must integrate exactly is 46.
        let m46 = moment(46);
        let mut exact = SQRT_PI;
        for j in (1..=45).step_by(2) {
            exact *= j as f64 / 2.0;
        }
        assert!(
            ((m46 - exact) / exact).abs() < 1e-10,
            "degree-46 moment off: {m46} vs {exact}"
        );
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let (x, w) = gauss_hermite(24).unwrap();
        for i in 1..x.len() {
            assert!(x[i] > x[i - 1]);
        }
        for i in 0..x.len() {
            assert!((x[i] + x[x.len() - 1 - i]).abs() < 1e-12);
            assert!((w[i] - w[x.len() - 1 - i]).abs() < 1e-12);
            assert!(w[i] > 0.0);
        }
    }

    #[test]
    fn gaussian_expectation_of_smooth_function() {
        // E[cos(X)] for X ~ N(0, 1/2) is exp(-1/4); the rule integrates
        // cos(x) exp(-x^2) / sqrt(pi).
        let (x, w) = gauss_hermite(24).unwrap();
        let est: f64 = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * xi.cos())
            .sum::<f64>()
            / SQRT_PI;
        let exact = (-0.25f64).exp();
        assert!((est - exact).abs() < 1e-13, "got {est}, want {exact}");
    }
}
