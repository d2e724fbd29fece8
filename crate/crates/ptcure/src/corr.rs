//! Working correlation matrices and their closed-form inverses.
//!
//! Cluster sizes are small, so the exchangeable (rank-one update) and AR(1)
//! (tridiagonal) inverses are built exactly; a dense LU factorization is the
//! fallback when a closed-form denominator degenerates.

use nalgebra::DMatrix;

use crate::data::CorrelationFamily;
use crate::error::{Error, Result};

/// `Q(rho)` for a cluster of size `n`.
pub fn correlation_matrix(family: CorrelationFamily, rho: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            match family {
                CorrelationFamily::Independence => 0.0,
                CorrelationFamily::Exchangeable => rho,
                CorrelationFamily::Ar1 => rho.powi((i as i32 - j as i32).abs()),
            }
        }
    })
}

/// Lower end of the positive-definite range of `rho` for clusters up to
/// `n_max`; the upper end is 1 for all families.
pub fn rho_lower_bound(family: CorrelationFamily, n_max: usize) -> f64 {
    match family {
        CorrelationFamily::Independence => -1.0,
        CorrelationFamily::Exchangeable => {
            if n_max <= 1 {
                -1.0
            } else {
                -1.0 / (n_max as f64 - 1.0)
            }
        }
        CorrelationFamily::Ar1 => -1.0,
    }
}

/// Clip `rho` into the open positive-definite range with a small margin.
/// Returns the clipped value and whether clipping occurred.
pub fn clip_rho(family: CorrelationFamily, rho: f64, n_max: usize) -> (f64, bool) {
    let lo = rho_lower_bound(family, n_max) + 1e-6;
    let hi = 1.0 - 1e-6;
    if rho < lo {
        (lo, true)
    } else if rho > hi {
        (hi, true)
    } else {
        (rho, false)
    }
}

/// `Q(rho)^{-1}` for a cluster of size `n`.
pub fn inverse_correlation(family: CorrelationFamily, rho: f64, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if n == 1 {
        return Ok(DMatrix::identity(1, 1));
    }
    match family {
        CorrelationFamily::Independence => Ok(DMatrix::identity(n, n)),
        CorrelationFamily::Exchangeable => {
            let nm1 = n as f64 - 1.0;
            let d1 = 1.0 - rho;
            let d2 = 1.0 + nm1 * rho;
            if d1.abs() < 1e-12 || d2.abs() < 1e-12 {
                return dense_inverse(family, rho, n);
            }
            let off = -rho / (d1 * d2);
            let diag = (1.0 + (nm1 - 1.0) * rho) / (d1 * d2);
            Ok(DMatrix::from_fn(n, n, |i, j| if i == j { diag } else { off }))
        }
        CorrelationFamily::Ar1 => {
            let d = 1.0 - rho * rho;
            if d.abs() < 1e-12 {
                return dense_inverse(family, rho, n);
            }
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = if i == 0 || i == n - 1 {
                    1.0 / d
                } else {
                    (1.0 + rho * rho) / d
                };
                if i + 1 < n {
                    m[(i, i + 1)] = -rho / d;
                    m[(i + 1, i)] = -rho / d;
                }
            }
            Ok(m)
        }
    }
}

fn dense_inverse(family: CorrelationFamily, rho: f64, n: usize) -> Result<DMatrix<f64>> {
    correlation_matrix(family, rho, n)
        .try_inverse()
        .ok_or(Error::SingularMatrix {
            context: format!("{family} working correlation at rho={rho}, n={n}"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_is_inverse(q: &DMatrix<f64>, qinv: &DMatrix<f64>) {
        let prod = q * qinv;
        let n = q.nrows();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (prod[(i, j)] - want).abs() < 1e-10,
                    "({i},{j}) = {}",
                    prod[(i, j)]
                );
            }
        }
    }

    #[test]
    fn closed_forms_invert_their_matrices() {
        for &n in &[1usize, 2, 3, 5, 9] {
            for &rho in &[-0.2, 0.0, 0.3, 0.8] {
                for family in [
                    CorrelationFamily::Independence,
                    CorrelationFamily::Exchangeable,
                    CorrelationFamily::Ar1,
                ] {
                    if family == CorrelationFamily::Exchangeable
                        && rho <= rho_lower_bound(family, n)
                    {
                        continue;
                    }
                    let q = correlation_matrix(family, rho, n);
                    let qinv = inverse_correlation(family, rho, n).unwrap();
                    assert_is_inverse(&q, &qinv);
                }
            }
        }
    }

    #[test]
    fn exchangeable_lower_bound_depends_on_size() {
        assert_eq!(rho_lower_bound(CorrelationFamily::Exchangeable, 5), -0.25);
        assert_eq!(rho_lower_bound(CorrelationFamily::Ar1, 5), -1.0);
        let (clipped, flagged) = clip_rho(CorrelationFamily::Exchangeable, -0.9, 5);
        assert!(flagged);
        assert!((clipped + 0.25 - 1e-6).abs() < 1e-12);
        let (kept, flagged) = clip_rho(CorrelationFamily::Ar1, 0.5, 5);
        assert!(!flagged);
        assert_eq!(kept, 0.5);
    }
}
