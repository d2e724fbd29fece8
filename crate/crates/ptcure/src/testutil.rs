//! Shared helpers for unit tests.

use nalgebra::{DMatrix, DVector};

use crate::data::Coefficients;

/// Central finite differences of a vector-valued function of beta.
pub(crate) fn finite_difference_jacobian(
    f: &dyn Fn(&Coefficients) -> DVector<f64>,
    beta: &Coefficients,
    h: f64,
) -> DMatrix<f64> {
    let p = beta.len();
    let f0 = f(beta);
    let mut jac = DMatrix::zeros(f0.len(), p);
    for k in 0..p {
        let mut plus = beta.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[k] += h;
        minus[k] -= h;
        let fp = f(&Coefficients::new(plus).unwrap());
        let fm = f(&Coefficients::new(minus).unwrap());
        for r in 0..f0.len() {
            jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}
