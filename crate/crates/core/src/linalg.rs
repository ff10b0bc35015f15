//! Dense solves for the small systems that show up in policy evaluation
//! and occupancy computation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with partial pivoting.
pub(crate) fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.lu();
    let condition = pivot_ratio(lu.u().diagonal().iter().copied());
    match lu.solve(&b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(Error::SingularSystem { condition }),
    }
}

/// Ratio of largest to smallest pivot magnitude; a cheap lower bound on the
/// 2-norm condition number of the factored matrix.
fn pivot_ratio(pivots: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = pivots.fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| {
        (lo.min(p.abs()), hi.max(p.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
