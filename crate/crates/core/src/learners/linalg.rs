use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solve `a x = b` for symmetric positive semi-definite `a`.
///
/// Cholesky first; if the matrix is singular, falls back to the
/// minimum-norm least-squares solution via SVD.
pub(crate) fn solve_psd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let svd = a.svd(true, true);
    let x = svd
        .solve(b, scale * 1e-12)
        .map_err(|e| Error::Numeric(format!("linear solve failed: {e}")))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Numeric("linear solve produced non-finite values".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_system_gets_min_norm_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = solve_psd(a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }
}
