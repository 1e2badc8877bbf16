//! Dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{DragonError, Result};

/// Minimizes `‖A w - b‖² + ridge ‖w‖²`.
///
/// Solved through the SVD of the stacked matrix `[A; sqrt(ridge) I]`, which
/// has the same minimizer as the ridge normal equations without squaring the
/// condition number. Fails when the stacked matrix is numerically singular.
pub fn ridge_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if rows != b.len() {
        return Err(DragonError::Input(format!(
            "design has {rows} rows but target has {}",
            b.len()
        )));
    }
    if cols == 0 {
        return Err(DragonError::Input("design matrix has no columns".into()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(DragonError::Input(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    let mut stacked = DMatrix::zeros(rows + cols, cols);
    stacked.rows_mut(0, rows).copy_from(a);
    let mut rhs = DVector::zeros(rows + cols);
    rhs.rows_mut(0, rows).copy_from(b);
    let r = ridge.sqrt();
    for j in 0..cols {
        stacked[(rows + j, j)] = r;
    }
    let svd = stacked.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-14 * smax * (rows.max(cols) as f64) {
        return Err(DragonError::Numeric(format!(
            "least-squares system is singular (singular values {smin:.3e}..{smax:.3e}); use a positive ridge"
        )));
    }
    svd.solve(&rhs, 0.0)
        .map_err(|e| DragonError::Numeric(format!("least-squares solve failed: {e}")))
}
