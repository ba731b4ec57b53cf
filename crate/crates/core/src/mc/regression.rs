use nalgebra::DMatrix;

/// Singular values below this fraction of the largest are dropped.
pub const RELATIVE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    /// One column of coefficients per right-hand side.
    pub coefficients: DMatrix<f64>,
    pub fitted: DMatrix<f64>,
    pub rank: usize,
}

/// Minimum-norm least squares through a truncated SVD of the design matrix.
/// Returns `None` when the design has rank zero.
pub fn least_squares(design: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<LeastSquaresFit> {
    let svd = design.clone().svd(true, true);
    let top = svd.singular_values.max();
    if !(top > 0.0) {
        return None;
    }
    let eps = RELATIVE_CUTOFF * top;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let coefficients = svd.solve(rhs, eps).ok()?;
    let fitted = design * &coefficients;
    Some(LeastSquaresFit {
        coefficients,
        fitted,
        rank,
    })
}
