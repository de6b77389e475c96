use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

/// Largest condition number accepted before a covariance is treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpdInverse {
    pub inverse: DMatrix<f64>,
    /// 1-norm condition number `‖M‖₁ ‖M⁻¹‖₁`.
    pub condition: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverts a symmetric positive definite matrix through its Cholesky factor.
pub fn invert_spd(m: &DMatrix<f64>) -> Result<SpdInverse> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty square matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance(
            "matrix has non-finite entries".into(),
        ));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::SingularCovariance("matrix is not positive definite".into()))?;
    if chol.l_dirty().diagonal().iter().any(|d| !(*d > 0.0)) {
        return Err(Error::SingularCovariance(
            "zero pivot in Cholesky factor".into(),
        ));
    }
    let inverse = chol.inverse();
    let condition = norm1(m) * norm1(&inverse);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance(format!(
            "condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    Ok(SpdInverse { inverse, condition })
}
