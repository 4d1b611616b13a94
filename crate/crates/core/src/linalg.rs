//! Symmetric positive-definite matrices backed by a Cholesky factor.
//!
//! Every quadratic form and linear solve in the crate goes through
//! [`SpdMatrix`], so no explicit inverse is ever formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{LvsError, Result};

#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdMatrix {
    /// Factorizes `matrix`, failing if it is not symmetric positive definite.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&matrix)?;
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| {
            LvsError::NotPositiveDefinite(format!("{}x{} factorization failed", matrix.nrows(), matrix.ncols()))
        })?;
        Ok(Self {
            matrix,
            chol,
            jitter: 0.0,
        })
    }

    /// Like [`SpdMatrix::new`], but retries once with `jitter` added to the
    /// diagonal when the plain factorization fails.
    pub fn with_jitter_fallback(matrix: DMatrix<f64>, jitter: f64) -> Result<Self> {
        match Self::new(matrix.clone()) {
            Ok(spd) => Ok(spd),
            Err(LvsError::NotPositiveDefinite(_)) => {
                let n = matrix.nrows();
                let jittered = matrix + DMatrix::<f64>::identity(n, n) * jitter;
                let chol = Cholesky::new(jittered.clone()).ok_or_else(|| {
                    LvsError::NotPositiveDefinite(format!(
                        "{n}x{n} factorization failed even with diagonal jitter {jitter:e}"
                    ))
                })?;
                Ok(Self {
                    matrix: jittered,
                    chol,
                    jitter,
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor `L` with `L Lᵀ = A`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Diagonal jitter that had to be added for the factorization to succeed
    /// (zero when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `A⁻¹ x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        Ok(self.chol.solve(x))
    }

    /// `L⁻¹ x`, the whitened vector.
    pub fn whiten(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let l = self.chol.l_dirty();
        l.solve_lower_triangular(x)
            .ok_or_else(|| LvsError::SingularCovariance("zero pivot in Cholesky factor".into()))
    }

    /// `xᵀ A⁻¹ x`, evaluated as the squared norm of the whitened vector.
    pub fn quad_form(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.whiten(x)?.norm_squared())
    }

    /// `xᵀ A⁻¹ y`.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(y.len())?;
        Ok(x.dot(&self.solve(y)?))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(LvsError::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

fn check_square_finite(matrix: &DMatrix<f64>) -> Result<()> {
    if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
        return Err(LvsError::NotPositiveDefinite(format!(
            "matrix must be square and non-empty, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(LvsError::NotPositiveDefinite("matrix has non-finite entries".into()));
    }
    Ok(())
}
