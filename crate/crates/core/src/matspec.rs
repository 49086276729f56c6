//! Dense constraint-matrix utilities: extreme eigenvalues of `AAᵀ`, the
//! operator norm of `AᵀA`, and minimum-norm solves with `Aᵀ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Relative threshold below which `σ_min(AAᵀ)` counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense real matrix `A` of the linear constraint `Ax + By = c`.
///
/// Dense storage is canonical. The optional sparsity descriptor lists the
/// nonzero coordinates and only changes which products are skipped, never the
/// summation order, so results are identical with or without it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    mat: DMatrix<f64>,
    nonzeros: Option<Vec<Vec<(usize, f64)>>>,
}

impl ConstraintMatrix {
    pub fn from_dmatrix(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.ncols() == 0 {
            return Err(Error::Input("constraint matrix must be at least 1x1".into()));
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("constraint matrix has non-finite entries".into()));
        }
        Ok(Self {
            mat,
            nonzeros: None,
        })
    }

    /// Builds from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_dim("constraint matrix entries", rows * cols, entries.len())?;
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mat: DMatrix::identity(d, d),
            nonzeros: None,
        }
    }

    /// Attaches a sparsity descriptor derived from the current entries.
    pub fn with_sparsity(mut self) -> Self {
        let rows = (0..self.mat.nrows())
            .map(|i| {
                (0..self.mat.ncols())
                    .filter_map(|j| {
                        let v = self.mat[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        self.nonzeros = Some(rows);
        self
    }

    /// Nonzero coordinates `(row, col)` if a descriptor is attached.
    pub fn sparsity(&self) -> Option<Vec<(usize, usize)>> {
        self.nonzeros.as_ref().map(|rows| {
            rows.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().map(move |&(j, _)| (i, j)))
                .collect()
        })
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Scales every entry; used to build degenerate instances in tests and
    /// diagnostics.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let m = Self::from_dmatrix(&self.mat * factor)?;
        Ok(if self.nonzeros.is_some() {
            m.with_sparsity()
        } else {
            m
        })
    }

    /// `Ax`, summed left to right within each row.
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.cols());
        let mut out = DVector::zeros(self.rows());
        match &self.nonzeros {
            Some(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let mut acc = 0.0;
                    for &(j, v) in row {
                        acc += v * x[j];
                    }
                    out[i] = acc;
                }
            }
            None => {
                for i in 0..self.rows() {
                    let mut acc = 0.0;
                    for j in 0..self.cols() {
                        acc += self.mat[(i, j)] * x[j];
                    }
                    out[i] = acc;
                }
            }
        }
        out
    }

    /// `Aᵀv`, accumulated in increasing row order.
    pub fn tr_mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.rows());
        let mut out = DVector::zeros(self.cols());
        match &self.nonzeros {
            Some(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let vi = v[i];
                    for &(j, a) in row {
                        out[j] += a * vi;
                    }
                }
            }
            None => {
                for i in 0..self.rows() {
                    let vi = v[i];
                    for j in 0..self.cols() {
                        out[j] += self.mat[(i, j)] * vi;
                    }
                }
            }
        }
        out
    }

    /// `AᵀA` (cols × cols).
    pub fn gram_cols(&self) -> DMatrix<f64> {
        self.mat.tr_mul(&self.mat)
    }

    /// `AAᵀ` (rows × rows).
    pub fn gram_rows(&self) -> DMatrix<f64> {
        &self.mat * self.mat.transpose()
    }
}

/// Extreme eigenvalues of `AAᵀ` and `AᵀA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub sigma_max_aat: f64,
    pub sigma_min_aat: f64,
    /// `‖AᵀA‖`; equal to `sigma_max_aat`.
    pub norm_ata: f64,
    /// Smallest eigenvalue of `AᵀA` (zero when `A` has more columns than rows).
    pub lambda_min_ata: f64,
}

impl SpectralSummary {
    pub fn is_full_row_rank(&self) -> bool {
        self.sigma_min_aat > RANK_TOLERANCE * self.sigma_max_aat && self.sigma_min_aat > 0.0
    }
}

fn extreme_eigenvalues(sym: DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max().max(0.0);
    let min = eig.eigenvalues.min().max(0.0);
    (max, min)
}

/// Largest and smallest eigenvalues of `AAᵀ` plus `‖AᵀA‖`.
///
/// Works on the smaller of the two Gram matrices; the nonzero spectra coincide
/// and the larger Gram matrix is singular whenever `A` is not square.
pub fn spectral_extremes(a: &ConstraintMatrix) -> Result<SpectralSummary> {
    if a.as_dmatrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("constraint matrix has non-finite entries".into()));
    }
    let (rows, cols) = (a.rows(), a.cols());
    let summary = if rows <= cols {
        let (max, min) = extreme_eigenvalues(a.gram_rows());
        SpectralSummary {
            sigma_max_aat: max,
            sigma_min_aat: min,
            norm_ata: max,
            lambda_min_ata: if rows == cols { min } else { 0.0 },
        }
    } else {
        let (max, min) = extreme_eigenvalues(a.gram_cols());
        SpectralSummary {
            sigma_max_aat: max,
            sigma_min_aat: 0.0,
            norm_ata: max,
            lambda_min_ata: min,
        }
    };
    Ok(summary)
}

/// Prefactored `(Aᵀ)†` for a full-row-rank `A`: `u = (AAᵀ)⁻¹ A v`.
#[derive(Debug, Clone)]
pub struct TransposePinv {
    a: ConstraintMatrix,
    chol: Cholesky<f64, Dyn>,
}

impl TransposePinv {
    pub fn new(a: &ConstraintMatrix) -> Result<Self> {
        let spec = spectral_extremes(a)?;
        if !spec.is_full_row_rank() {
            return Err(Error::Singular {
                sigma_min: spec.sigma_min_aat,
                sigma_max: spec.sigma_max_aat,
            });
        }
        let chol = Cholesky::new(a.gram_rows()).ok_or(Error::Singular {
            sigma_min: spec.sigma_min_aat,
            sigma_max: spec.sigma_max_aat,
        })?;
        Ok(Self { a: a.clone(), chol })
    }

    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("transpose solve rhs", self.a.cols(), v.len())?;
        Ok(self.chol.solve(&self.a.mul_vec(v)))
    }
}

/// Minimum-norm least-squares solution of `Aᵀu = v`.
pub fn min_norm_transpose_solve(a: &ConstraintMatrix, v: &DVector<f64>) -> Result<DVector<f64>> {
    TransposePinv::new(a)?.solve(v)
}
