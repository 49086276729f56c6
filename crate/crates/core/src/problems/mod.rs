//! Composite problems `min f(x) + g(y)  s.t.  Ax + By = c` with `B = ±I`.

mod data;
mod graph;
mod libsvm;
mod loss;
mod prox;

use nalgebra::{DMatrix, DVector};

pub use data::{gen_classification, gen_tv_data, piecewise_truth, SampleSet, TvData};
pub use graph::{graph_from_correlation, parse_edge_list, spanning_forest, validate_edges, write_edge_list};
pub use libsvm::{parse_libsvm, write_libsvm};
pub use loss::{LossKind, SmoothSum, SIGMOID_CURVATURE};
pub use prox::{soft_threshold, Regularizer};

use crate::error::{check_dim, Error, Result};
use crate::matspec::{spectral_extremes, ConstraintMatrix, SpectralSummary};

/// `B` restricted to `±I`; both admit a closed-form y-update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BForm {
    NegIdentity,
    Identity,
}

impl BForm {
    pub fn sign(self) -> f64 {
        match self {
            BForm::NegIdentity => -1.0,
            BForm::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    f: SmoothSum,
    g: Regularizer,
    a: ConstraintMatrix,
    b_form: BForm,
    c: DVector<f64>,
    spectra: SpectralSummary,
}

impl ConstrainedProblem {
    pub fn new(
        f: SmoothSum,
        g: Regularizer,
        a: ConstraintMatrix,
        b_form: BForm,
        c: DVector<f64>,
    ) -> Result<Self> {
        check_dim("constraint columns vs feature dimension", f.d(), a.cols())?;
        check_dim("constraint right-hand side", a.rows(), c.len())?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite constraint right-hand side".into()));
        }
        let spectra = spectral_extremes(&a)?;
        Ok(Self {
            f,
            g,
            a,
            b_form,
            c,
            spectra,
        })
    }

    /// `min f(x) + g(Ax)` written as `Ax − y = 0`.
    pub fn generalized_lasso(f: SmoothSum, a: ConstraintMatrix, lambda: f64) -> Result<Self> {
        let rows = a.rows();
        Self::new(f, Regularizer::l1(lambda)?, a, BForm::NegIdentity, DVector::zeros(rows))
    }

    pub fn f(&self) -> &SmoothSum {
        &self.f
    }

    pub fn g(&self) -> &Regularizer {
        &self.g
    }

    pub fn a(&self) -> &ConstraintMatrix {
        &self.a
    }

    pub fn b_form(&self) -> BForm {
        self.b_form
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn spectra(&self) -> &SpectralSummary {
        &self.spectra
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }

    pub fn d(&self) -> usize {
        self.f.d()
    }

    /// Rows of `A` (dimension of `y`, `u` and `c`).
    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    /// Same constraint and regularizer over different samples.
    pub fn with_data(&self, data: SampleSet) -> Result<Self> {
        let f = SmoothSum::new(self.f.kind(), data, self.f.l2())?;
        Ok(Self {
            f,
            ..self.clone()
        })
    }

    /// `By` (also `Bᵀy`, since `B = ±I`).
    pub fn apply_b(&self, y: &DVector<f64>) -> DVector<f64> {
        match self.b_form {
            BForm::NegIdentity => -y,
            BForm::Identity => y.clone(),
        }
    }

    /// `Ax + By − c`
    pub fn residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut r = self.a.mul_vec(x);
        r.axpy(self.b_form.sign(), y, 1.0);
        r -= &self.c;
        r
    }

    pub fn objective_xy(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.f.value(x) + self.g.value(y)
    }

    /// `f(x) + g(Ax)`, reported at the feasible lift `y = Ax`.
    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim("objective argument", self.d(), x.len())?;
        if self.b_form != BForm::NegIdentity || self.c.iter().any(|&v| v != 0.0) {
            return Err(Error::Config(
                "objective at (x, Ax) needs B = -I and c = 0".into(),
            ));
        }
        Ok(self.f.value(x) + self.g.value(&self.a.mul_vec(x)))
    }
}

/// `[G; I]` with one row `e_i − e_j` per edge.
pub fn ggfl_matrix(d: usize, edges: &[(usize, usize)]) -> Result<ConstraintMatrix> {
    validate_edges(d, edges)?;
    let rows = edges.len() + d;
    let mut m = DMatrix::zeros(rows, d);
    for (r, &(i, j)) in edges.iter().enumerate() {
        m[(r, i)] = 1.0;
        m[(r, j)] = -1.0;
    }
    for k in 0..d {
        m[(edges.len() + k, k)] = 1.0;
    }
    Ok(ConstraintMatrix::from_dmatrix(m)?.with_sparsity())
}

/// Upper-bidiagonal difference operator: 1 on the diagonal, −1 right of it.
pub fn tv_matrix(d: usize) -> Result<ConstraintMatrix> {
    if d < 2 {
        return Err(Error::Input(format!("total variation needs d >= 2, got {d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    });
    Ok(ConstraintMatrix::from_dmatrix(m)?.with_sparsity())
}

/// Square, invertible graph operator: one `e_i − e_j` row per edge of a
/// spanning forest of `edges`, plus `e_r` for each component root.
pub fn tree_matrix(d: usize, edges: &[(usize, usize)]) -> Result<ConstraintMatrix> {
    let (forest, roots) = spanning_forest(d, edges)?;
    let mut m = DMatrix::zeros(d, d);
    for (r, &(i, j)) in forest.iter().enumerate() {
        m[(r, i)] = 1.0;
        m[(r, j)] = -1.0;
    }
    for (k, &root) in roots.iter().enumerate() {
        m[(forest.len() + k, root)] = 1.0;
    }
    Ok(ConstraintMatrix::from_dmatrix(m)?.with_sparsity())
}

/// Graph-guided fused lasso: `f(x) + λ(Σ_edges |x_i − x_j| + ‖x‖₁)`.
pub fn build_ggfl(
    data: SampleSet,
    edges: &[(usize, usize)],
    loss: LossKind,
    lambda: f64,
    l2: f64,
) -> Result<ConstrainedProblem> {
    let a = ggfl_matrix(data.d(), edges)?;
    ConstrainedProblem::generalized_lasso(SmoothSum::new(loss, data, l2)?, a, lambda)
}

/// Graph-guided penalty over a spanning forest of `edges`; `A` is square and
/// full rank, as the strongly convex theory requires.
pub fn build_tree_guided(
    data: SampleSet,
    edges: &[(usize, usize)],
    loss: LossKind,
    lambda: f64,
    l2: f64,
) -> Result<ConstrainedProblem> {
    let a = tree_matrix(data.d(), edges)?;
    ConstrainedProblem::generalized_lasso(SmoothSum::new(loss, data, l2)?, a, lambda)
}

/// `(1/2n) Σ (o_i − xᵀz_i)² + λ‖Ax‖₁` with the difference operator `A`.
pub fn build_tv(data: SampleSet, lambda: f64) -> Result<ConstrainedProblem> {
    let a = tv_matrix(data.d())?;
    ConstrainedProblem::generalized_lasso(SmoothSum::new(LossKind::Squared, data, 0.0)?, a, lambda)
}

/// Plain lasso, `A = I`.
pub fn build_lasso(data: SampleSet, loss: LossKind, lambda: f64, l2: f64) -> Result<ConstrainedProblem> {
    let d = data.d();
    ConstrainedProblem::generalized_lasso(SmoothSum::new(loss, data, l2)?, ConstraintMatrix::identity(d), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(d: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn ggfl_without_edges_is_identity() {
        assert_eq!(ggfl_matrix(3, &[]).unwrap().as_dmatrix(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn ggfl_single_edge_layout() {
        let a = ggfl_matrix(3, &[(0, 1)]).unwrap();
        let expected = DMatrix::from_row_slice(4, 3, &[1., -1., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        assert_eq!(a.as_dmatrix(), &expected);
        assert!(ggfl_matrix(3, &[(1, 1)]).is_err());
        assert!(ggfl_matrix(3, &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn ggfl_penalty_matches_edge_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = 8;
        let mut edges = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if rng.random_bool(0.3) {
                    edges.push((i, j));
                }
            }
        }
        let a = ggfl_matrix(d, &edges).unwrap();
        let x = random_x(d, 4);
        let direct: f64 = edges.iter().map(|&(i, j)| (x[i] - x[j]).abs()).sum::<f64>()
            + x.iter().map(|v| v.abs()).sum::<f64>();
        let via_a: f64 = a.mul_vec(&x).iter().map(|v| v.abs()).sum();
        assert!((direct - via_a).abs() < 1e-12);
    }

    #[test]
    fn tv_matrix_layout() {
        let a = tv_matrix(2).unwrap();
        assert_eq!(a.as_dmatrix(), &DMatrix::from_row_slice(2, 2, &[1., -1., 0., 1.]));
        assert!(tv_matrix(1).is_err());
        // constant x: every difference vanishes, the last row keeps x_d
        let a = tv_matrix(6).unwrap();
        let x = DVector::from_element(6, -0.7);
        let l1: f64 = a.mul_vec(&x).iter().map(|v| v.abs()).sum();
        assert!((l1 - 0.7).abs() < 1e-15);
        let x = random_x(6, 1);
        let ax = a.mul_vec(&x);
        for i in 0..6 {
            let row_dot: f64 = (0..6).map(|j| a.as_dmatrix()[(i, j)] * x[j]).sum();
            assert!((ax[i] - row_dot).abs() < 1e-15);
        }
    }

    #[test]
    fn tree_matrix_is_square_and_invertible() {
        let edges = [(0, 1), (1, 2), (0, 2), (3, 4)];
        let a = tree_matrix(6, &edges).unwrap();
        assert_eq!((a.rows(), a.cols()), (6, 6));
        assert!(spectral_extremes(&a).unwrap().is_full_row_rank());
    }

    #[test]
    fn objective_cases() {
        let data = gen_classification(40, 4, 7).unwrap();
        let f = SmoothSum::new(LossKind::Logistic, data.clone(), 0.0).unwrap();
        let x = random_x(4, 2);
        let p = build_ggfl(data.clone(), &[], LossKind::Logistic, 0.0, 0.0).unwrap();
        assert_eq!(p.objective(&x).unwrap(), f.value(&x));
        let p = build_ggfl(data.clone(), &[(0, 3)], LossKind::Logistic, 0.3, 0.0).unwrap();
        assert!((p.objective(&DVector::zeros(4)).unwrap() - 2f64.ln()).abs() < 1e-15);
        let naive = (0..40).map(|i| f.loss_value_grad(&x, i).unwrap().0).sum::<f64>() / 40.0
            + 0.3 * ((x[0] - x[3]).abs() + x.iter().map(|v| v.abs()).sum::<f64>());
        assert!((p.objective(&x).unwrap() - naive).abs() < 1e-12);

        let f = SmoothSum::new(LossKind::Logistic, data, 0.0).unwrap();
        let q = ConstrainedProblem::new(f, Regularizer::Zero, ConstraintMatrix::identity(4), BForm::Identity, DVector::zeros(4)).unwrap();
        assert!(matches!(q.objective(&x), Err(Error::Config(_))));
    }

    #[test]
    fn dimension_checks() {
        let data = gen_classification(10, 4, 7).unwrap();
        let f = SmoothSum::new(LossKind::Logistic, data, 0.0).unwrap();
        assert!(ConstrainedProblem::new(f.clone(), Regularizer::Zero, ConstraintMatrix::identity(3), BForm::NegIdentity, DVector::zeros(3)).is_err());
        assert!(ConstrainedProblem::new(f, Regularizer::Zero, ConstraintMatrix::identity(4), BForm::NegIdentity, DVector::zeros(3)).is_err());
    }
}
