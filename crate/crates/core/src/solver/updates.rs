//! Single-iteration building blocks: the variance-reduced gradient and the
//! y-, x- and u-updates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};
use crate::matspec::{ConstraintMatrix, TransposePinv};
use crate::problems::{BForm, ConstrainedProblem, SmoothSum};

/// Anchor point `x̃` and its full gradient `z̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
}

impl Snapshot {
    pub fn new(f: &SmoothSum, x: DVector<f64>) -> Result<Self> {
        let z = f.full_gradient(&x)?;
        Ok(Self { x, z })
    }
}

/// `(1/b) Σ_{i∈batch} (∇f_i(x) − ∇f_i(x̃)) + z̃`.
pub fn vr_gradient(f: &SmoothSum, x: &DVector<f64>, snapshot: &Snapshot, batch: &[usize]) -> Result<DVector<f64>> {
    check_dim("vr_gradient x", f.d(), x.len())?;
    check_dim("vr_gradient snapshot", f.d(), snapshot.x.len())?;
    if batch.is_empty() {
        return Err(Error::Input("empty mini-batch".into()));
    }
    let mut sorted = batch.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Input("duplicate index in mini-batch".into()));
    }
    if sorted.last().is_some_and(|&i| i >= f.n()) {
        return Err(Error::Input(format!("mini-batch index outside 0..{}", f.n())));
    }
    Ok(vr_gradient_unchecked(f, x, snapshot, batch))
}

pub(crate) fn vr_gradient_unchecked(
    f: &SmoothSum,
    x: &DVector<f64>,
    snapshot: &Snapshot,
    batch: &[usize],
) -> DVector<f64> {
    let data = f.data();
    let mut acc = DVector::zeros(f.d());
    for &i in batch {
        let coef = f.sample_coef(x, i) - f.sample_coef(&snapshot.x, i);
        data.axpy_row(i, coef, &mut acc);
    }
    acc /= batch.len() as f64;
    acc.axpy(f.l2(), &(x - &snapshot.x), 1.0);
    acc += &snapshot.z;
    acc
}

/// `argmin_y g(y) + (ρ/2)‖Ax + By − c + u‖²`.
pub fn y_update(p: &ConstrainedProblem, x: &DVector<f64>, u: &DVector<f64>, rho: f64) -> DVector<f64> {
    let mut v = p.a().mul_vec(x) - p.c() + u;
    if p.b_form() == BForm::Identity {
        v.neg_mut();
    }
    p.g().prox(&v, 1.0 / rho)
}

/// `u + Ax + By − c`.
pub fn u_update(p: &ConstrainedProblem, u: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    u + p.residual(x, y)
}

/// `ũ = −(1/ρ)(Aᵀ)†∇f(x̃)` from a precomputed gradient.
pub fn dual_init(pinv: &TransposePinv, grad: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
    Ok(pinv.solve(grad)? * (-1.0 / rho))
}

/// Prefactored exact x-update with `G = I`:
/// `x⁺ = (I/η + ρAᵀA)⁻¹(x/η − ĝ − ρAᵀ(By − c + u))`.
#[derive(Debug, Clone)]
pub struct ExactStep {
    chol: Cholesky<f64, Dyn>,
    eta: f64,
    rho: f64,
}

impl ExactStep {
    pub fn new(a: &ConstraintMatrix, eta: f64, rho: f64) -> Result<Self> {
        if !(eta > 0.0 && rho > 0.0) {
            return Err(Error::Config(format!("exact update needs eta, rho > 0 (got {eta}, {rho})")));
        }
        let d = a.cols();
        let m = DMatrix::identity(d, d) / eta + a.gram_cols() * rho;
        let chol = Cholesky::new(m).ok_or_else(|| Error::Config("x-update system is not positive definite".into()))?;
        Ok(Self { chol, eta, rho })
    }

    pub fn apply(
        &self,
        p: &ConstrainedProblem,
        x: &DVector<f64>,
        grad_hat: &DVector<f64>,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) -> DVector<f64> {
        let shift = p.apply_b(y) - p.c() + u;
        let mut rhs = x / self.eta - grad_hat;
        rhs.axpy(-self.rho, &p.a().tr_mul_vec(&shift), 1.0);
        self.chol.solve(&rhs)
    }
}

/// `x − (η/γ)(ĝ + ρAᵀ(Ax + By − c + u))`.
pub fn x_update_linearized(
    p: &ConstrainedProblem,
    x: &DVector<f64>,
    grad_hat: &DVector<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
    eta: f64,
    rho: f64,
    gamma: f64,
) -> DVector<f64> {
    let ru = p.residual(x, y) + u;
    let mut dir = grad_hat.clone();
    dir.axpy(rho, &p.a().tr_mul_vec(&ru), 1.0);
    x - dir * (eta / gamma)
}
