use nalgebra::{DVector, SymmetricEigen};

use super::data::SampleSet;
use crate::error::{check_dim, Error, Result};

/// Per-sample loss `φ(o_i, z_iᵀx)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `log(1 + exp(−o t))`
    Logistic,
    /// `½(o − t)²`
    Squared,
    /// `1 / (1 + exp(o t))`, nonconvex.
    Sigmoid,
}

/// Largest `|σ''|` of the logistic sigmoid, `1/(6√3)`.
pub const SIGMOID_CURVATURE: f64 = 0.096_225_044_864_937_63;

impl LossKind {
    pub fn is_convex(self) -> bool {
        !matches!(self, LossKind::Sigmoid)
    }

    /// Bound on `φ''` in `t`.
    pub fn curvature(self) -> f64 {
        match self {
            LossKind::Logistic => 0.25,
            LossKind::Squared => 1.0,
            LossKind::Sigmoid => SIGMOID_CURVATURE,
        }
    }

    pub fn value(self, o: f64, t: f64) -> f64 {
        match self {
            LossKind::Logistic => softplus(-o * t),
            LossKind::Squared => 0.5 * (o - t) * (o - t),
            LossKind::Sigmoid => sigmoid(-o * t),
        }
    }

    /// `∂φ/∂t`
    pub fn deriv(self, o: f64, t: f64) -> f64 {
        match self {
            LossKind::Logistic => -o * sigmoid(-o * t),
            LossKind::Squared => t - o,
            LossKind::Sigmoid => {
                let s = sigmoid(-o * t);
                -o * s * (1.0 - s)
            }
        }
    }

    /// `∂²φ/∂t²`
    pub fn second_deriv(self, o: f64, t: f64) -> f64 {
        match self {
            LossKind::Logistic => {
                let s = sigmoid(-o * t);
                o * o * s * (1.0 - s)
            }
            LossKind::Squared => 1.0,
            LossKind::Sigmoid => {
                let s = sigmoid(-o * t);
                o * o * s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Finite sum `f(x) = (1/n) Σ f_i(x)` with
/// `f_i(x) = φ(o_i, z_iᵀx) + (μ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct SmoothSum {
    kind: LossKind,
    data: SampleSet,
    l2: f64,
    per_sample_l: Vec<f64>,
    l_max: f64,
    l_f_bound: f64,
    lambda_f: f64,
}

impl SmoothSum {
    pub fn new(kind: LossKind, data: SampleSet, l2: f64) -> Result<Self> {
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::Input(format!("l2 strength must be >= 0, got {l2}")));
        }
        if matches!(kind, LossKind::Logistic | LossKind::Sigmoid) && !data.is_binary() {
            return Err(Error::Input(format!("{kind:?} loss needs labels in {{-1, +1}}")));
        }
        let curvature = kind.curvature();
        let per_sample_l: Vec<f64> = (0..data.n())
            .map(|i| curvature * data.row_norm_sq(i) + l2)
            .collect();
        let l_max = per_sample_l.iter().copied().fold(0.0, f64::max);
        let l_f_bound = per_sample_l.iter().sum::<f64>() / data.n() as f64;
        let lambda_f = match kind {
            LossKind::Squared => {
                let gram = data.gram() / data.n() as f64;
                let min_eig = SymmetricEigen::new(gram).eigenvalues.min().max(0.0);
                min_eig + l2
            }
            LossKind::Logistic => l2,
            // only the l2 term can overcome the sigmoid's negative curvature
            LossKind::Sigmoid => (l2 - (l_f_bound - l2)).max(0.0),
        };
        Ok(Self {
            kind,
            data,
            l2,
            per_sample_l,
            l_max,
            l_f_bound,
            lambda_f: lambda_f.min(l_f_bound),
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn data(&self) -> &SampleSet {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    /// `(L_i, L_max, L_f bound)`; `L_f ≤ (1/n) Σ L_i ≤ max L_i`.
    pub fn lipschitz_constants(&self) -> (&[f64], f64, f64) {
        (&self.per_sample_l, self.l_max, self.l_f_bound)
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn l_f(&self) -> f64 {
        self.l_f_bound
    }

    /// Strong-convexity modulus; 0 when none is known.
    pub fn lambda_f(&self) -> f64 {
        self.lambda_f
    }

    /// Scalar `φ'(o_i, z_iᵀx)`; the full sample gradient is
    /// `coef · z_i + μx`.
    pub fn sample_coef(&self, x: &DVector<f64>, i: usize) -> f64 {
        self.kind.deriv(self.data.label(i), self.data.dot_row(i, x))
    }

    pub fn loss_value_grad(&self, x: &DVector<f64>, i: usize) -> Result<(f64, DVector<f64>)> {
        check_dim("loss argument", self.d(), x.len())?;
        if i >= self.n() {
            return Err(Error::Input(format!("sample index {i} out of range 0..{}", self.n())));
        }
        let o = self.data.label(i);
        let t = self.data.dot_row(i, x);
        let value = self.kind.value(o, t) + 0.5 * self.l2 * x.norm_squared();
        let mut grad = x * self.l2;
        self.data.axpy_row(i, self.kind.deriv(o, t), &mut grad);
        Ok((value, grad))
    }

    /// `f(x)`, summed in sample order.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let total: f64 = (0..self.n())
            .map(|i| self.kind.value(self.data.label(i), self.data.dot_row(i, x)))
            .sum();
        total / self.n() as f64 + 0.5 * self.l2 * x.norm_squared()
    }

    /// Mean per-sample loss without the l2 term (used for held-out data).
    pub fn data_loss(&self, x: &DVector<f64>) -> f64 {
        let total: f64 = (0..self.n())
            .map(|i| self.kind.value(self.data.label(i), self.data.dot_row(i, x)))
            .sum();
        total / self.n() as f64
    }

    /// Fraction of samples with `sign(z_iᵀx) ≠ o_i`.
    pub fn error_rate(&self, x: &DVector<f64>) -> f64 {
        let wrong = (0..self.n())
            .filter(|&i| {
                let t = self.data.dot_row(i, x);
                let pred = if t >= 0.0 { 1.0 } else { -1.0 };
                pred != self.data.label(i)
            })
            .count();
        wrong as f64 / self.n() as f64
    }

    /// `(1/n) Σ ∇f_i(x)`, accumulated in sample order.
    pub fn full_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("gradient argument", self.d(), x.len())?;
        Ok(self.full_gradient_unchecked(x))
    }

    pub(crate) fn full_gradient_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.d());
        for i in 0..self.n() {
            self.data.axpy_row(i, self.sample_coef(x, i), &mut acc);
        }
        acc /= self.n() as f64;
        acc.axpy(self.l2, x, 1.0);
        acc
    }

    /// Mean of `∇f_i(x)` over `batch`.
    pub fn batch_gradient(&self, x: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.d());
        for &i in batch {
            self.data.axpy_row(i, self.sample_coef(x, i), &mut acc);
        }
        acc /= batch.len() as f64;
        acc.axpy(self.l2, x, 1.0);
        acc
    }

    /// Bregman divergence `f(x) − f(x*) − ∇f(x*)ᵀ(x − x*)`, evaluated per
    /// sample to avoid cancelling two nearly equal objective values.
    pub fn bregman(&self, x: &DVector<f64>, x_star: &DVector<f64>) -> f64 {
        let diff = x - x_star;
        let mut total = 0.0;
        for i in 0..self.n() {
            let o = self.data.label(i);
            let t = self.data.dot_row(i, x);
            let ts = self.data.dot_row(i, x_star);
            total += scalar_bregman(self.kind, o, t, ts);
        }
        total / self.n() as f64 + 0.5 * self.l2 * diff.norm_squared()
    }
}

fn scalar_bregman(kind: LossKind, o: f64, t: f64, ts: f64) -> f64 {
    let h = t - ts;
    match kind {
        LossKind::Squared => 0.5 * h * h,
        _ => {
            // second-order expansion once the direct difference would cancel
            if h.abs() < 1e-4 {
                let c2 = kind.second_deriv(o, ts);
                let eps = 1e-6;
                let c3 = (kind.second_deriv(o, ts + eps) - kind.second_deriv(o, ts - eps)) / (2.0 * eps);
                0.5 * c2 * h * h + c3 * h * h * h / 6.0
            } else {
                kind.value(o, t) - kind.value(o, ts) - kind.deriv(o, ts) * h
            }
        }
    }
}
