//! Convergence and stationarity diagnostics.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::matspec::ConstraintMatrix;
use crate::problems::{BForm, ConstrainedProblem, Regularizer, SmoothSum};

/// High-accuracy primal/dual solution used by `R`, `J` and bound evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: DVector<f64>,
    pub y_star: DVector<f64>,
    /// Scaled dual at penalty `rho`.
    pub u_star: DVector<f64>,
    /// The element `g'(y*) ∈ ∂g(y*)` paired with `u*` (`g' = −ρBᵀu*`).
    pub g_subgrad: DVector<f64>,
    pub rho: f64,
    /// `max(‖Ax* + By* − c‖, ‖∇f(x*) + ρAᵀu*‖)`
    pub quality: f64,
    pub iterations: usize,
}

impl ReferenceSolution {
    pub fn converged(&self, tol: f64) -> bool {
        self.quality <= tol
    }
}

/// One row of a solver trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub stage: usize,
    pub iter: usize,
    /// Per-sample gradient evaluations divided by `n`.
    pub epochs: f64,
    pub time_s: f64,
    pub objective: f64,
    /// `‖Ax + By − c‖`
    pub feasibility: f64,
    pub r: Option<f64>,
    pub prox_grad_sq: Option<f64>,
    pub test_loss: Option<f64>,
}

pub const TRACE_HEADER: &str = "stage,iter,epochs,time_s,objective,feasibility,R,prox_grad_sq,test_loss";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.stage,
            self.iter,
            self.epochs,
            self.time_s,
            self.objective,
            self.feasibility,
            opt(self.r),
            opt(self.prox_grad_sq),
            opt(self.test_loss)
        )
    }
}

pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Per-coordinate `g(y) − g'ᵀy`; nonnegative whenever `g' ∈ ∂g(0)`.
fn g_gap(g: &Regularizer, y: &DVector<f64>, g_subgrad: &DVector<f64>) -> f64 {
    let w = g.weight();
    y.iter()
        .zip(g_subgrad.iter())
        .map(|(&yj, &sj)| w * yj.abs() - sj * yj)
        .sum()
}

/// `R(x, y) = f(x) − f(x*) − ∇f(x*)ᵀ(x − x*) + g(y) − g(y*) − g'(y*)ᵀ(y − y*)`
pub fn r_metric(
    p: &ConstrainedProblem,
    reference: &ReferenceSolution,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let f_part = p.f().bregman(x, &reference.x_star);
    let g_part = g_gap(p.g(), y, &reference.g_subgrad) - g_gap(p.g(), &reference.y_star, &reference.g_subgrad);
    f_part + g_part
}

/// `J(x) = f(x) + ρu*ᵀAx`
pub fn j_metric(p: &ConstrainedProblem, reference: &ReferenceSolution, x: &DVector<f64>) -> f64 {
    p.f().value(x) + reference.rho * reference.u_star.dot(&p.a().mul_vec(x))
}

/// `L(x, y, u) = f(x) + g(y) + ρuᵀr + (ρ/2)‖r‖²`, `r = Ax + By − c`.
pub fn aug_lagrangian(
    p: &ConstrainedProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
    rho: f64,
) -> f64 {
    let r = p.residual(x, y);
    p.objective_xy(x, y) + rho * u.dot(&r) + 0.5 * rho * r.norm_squared()
}

/// The three blocks of the proximal gradient of `L`.
#[derive(Debug, Clone)]
pub struct ProxGradient {
    /// `∇f(x) + ρAᵀu + ρAᵀr`
    pub x_block: DVector<f64>,
    /// `y − prox_g(y − ρBᵀ(r + u))`
    pub y_block: DVector<f64>,
    /// `r = Ax + By − c`
    pub residual: DVector<f64>,
}

impl ProxGradient {
    pub fn norm_sq(&self) -> f64 {
        self.x_block.norm_squared() + self.y_block.norm_squared() + self.residual.norm_squared()
    }
}

pub fn prox_gradient(
    p: &ConstrainedProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
    rho: f64,
) -> Result<ProxGradient> {
    check_dim("x", p.d(), x.len())?;
    check_dim("y", p.rows(), y.len())?;
    check_dim("u", p.rows(), u.len())?;
    let r = p.residual(x, y);
    let ru = &r + u;
    let mut x_block = p.f().full_gradient_unchecked(x);
    x_block.axpy(rho, &p.a().tr_mul_vec(&ru), 1.0);
    let y_grad = p.apply_b(&ru) * rho;
    let y_block = y - p.g().prox(&(y - y_grad), 1.0);
    Ok(ProxGradient {
        x_block,
        y_block,
        residual: r,
    })
}

/// `‖∇̃L(x, y, u)‖²`
pub fn prox_grad_norm_sq(
    p: &ConstrainedProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
    rho: f64,
) -> Result<f64> {
    Ok(prox_gradient(p, x, y, u, rho)?.norm_sq())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMode {
    /// Average over all `C(n, b)` mini-batches; refused above 10⁵ batches.
    Exhaustive,
    MonteCarlo { draws: usize, seed: u64 },
}

pub const MAX_EXHAUSTIVE_BATCHES: u128 = 100_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Calls `visit` with every size-`b` subset of `0..n` in lexicographic order.
pub fn for_each_batch(n: usize, b: usize, mut visit: impl FnMut(&[usize])) {
    if b == 0 || b > n {
        return;
    }
    let mut idx: Vec<usize> = (0..b).collect();
    loop {
        visit(&idx);
        let Some(pos) = (0..b).rev().find(|&k| idx[k] != k + n - b) else {
            return;
        };
        idx[pos] += 1;
        for k in pos + 1..b {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// `E‖∇̂f(x) − ∇f(x)‖²` for the variance-reduced estimator anchored at `x̃`.
pub fn empirical_vr_variance(
    f: &SmoothSum,
    x: &DVector<f64>,
    x_tilde: &DVector<f64>,
    b: usize,
    mode: VarianceMode,
) -> Result<f64> {
    let n = f.n();
    if b == 0 || b > n {
        return Err(Error::Input(format!("batch size {b} outside 1..={n}")));
    }
    let z_tilde = f.full_gradient(x_tilde)?;
    let full = f.full_gradient(x)?;
    let coef_diff: Vec<f64> = (0..n)
        .map(|i| f.sample_coef(x, i) - f.sample_coef(x_tilde, i))
        .collect();
    let l2_shift = (x - x_tilde) * f.l2();
    let deviation = |batch: &[usize]| -> f64 {
        let mut g = DVector::zeros(f.d());
        for &i in batch {
            f.data().axpy_row(i, coef_diff[i], &mut g);
        }
        g /= batch.len() as f64;
        g += &l2_shift;
        g += &z_tilde;
        (g - &full).norm_squared()
    };
    match mode {
        VarianceMode::Exhaustive => {
            let count = binomial(n, b);
            if count > MAX_EXHAUSTIVE_BATCHES {
                return Err(Error::Input(format!("C({n}, {b}) = {count} batches is too many to enumerate")));
            }
            let mut total = 0.0;
            for_each_batch(n, b, |batch| total += deviation(batch));
            Ok(total / count as f64)
        }
        VarianceMode::MonteCarlo { draws, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let draws = draws.max(10_000);
            let mut total = 0.0;
            for _ in 0..draws {
                let mut batch = rand::seq::index::sample(&mut rng, n, b).into_vec();
                batch.sort_unstable();
                total += deviation(&batch);
            }
            Ok(total / draws as f64)
        }
    }
}

/// Batch proximal-linearized ADMM (`b = n`, exact x-update with `G = I`)
/// run until `max(‖r‖, ‖∇f(x) + ρAᵀu‖) ≤ tol` or `max_iter` iterations.
///
/// Always returns the final point; check [`ReferenceSolution::converged`].
pub fn reference_solve(
    p: &ConstrainedProblem,
    rho: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceSolution> {
    if !(rho > 0.0) || !(tol > 0.0) {
        return Err(Error::Config("reference solve needs rho > 0 and tol > 0".into()));
    }
    let eta = 1.0 / p.f().l_f();
    let step = crate::solver::ExactStep::new(p.a(), eta, rho)?;
    let a: &ConstraintMatrix = p.a();
    let sign = p.b_form().sign();

    let mut x = DVector::zeros(p.d());
    let mut u = DVector::zeros(p.rows());
    let mut y = crate::solver::y_update(p, &x, &u, rho);
    let mut grad = p.f().full_gradient_unchecked(&x);
    let mut quality = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        y = crate::solver::y_update(p, &x, &u, rho);
        x = step.apply(p, &x, &grad, &y, &u);
        let r = p.residual(&x, &y);
        u += &r;
        grad = p.f().full_gradient_unchecked(&x);
        let mut stat = grad.clone();
        stat.axpy(rho, &a.tr_mul_vec(&u), 1.0);
        quality = r.norm().max(stat.norm());
        if !quality.is_finite() {
            return Err(Error::Diverged {
                stage: 0,
                iter: it,
                what: "reference iterate",
                trace: Vec::new(),
            });
        }
        if quality <= tol {
            break;
        }
    }
    let candidate = &u * (-rho * sign);
    let g_subgrad = p.g().project_subgradient(&y, &candidate);
    Ok(ReferenceSolution {
        x_star: x,
        y_star: y,
        u_star: u,
        g_subgrad,
        rho,
        quality,
        iterations,
    })
}

/// Clock for trace timestamps; `wasm32-unknown-unknown` has no monotonic
/// clock in `std`, so timestamps read 0 there.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_s(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Optional extras evaluated at each trace point.
#[derive(Debug, Clone, Default)]
pub struct TraceOptions {
    pub reference: Option<ReferenceSolution>,
    /// Held-out samples; reported as mean per-sample loss without penalty.
    pub test: Option<SmoothSum>,
    pub prox_grad: bool,
}

/// Builds [`TraceRecord`]s for one run.
pub(crate) struct Monitor<'a> {
    problem: &'a ConstrainedProblem,
    options: &'a TraceOptions,
    rho: f64,
    clock: Stopwatch,
    pub records: Vec<TraceRecord>,
}

impl<'a> Monitor<'a> {
    pub fn new(problem: &'a ConstrainedProblem, options: &'a TraceOptions, rho: f64, clock: Stopwatch) -> Self {
        Self {
            problem,
            options,
            rho,
            clock,
            records: Vec::new(),
        }
    }

    pub fn record(
        &mut self,
        stage: usize,
        iter: usize,
        epochs: f64,
        x: &DVector<f64>,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) {
        let p = self.problem;
        let objective = p.objective(x).unwrap_or_else(|_| p.objective_xy(x, y));
        let feasibility = p.residual(x, y).norm();
        let r = self.options.reference.as_ref().map(|rf| r_metric(p, rf, x, y));
        let prox_grad_sq = self
            .options
            .prox_grad
            .then(|| prox_grad_norm_sq(p, x, y, u, self.rho).unwrap_or(f64::NAN));
        let test_loss = self.options.test.as_ref().map(|t| t.data_loss(x));
        self.records.push(TraceRecord {
            stage,
            iter,
            epochs,
            time_s: self.clock.elapsed_s(),
            objective,
            feasibility,
            r,
            prox_grad_sq,
            test_loss,
        });
    }
}

/// Whether `b` selects `B = −I` (the only form with a reporting shortcut).
pub fn reports_at_lift(p: &ConstrainedProblem) -> bool {
    p.b_form() == BForm::NegIdentity && p.c().iter().all(|&v| v == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_lasso, build_tv, gen_classification, gen_tv_data, LossKind, SampleSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, d: usize, s: f64) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.random_range(-s..s))
    }

    fn lasso_instance() -> (ConstrainedProblem, ReferenceSolution) {
        let data = gen_classification(60, 5, 3).unwrap();
        let p = build_lasso(data, LossKind::Logistic, 0.02, 0.05).unwrap();
        let r = reference_solve(&p, 1.0, 1e-11, 100_000).unwrap();
        assert!(r.converged(1e-11));
        (p, r)
    }

    #[test]
    fn r_vanishes_at_reference_and_is_nonnegative() {
        let (p, r) = lasso_instance();
        assert!(r_metric(&p, &r, &r.x_star, &r.y_star).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = rv(&mut rng, 5, 3.0);
            let y = rv(&mut rng, 5, 3.0);
            assert!(r_metric(&p, &r, &x, &y) >= -1e-10);
        }
    }

    #[test]
    fn r_is_quadratic_bregman_for_ridge() {
        let data = gen_tv_data(30, 4, 2).unwrap().samples;
        let p = build_lasso(data, LossKind::Squared, 0.0, 0.1).unwrap();
        let r = reference_solve(&p, 1.0, 1e-12, 100_000).unwrap();
        let h = p.f().data().gram() / 30.0 + nalgebra::DMatrix::identity(4, 4) * 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rv(&mut rng, 4, 1.0);
        let y = rv(&mut rng, 4, 1.0);
        let dx = &x - &r.x_star;
        let closed = 0.5 * dx.dot(&(&h * &dx));
        assert!((r_metric(&p, &r, &x, &y) - closed).abs() < 1e-10);
    }

    #[test]
    fn j_identities() {
        let (p, r) = lasso_instance();
        let js = j_metric(&p, &r, &r.x_star);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grad_star = p.f().full_gradient(&r.x_star).unwrap();
        for _ in 0..50 {
            let x = rv(&mut rng, 5, 2.0);
            let gap = j_metric(&p, &r, &x) - js;
            assert!(gap >= -1e-10);
            let recon = p.f().value(&x) - p.f().value(&r.x_star) - grad_star.dot(&(&x - &r.x_star));
            assert!((gap - recon).abs() < 1e-8);
        }
        assert_eq!(j_metric(&p, &r, &r.x_star) - js, 0.0);
    }

    #[test]
    fn aug_lagrangian_cases() {
        let (p, _) = lasso_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rv(&mut rng, 5, 1.0);
        let u = rv(&mut rng, 5, 1.0);
        let feasible = p.a().mul_vec(&x);
        assert_eq!(aug_lagrangian(&p, &x, &feasible, &u, 2.0), p.objective_xy(&x, &feasible));
        let y = rv(&mut rng, 5, 1.0);
        let r = p.residual(&x, &y);
        let zero = DVector::zeros(5);
        assert!((aug_lagrangian(&p, &x, &y, &zero, 2.0) - (p.objective_xy(&x, &y) + r.norm_squared())).abs() < 1e-14);
        let naive = p.f().value(&x) + 0.02 * y.iter().map(|v| v.abs()).sum::<f64>()
            + 2.0 * u.dot(&(&x - &y)) + (&x - &y).norm_squared();
        assert!((aug_lagrangian(&p, &x, &y, &u, 2.0) - naive).abs() < 1e-12);
    }

    #[test]
    fn prox_gradient_at_reference_and_blocks() {
        let (p, r) = lasso_instance();
        assert!(prox_grad_norm_sq(&p, &r.x_star, &r.y_star, &r.u_star, r.rho).unwrap() <= 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y, u) = (rv(&mut rng, 5, 1.0), rv(&mut rng, 5, 1.0), rv(&mut rng, 5, 1.0));
        let rho = 1.5;
        let pg = prox_gradient(&p, &x, &y, &u, rho).unwrap();
        // x block against central differences of L
        let h = 1e-6;
        for j in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (aug_lagrangian(&p, &xp, &y, &u, rho) - aug_lagrangian(&p, &xm, &y, &u, rho)) / (2.0 * h);
            assert!((fd - pg.x_block[j]).abs() < 1e-6);
        }
        // y block by the prox definition with B = −I
        let q = &y + (&x - &y + &u) * rho;
        let lam = 0.02;
        let expected = DVector::from_fn(5, |j, _| y[j] - q[j].signum() * (q[j].abs() - lam).max(0.0));
        assert!((&pg.y_block - expected).amax() < 1e-14);
        assert!((&pg.residual - (&x - &y)).amax() < 1e-15);
    }

    #[test]
    fn prox_gradient_zero_at_constructed_kkt_point() {
        // g = 0 and B = −I force u = 0, so the KKT point is the least-squares fit
        let data = gen_tv_data(20, 3, 1).unwrap().samples;
        let p = build_lasso(data.clone(), LossKind::Squared, 0.0, 0.0).unwrap();
        let z = nalgebra::DMatrix::from_fn(20, 3, |i, j| data.dense_row(i)[j]);
        let o = DVector::from_column_slice(data.labels());
        let x = z.tr_mul(&z).cholesky().unwrap().solve(&z.tr_mul(&o));
        let u = DVector::zeros(3);
        let rho = 2.0;
        assert!(p.f().full_gradient(&x).unwrap().amax() < 1e-13);
        assert!(prox_grad_norm_sq(&p, &x, &x, &u, rho).unwrap() < 1e-26);
        // off the KKT set in each block
        let u2 = DVector::from_element(3, 0.1);
        assert!(prox_grad_norm_sq(&p, &x, &x, &u2, rho).unwrap() > 1e-3);
        let y2 = &x + DVector::from_element(3, 0.1);
        assert!(prox_grad_norm_sq(&p, &x, &y2, &u, rho).unwrap() > 1e-3);
    }

    #[test]
    fn variance_enumeration() {
        let data = gen_tv_data(6, 3, 2).unwrap().samples;
        let f = SmoothSum::new(LossKind::Squared, data, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, xt) = (rv(&mut rng, 3, 1.0), rv(&mut rng, 3, 1.0));
        assert!(empirical_vr_variance(&f, &x, &xt, 6, VarianceMode::Exhaustive).unwrap() < 1e-28);
        assert_eq!(empirical_vr_variance(&f, &x, &x, 2, VarianceMode::Exhaustive).unwrap(), 0.0);

        // hand enumeration of the 15 pairs
        let full = f.full_gradient(&x).unwrap();
        let zt = f.full_gradient(&xt).unwrap();
        let mut total = 0.0;
        let mut count = 0;
        for i in 0..6 {
            for j in i + 1..6 {
                let gi = f.loss_value_grad(&x, i).unwrap().1 - f.loss_value_grad(&xt, i).unwrap().1;
                let gj = f.loss_value_grad(&x, j).unwrap().1 - f.loss_value_grad(&xt, j).unwrap().1;
                let est = (gi + gj) / 2.0 + &zt;
                total += (est - &full).norm_squared();
                count += 1;
            }
        }
        assert_eq!(count, 15);
        let exact = empirical_vr_variance(&f, &x, &xt, 2, VarianceMode::Exhaustive).unwrap();
        assert!((exact - total / 15.0).abs() < 1e-12);
        let mc = empirical_vr_variance(&f, &x, &xt, 2, VarianceMode::MonteCarlo { draws: 20_000, seed: 1 }).unwrap();
        assert!((mc - exact).abs() < 0.1 * exact);
    }

    #[test]
    fn exhaustive_refuses_large_enumerations() {
        let data = gen_tv_data(100, 2, 2).unwrap().samples;
        let f = SmoothSum::new(LossKind::Squared, data, 0.0).unwrap();
        let z = DVector::zeros(2);
        assert!(empirical_vr_variance(&f, &z, &z, 10, VarianceMode::Exhaustive).is_err());
    }

    #[test]
    fn reference_matches_ridge_closed_form() {
        let data = gen_tv_data(25, 4, 6).unwrap().samples;
        let p = build_lasso(data.clone(), LossKind::Squared, 0.0, 0.2).unwrap();
        let r = reference_solve(&p, 1.0, 1e-12, 100_000).unwrap();
        let z = nalgebra::DMatrix::from_fn(25, 4, |i, j| data.dense_row(i)[j]);
        let o = DVector::from_column_slice(data.labels());
        let h = z.tr_mul(&z) / 25.0 + nalgebra::DMatrix::identity(4, 4) * 0.2;
        let closed = h.cholesky().unwrap().solve(&(z.tr_mul(&o) / 25.0));
        assert!((&r.x_star - closed).amax() < 1e-10);
        assert!(r.quality <= 1e-12);
        assert!(p.residual(&r.x_star, &r.y_star).norm() <= 1e-8);
    }

    #[test]
    fn reference_matches_scalar_lasso() {
        // f(x) = ½(x − a)², g = λ|y|, A = 1
        let a = 1.3;
        let data = SampleSet::from_dense(&[vec![1.0]], vec![a]).unwrap();
        let p = build_lasso(data, LossKind::Squared, 0.4, 0.0).unwrap();
        let r = reference_solve(&p, 1.0, 1e-13, 100_000).unwrap();
        assert!((r.x_star[0] - 0.9).abs() < 1e-12);
        assert_eq!(r.g_subgrad[0], 0.4);
    }

    #[test]
    fn reference_invariants_on_tv() {
        let data = gen_tv_data(200, 6, 1).unwrap().samples;
        let p = build_tv(data, 0.05).unwrap();
        let r = reference_solve(&p, 1.0, 1e-10, 200_000).unwrap();
        assert!(r.converged(1e-10));
        let lam = 0.05;
        for j in 0..6 {
            assert!(r.g_subgrad[j].abs() <= lam);
            if r.y_star[j] != 0.0 {
                assert_eq!(r.g_subgrad[j], lam * r.y_star[j].signum());
            }
        }
        // recovered subgradient agrees with −ρBᵀu* = ρu*
        assert!((&r.g_subgrad - &r.u_star * r.rho).amax() < 1e-8);
    }

    #[test]
    fn batch_enumeration_counts() {
        let mut count = 0;
        for_each_batch(8, 3, |b| {
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            count += 1;
        });
        assert_eq!(count as u128, binomial(8, 3));
        assert_eq!(binomial(8, 3), 56);
    }

    #[test]
    fn trace_csv_schema() {
        let rec = TraceRecord {
            stage: 1,
            iter: 2,
            epochs: 1.5,
            time_s: 0.25,
            objective: 0.5,
            feasibility: 0.0,
            r: None,
            prox_grad_sq: Some(1e-3),
            test_loss: None,
        };
        let mut buf = Vec::new();
        write_trace_csv(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "stage,iter,epochs,time_s,objective,feasibility,R,prox_grad_sq,test_loss\n1,2,1.5,0.25,0.5,0,,0.001,\n"
        );
    }
}
