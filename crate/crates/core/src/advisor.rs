//! Penalty, stepsize and inner-iteration theory.
//!
//! Everything here is a pure function of a few scalar constants of the
//! problem ([`ProblemConditioning`]) and the candidate hyperparameters.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::metrics::ReferenceSolution;
use crate::problems::ConstrainedProblem;
use crate::solver::UpdateMode;
use crate::SpectralSummary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConditioning {
    pub l_f: f64,
    pub lambda_f: f64,
    pub l_max: f64,
    /// `σ_max(AAᵀ)`
    pub sigma_max: f64,
    /// `σ_min(AAᵀ)`
    pub sigma_min: f64,
    pub n: usize,
}

impl ProblemConditioning {
    pub fn from_problem(p: &ConstrainedProblem) -> Self {
        let s = p.spectra();
        Self {
            l_f: p.f().l_f(),
            lambda_f: p.f().lambda_f(),
            l_max: p.f().l_max(),
            sigma_max: s.sigma_max_aat,
            sigma_min: s.sigma_min_aat,
            n: p.n(),
        }
    }

    fn require_strong(&self) -> Result<()> {
        if !(self.lambda_f > 0.0) {
            return Err(Error::Config("lambda_f = 0: f is not strongly convex, so the linear-rate theory does not apply".into()));
        }
        if !(self.sigma_min > 0.0) {
            return Err(Error::Config("sigma_min(AA^T) = 0: A is not full row rank".into()));
        }
        Ok(())
    }

    /// `h_f = L_f/λ_f`
    pub fn h_f(&self) -> Result<f64> {
        self.require_strong()?;
        Ok(self.l_f / self.lambda_f)
    }

    /// `h_A = √(σ_max/σ_min)`
    pub fn h_a(&self) -> Result<f64> {
        self.require_strong()?;
        Ok((self.sigma_max / self.sigma_min).sqrt())
    }

    /// `h_Q = L_max/λ_f`
    pub fn h_q(&self) -> Result<f64> {
        self.require_strong()?;
        Ok(self.l_max / self.lambda_f)
    }
}

/// `β(b) = (n − b)/(b(n − 1))`, and 0 for `n = 1`.
pub fn beta(b: usize, n: usize) -> Result<f64> {
    if b == 0 || b > n {
        return Err(Error::Input(format!("batch size {b} outside 1..={n}")));
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((n - b) as f64 / (b as f64 * (n - 1) as f64))
}

/// `γ_min = ηρ‖AᵀA‖ + 1`
pub fn gamma_min(eta: f64, rho: f64, norm_ata: f64) -> Result<f64> {
    if !(eta > 0.0 && rho > 0.0 && norm_ata >= 0.0) {
        return Err(Error::Input(format!("gamma_min needs eta, rho > 0 and ||A^T A|| >= 0 (got {eta}, {rho}, {norm_ata})")));
    }
    Ok(eta * rho * norm_ata + 1.0)
}

/// `‖G + ηρAᵀA‖`: `γ` when linearized, `1 + ηρ‖AᵀA‖` for the exact update.
pub fn g_plus_norm(update: UpdateMode, eta: f64, rho: f64, spectra: &SpectralSummary) -> f64 {
    match update {
        UpdateMode::Linearized { gamma } => gamma,
        UpdateMode::Exact => 1.0 + eta * rho * spectra.norm_ata,
    }
}

/// `‖G‖`: 1 for the exact update, `max |γ − ηρλ|` over the extreme
/// eigenvalues `λ` of `AᵀA` when linearized.
pub fn g_norm(update: UpdateMode, eta: f64, rho: f64, spectra: &SpectralSummary) -> f64 {
    match update {
        UpdateMode::Exact => 1.0,
        UpdateMode::Linearized { gamma } => {
            let k = eta * rho;
            (gamma - k * spectra.norm_ata).abs().max((gamma - k * spectra.lambda_min_ata).abs())
        }
    }
}

/// `‖G − ηρAᵀA‖`
pub fn g_minus_norm(update: UpdateMode, eta: f64, rho: f64, spectra: &SpectralSummary) -> f64 {
    let k = eta * rho;
    let (base, shift) = match update {
        UpdateMode::Exact => (1.0, k),
        UpdateMode::Linearized { gamma } => (gamma, 2.0 * k),
    };
    (base - shift * spectra.norm_ata).abs().max((base - shift * spectra.lambda_min_ata).abs())
}

/// `ρ* = √(L_f λ_f / (σ_max σ_min))`
pub fn rho_star(c: &ProblemConditioning) -> Result<f64> {
    c.require_strong()?;
    if !(c.l_f > 0.0 && c.sigma_max > 0.0) {
        return Err(Error::Config("rho* needs L_f > 0 and sigma_max > 0".into()));
    }
    Ok((c.l_f * c.lambda_f / (c.sigma_max * c.sigma_min)).sqrt())
}

/// `1 − 4L_max ηβ(b)`, after checking `0 < η ≤ 1/L_f` and `η < 1/(4L_max β)`.
fn linear_denominator(c: &ProblemConditioning, eta: f64, beta_b: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0 / c.l_f) {
        return Err(Error::Config(format!("eta = {eta} outside (0, 1/L_f = {}]", 1.0 / c.l_f)));
    }
    let denom = 1.0 - 4.0 * c.l_max * eta * beta_b;
    if !(denom > 0.0) {
        return Err(Error::Config(format!("eta = {eta} not below 1/(4 L_max beta(b))")));
    }
    Ok(denom)
}

/// Linear convergence factor `κ` of the strongly convex driver.
pub fn kappa(c: &ProblemConditioning, eta: f64, rho: f64, b: usize, m: f64, g_plus: f64) -> Result<f64> {
    c.require_strong()?;
    if !(rho > 0.0 && m > 0.0) {
        return Err(Error::Config("kappa needs rho > 0 and m > 0".into()));
    }
    let beta_b = beta(b, c.n)?;
    let den = linear_denominator(c, eta, beta_b)?;
    let k = 4.0 * c.l_max * eta * beta_b;
    Ok(g_plus / (c.lambda_f * eta * den * m) + k * (m + 1.0) / (den * m) + c.l_f / (rho * den * c.sigma_min * m))
}

/// `κ` at `ρ = ρ*` with `‖G + ηρAᵀA‖ = γ_min`.
pub fn kappa_min(c: &ProblemConditioning, eta: f64, b: usize, m: f64) -> Result<f64> {
    let (h_f, h_a) = (c.h_f()?, c.h_a()?);
    let beta_b = beta(b, c.n)?;
    let den = linear_denominator(c, eta, beta_b)?;
    if !(m > 0.0) {
        return Err(Error::Config("kappa needs m > 0".into()));
    }
    let k = 4.0 * c.l_max * eta * beta_b;
    Ok(1.0 / (c.lambda_f * eta * den * m) + k * (m + 1.0) / (den * m) + 2.0 * h_a * h_f.sqrt() / (den * m))
}

/// Smallest (real-valued) `m` with `κ_min(η, m) ≤ κ̃`, or `None` when no `m`
/// reaches `κ̃` at this `η`.
pub fn m_required(c: &ProblemConditioning, eta: f64, b: usize, kappa_target: f64) -> Result<Option<f64>> {
    let (h_f, h_a) = (c.h_f()?, c.h_a()?);
    let beta_b = beta(b, c.n)?;
    linear_denominator(c, eta, beta_b)?;
    let k = 4.0 * c.l_max * beta_b * eta;
    let den = kappa_target - (1.0 + kappa_target) * k;
    if !(den > 0.0) {
        return Ok(None);
    }
    Ok(Some((1.0 / (c.lambda_f * eta) + k + 2.0 * h_a * h_f.sqrt()) / den))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `b ≤ b*`: `η* = η̃`.
    SmallBatch,
    /// `b > b*`: `η* = 1/L_f`.
    LargeBatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaMStar {
    pub eta_star: f64,
    pub m_star: f64,
    pub b_star: f64,
    pub regime: Regime,
    /// `η̃`; `None` when `β(b) = 0`.
    pub eta_tilde: Option<f64>,
    pub delta: Option<f64>,
    pub big_m: f64,
}

/// The stepsize and inner-iteration count that reach `κ̃` with the fewest
/// inner iterations at `ρ = ρ*`.
pub fn eta_m_star(c: &ProblemConditioning, kappa_target: f64, b: usize) -> Result<EtaMStar> {
    let (h_f, h_a, h_q) = (c.h_f()?, c.h_a()?, c.h_q()?);
    let kt = kappa_target;
    if !(kt > 0.0 && kt < 1.0) {
        return Err(Error::Config(format!("kappa target {kt} outside (0, 1)")));
    }
    let beta_b = beta(b, c.n)?;
    let n = c.n as f64;
    let sqrt_hf = h_f.sqrt();

    let big_m = kt * h_f * c.l_f / c.l_max / (8.0 * ((1.0 + kt) * (h_f + h_a * sqrt_hf) + kt / 2.0));
    let b_star = n / (big_m * (n - 1.0) + 1.0);

    let small = beta_b > 0.0 && (b as f64) <= b_star;
    let (eta_star, m_star, eta_tilde, delta, regime) = if small {
        let delta = 1.0 / (4.0 * c.l_max * c.lambda_f * beta_b * (1.0 + 2.0 * (1.0 + 1.0 / kt) * h_a * sqrt_hf));
        let q = (1.0 + kt) / (kt * c.lambda_f + 2.0 * (1.0 + kt) * (c.l_f * c.lambda_f).sqrt() * h_a);
        let eta_t = (q * q + delta).sqrt() - q;
        let root = ((1.0 + kt).powi(2) + kt * kt / (16.0 * beta_b * beta_b * c.l_max * c.l_max * delta)).sqrt();
        let m = 8.0 * beta_b * h_q / (kt * kt) * (root + 1.0 + kt) + 2.0 * h_a * sqrt_hf / kt;
        (eta_t, m, Some(eta_t), Some(delta), Regime::SmallBatch)
    } else {
        let k = 4.0 * beta_b * c.l_max / c.l_f;
        let den = kt - (1.0 + kt) * k;
        if !(den > 0.0) {
            return Err(Error::Config(format!("kappa target {kt} is unreachable with b = {b}")));
        }
        let m = (h_f + k + 2.0 * h_a * sqrt_hf) / den;
        (1.0 / c.l_f, m, None, None, Regime::LargeBatch)
    };
    // κ̃ below κ_min shows up as a nonpositive denominator in m_required
    if m_required(c, eta_star.min(1.0 / c.l_f), b, kt)?.is_none() {
        return Err(Error::Config(format!("kappa target {kt} is below kappa_min")));
    }
    Ok(EtaMStar {
        eta_star,
        m_star: m_star.max(1.0),
        b_star,
        regime,
        eta_tilde,
        delta,
        big_m,
    })
}

/// Stages needed for `E R ≤ ε` (or, given `δ`, for `R ≤ ε` with
/// probability at least `1 − δ`).
pub fn stages_needed(r0: f64, epsilon: f64, kappa: f64, delta_prob: Option<f64>) -> Result<usize> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Config(format!("kappa = {kappa} must lie in (0, 1)")));
    }
    if !(r0 > 0.0 && epsilon > 0.0) {
        return Err(Error::Input("R0 and epsilon must be positive".into()));
    }
    let ratio = match delta_prob {
        None => r0 / epsilon,
        Some(d) if d > 0.0 && d < 1.0 => r0 / (epsilon * d),
        Some(d) => return Err(Error::Input(format!("delta = {d} outside (0, 1)"))),
    };
    let s = ratio.ln() / (1.0 / kappa).ln();
    if s <= 0.0 {
        return Ok(0);
    }
    // absorb rounding in exact powers such as log2(1024)
    Ok((s - 1e-9 * s.max(1.0)).ceil() as usize)
}

/// Initial-point terms of the general convex bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitTerms {
    /// `f(x̂₀) − f(x*) − ∇f(x*)ᵀ(x̂₀ − x*)`
    pub bregman: f64,
    /// `‖x̂₀ − x*‖²_{G+ηρAᵀA}`
    pub x_dist_sq: f64,
    /// `‖û₀ − u*‖²`
    pub u_dist_sq: f64,
    pub zeta: f64,
}

impl InitTerms {
    /// Evaluates the terms for a run at penalty `rho`; `u*` is rescaled from
    /// the reference's penalty.
    pub fn from_reference(
        p: &ConstrainedProblem,
        reference: &ReferenceSolution,
        x0: &DVector<f64>,
        u0: &DVector<f64>,
        update: UpdateMode,
        eta: f64,
        rho: f64,
        zeta: f64,
    ) -> Self {
        let dx = x0 - &reference.x_star;
        let x_dist_sq = match update {
            UpdateMode::Linearized { gamma } => gamma * dx.norm_squared(),
            UpdateMode::Exact => dx.norm_squared() + eta * rho * p.a().mul_vec(&dx).norm_squared(),
        };
        let u_star = &reference.u_star * (reference.rho / rho);
        Self {
            bregman: p.f().bregman(x0, &reference.x_star),
            x_dist_sq,
            u_dist_sq: (u0 - u_star).norm_squared(),
            zeta,
        }
    }
}

/// Right-hand side of the `O(1/s)` bound on `E[R(x̄, ȳ) + ζ‖Ax̄ + Bȳ − c‖]`.
pub fn convex_bound(
    c: &ProblemConditioning,
    eta: f64,
    rho: f64,
    b: usize,
    m: usize,
    s: usize,
    init: &InitTerms,
) -> Result<f64> {
    let beta_b = beta(b, c.n)?;
    if !(eta > 0.0 && eta <= 1.0 / c.l_f) {
        return Err(Error::Config(format!("eta = {eta} outside (0, 1/L_f]")));
    }
    let den_factor = 1.0 - 8.0 * c.l_max * eta * beta_b;
    if !(den_factor > 0.0) {
        return Err(Error::Config(format!("eta = {eta} not below 1/(8 L_max beta(b))")));
    }
    if !(rho > 0.0) || m == 0 || s == 0 {
        return Err(Error::Config("convex bound needs rho > 0, m >= 1, s >= 1".into()));
    }
    let (mf, sf) = (m as f64, s as f64);
    let den = den_factor * mf * sf;
    let variance_part = 4.0 * c.l_max * eta * beta_b * (mf + 1.0) / den * init.bregman;
    let init_part = (init.x_dist_sq / (2.0 * eta) + rho * (init.u_dist_sq + init.zeta * init.zeta / (rho * rho))) / den;
    Ok(variance_part + init_part)
}

/// The full-batch bound.
pub fn batch_bound(eta: f64, rho: f64, m: usize, s: usize, init: &InitTerms) -> Result<f64> {
    if !(eta > 0.0 && rho > 0.0) || m == 0 || s == 0 {
        return Err(Error::Config("batch bound needs eta, rho > 0, m, s >= 1".into()));
    }
    let ms = (m * s) as f64;
    Ok(init.x_dist_sq / (2.0 * eta * ms) + rho / ms * (init.u_dist_sq + init.zeta * init.zeta / (rho * rho)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcVerdict {
    pub feasible: bool,
    pub lhs: f64,
    pub eta_ok: bool,
    pub rho_ok: bool,
}

/// Left-hand side of the nonconvex stepsize/penalty condition and whether
/// `lhs ≤ 1`, `η < 1/(2L_f)` and `ρ ≥ 4L_f/σ_min` all hold.
pub fn nc_condition_check(c: &ProblemConditioning, eta: f64, rho: f64, m: usize, b: usize, g_norm: f64) -> NcVerdict {
    let beta_b = beta(b, c.n).unwrap_or(f64::NAN);
    let l = c.l_max;
    let sm = c.sigma_min;
    let mf = m as f64;
    let lhs = 8.0 * l * l * mf * mf * beta_b * eta * eta
        + l * eta
        + 36.0 * g_norm / (eta * rho * sm)
        + 36.0 * l * g_norm.sqrt() / (rho * sm)
        + (288.0 * l * l * mf * mf / sm + 216.0 * l * l * (mf + 1.0) / sm + 18.0 * l * l / sm) * (eta / rho);
    let eta_ok = eta > 0.0 && eta < 1.0 / (2.0 * c.l_f);
    let rho_ok = sm > 0.0 && rho >= 4.0 * c.l_f / sm;
    NcVerdict {
        feasible: lhs <= 1.0 && eta_ok && rho_ok,
        lhs,
        eta_ok,
        rho_ok,
    }
}

/// Operator norms entering the nonconvex constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcGeometry {
    pub norm_ata: f64,
    pub norm_a: f64,
    pub norm_bta: f64,
    pub norm_b: f64,
    /// `‖G − ηρAᵀA‖`
    pub g_minus_norm: f64,
}

impl NcGeometry {
    /// With `B = ±I`, `‖BᵀA‖ = ‖A‖ = √σ_max(AAᵀ)` and `‖B‖ = 1`.
    pub fn from_problem(p: &ConstrainedProblem, update: UpdateMode, eta: f64, rho: f64) -> Self {
        let s = p.spectra();
        let norm_a = s.sigma_max_aat.sqrt();
        Self {
            norm_ata: s.norm_ata,
            norm_a,
            norm_bta: norm_a,
            norm_b: 1.0,
            g_minus_norm: g_minus_norm(update, eta, rho, s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcConstants {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
}

pub fn nc_constants(c: &ProblemConditioning, eta: f64, rho: f64, geo: &NcGeometry) -> Result<NcConstants> {
    let lf = c.l_f;
    let c1 = (3.0 * (lf + rho * geo.norm_ata).powi(2) + 2.0 * rho * rho * geo.norm_bta.powi(2))
        .max(3.0 / (eta * eta) * geo.g_minus_norm.powi(2))
        .max(3.0 * rho * rho * geo.norm_a.powi(2) + 2.0 * rho * rho * geo.norm_b.powi(2) + 1.0);
    let c2 = (1.0 / (2.0 * eta) - lf).min(1.0 / (4.0 * eta)).min(rho / 2.0);
    if !(c2 > 0.0) {
        return Err(Error::Config(format!("C2 = {c2} <= 0; need eta < 1/(2 L_f)")));
    }
    Ok(NcConstants { c1, c2, c: c1 / c2 })
}

/// Request for [`advise`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdviceRequest {
    pub kappa_target: f64,
    pub batch_size: usize,
    /// `(η, ρ, m)` evaluated for `κ` and the nonconvex check; defaults to the
    /// recommended `(η*, ρ*, ⌈m*⌉)`.
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub m: Option<usize>,
    /// `γ` for the linearized update; `None` means exact update.
    pub gamma: Option<f64>,
    pub r0_over_epsilon: f64,
    pub delta_prob: Option<f64>,
}

impl Default for AdviceRequest {
    fn default() -> Self {
        Self {
            kappa_target: 0.5,
            batch_size: 1,
            eta: None,
            rho: None,
            m: None,
            gamma: None,
            r0_over_epsilon: 1e6,
            delta_prob: None,
        }
    }
}

/// Combined advice; fields are `None` where the theory does not apply
/// (e.g. `λ_f = 0` or rank-deficient `A`).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParamAdvice {
    pub rho_star: Option<f64>,
    pub gamma_min: f64,
    pub kappa: Option<f64>,
    pub kappa_min: Option<f64>,
    pub eta_star: Option<f64>,
    pub m_star: Option<f64>,
    pub b_star: Option<f64>,
    pub regime: Option<Regime>,
    pub stages_needed: Option<usize>,
    pub stages_needed_hp: Option<usize>,
    pub nc: NcVerdict,
    pub nc_constants: Option<NcConstants>,
    /// `(η, ρ, m)` the κ and nonconvex entries were evaluated at.
    pub eta: f64,
    pub rho: f64,
    pub m: usize,
}

pub fn advise(p: &ConstrainedProblem, req: &AdviceRequest) -> Result<HyperParamAdvice> {
    let c = ProblemConditioning::from_problem(p);
    beta(req.batch_size, c.n)?;
    let strong = c.require_strong().is_ok();
    let rho_star = if strong { rho_star(&c).ok() } else { None };
    let schedule = if strong { eta_m_star(&c, req.kappa_target, req.batch_size).ok() } else { None };

    let eta = req.eta.or(schedule.map(|s| s.eta_star)).unwrap_or(0.5 / c.l_f);
    let rho = req.rho.or(rho_star).unwrap_or(1.0);
    let m = req
        .m
        .or(schedule.map(|s| s.m_star.ceil() as usize))
        .unwrap_or_else(|| (2 * c.n).div_ceil(req.batch_size));
    if !(eta > 0.0 && rho > 0.0) {
        return Err(Error::Config("eta and rho must be positive".into()));
    }
    let gmin = gamma_min(eta, rho, p.spectra().norm_ata)?;
    let update = match req.gamma {
        Some(gamma) => UpdateMode::Linearized { gamma },
        None => UpdateMode::Exact,
    };
    let spectra = p.spectra();
    let kappa_v = kappa(&c, eta, rho, req.batch_size, m as f64, g_plus_norm(update, eta, rho, spectra)).ok();
    let kappa_min_v = kappa_min(&c, eta, req.batch_size, m as f64).ok();
    let stage_kappa = kappa_v.filter(|k| *k < 1.0);
    let stages = stage_kappa.and_then(|k| stages_needed(req.r0_over_epsilon, 1.0, k, None).ok());
    let stages_hp = match (stage_kappa, req.delta_prob) {
        (Some(k), Some(d)) => stages_needed(req.r0_over_epsilon, 1.0, k, Some(d)).ok(),
        _ => None,
    };
    let nc = nc_condition_check(&c, eta, rho, m, req.batch_size, g_norm(update, eta, rho, spectra));
    let geo = NcGeometry::from_problem(p, update, eta, rho);
    Ok(HyperParamAdvice {
        rho_star,
        gamma_min: gmin,
        kappa: kappa_v,
        kappa_min: kappa_min_v,
        eta_star: schedule.map(|s| s.eta_star),
        m_star: schedule.map(|s| s.m_star),
        b_star: schedule.map(|s| s.b_star),
        regime: schedule.map(|s| s.regime),
        stages_needed: stages,
        stages_needed_hp: stages_hp,
        nc,
        nc_constants: nc_constants(&c, eta, rho, &geo).ok(),
        eta,
        rho,
        m,
    })
}
