//! The SVRG-ADMM engine and its three stage drivers.
//!
//! Every driver draws mini-batches uniformly without replacement from a
//! `ChaCha8Rng` seeded with `cfg.seed`; two runs with equal seeds, batch
//! sizes and warm starts therefore see identical index sequences. The
//! nonconvex driver's output selection uses a separate stream of the same
//! seed so it never perturbs the batch sequence.

mod updates;
mod warm;

pub use updates::{dual_init, u_update, vr_gradient, x_update_linearized, y_update, ExactStep, Snapshot};
pub use warm::{cold_start, opg_warmstart, OpgSchedule, WarmPoint};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::matspec::TransposePinv;
use crate::metrics::{Monitor, Stopwatch, TraceOptions, TraceRecord};
use crate::problems::ConstrainedProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateMode {
    /// Closed-form x-update with `G = I`.
    Exact,
    /// `G = γI − ηρAᵀA`.
    Linearized { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    StronglyConvex,
    GeneralConvex,
    Nonconvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    StageAverage,
    #[default]
    LastIterate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStart {
    #[default]
    None,
    Opg { iterations: usize, schedule: OpgSchedule },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalCadence {
    /// One trace record per inner iteration.
    Iteration,
    /// One trace record per stage, at the stage's reported point.
    #[default]
    Stage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eta: f64,
    pub rho: f64,
    pub update: UpdateMode,
    pub m: usize,
    pub batch_size: usize,
    pub stages: usize,
    pub variant: Variant,
    pub averaging: Averaging,
    pub seed: u64,
    pub warm_start: WarmStart,
    /// Replaces the default initial dual (0, or the dual initialization of
    /// the strongly convex driver).
    pub initial_dual: Option<DVector<f64>>,
    pub cadence: EvalCadence,
}

impl SolverConfig {
    pub fn new(eta: f64, rho: f64, update: UpdateMode, m: usize, batch_size: usize, stages: usize, variant: Variant) -> Self {
        Self {
            eta,
            rho,
            update,
            m,
            batch_size,
            stages,
            variant,
            averaging: Averaging::default(),
            seed: 0,
            warm_start: WarmStart::default(),
            initial_dual: None,
            cadence: EvalCadence::default(),
        }
    }

    pub fn validate(&self, p: &ConstrainedProblem) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if let UpdateMode::Linearized { gamma } = self.update {
            if !(gamma >= 1.0 && gamma.is_finite()) {
                return bad(format!("gamma must be >= 1, got {gamma}"));
            }
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_size > p.n() {
            return bad(format!("batch size {} outside 1..={}", self.batch_size, p.n()));
        }
        if let Some(u) = &self.initial_dual {
            check_dim("initial dual", p.rows(), u.len())?;
        }
        Ok(())
    }

    /// `γ < γ_min`: `G ⪰ I` is no longer guaranteed and the run may diverge.
    pub fn is_practical_mode(&self, p: &ConstrainedProblem) -> bool {
        match self.update {
            UpdateMode::Linearized { gamma } => gamma < self.eta * self.rho * p.spectra().norm_ata + 1.0,
            UpdateMode::Exact => false,
        }
    }
}

/// Mutable iterate state of a run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub snapshot: Snapshot,
    pub stage: usize,
    pub iter_in_stage: usize,
    pub epochs: f64,
}

/// Borrowed view of one inner iterate, passed to observers.
#[derive(Debug, Clone, Copy)]
pub struct IterateView<'a> {
    pub stage: usize,
    pub iter: usize,
    pub epochs: f64,
    pub x: &'a DVector<f64>,
    pub y: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
}

/// The iterate picked by the nonconvex driver's uniform selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirPick {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub stage: usize,
    pub iter: usize,
    /// 0-based position among all `S·m` inner iterates.
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x_out: DVector<f64>,
    pub y_out: DVector<f64>,
    /// Dual at the end of the run (or of the selected iterate for the
    /// nonconvex driver).
    pub u_out: DVector<f64>,
    pub trace: Vec<TraceRecord>,
    pub reservoir: Option<ReservoirPick>,
    pub epochs: f64,
    pub wall_time: f64,
}

pub(crate) fn sample_batch(rng: &mut ChaCha8Rng, n: usize, b: usize, out: &mut Vec<usize>) {
    out.clear();
    if b >= n {
        out.extend(0..n);
    } else {
        out.extend(rand::seq::index::sample(rng, n, b).iter());
        out.sort_unstable();
    }
}

// Past a squared norm of f64::MAX no objective or residual is representable,
// so that counts as divergence too.
fn all_finite(v: &DVector<f64>) -> bool {
    v.norm_squared().is_finite()
}

enum XStep {
    Exact(ExactStep),
    Linearized(f64),
}

struct Engine<'a> {
    p: &'a ConstrainedProblem,
    cfg: &'a SolverConfig,
    step: XStep,
    rng: ChaCha8Rng,
    batch: Vec<usize>,
}

/// Running sums of the inner iterates of one stage.
struct StageSums {
    x: DVector<f64>,
    y: DVector<f64>,
    count: usize,
}

impl StageSums {
    fn new(d: usize, rows: usize) -> Self {
        Self {
            x: DVector::zeros(d),
            y: DVector::zeros(rows),
            count: 0,
        }
    }

    fn mean(&self) -> (DVector<f64>, DVector<f64>) {
        let k = self.count as f64;
        (&self.x / k, &self.y / k)
    }
}

impl<'a> Engine<'a> {
    fn new(p: &'a ConstrainedProblem, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate(p)?;
        let step = match cfg.update {
            UpdateMode::Exact => XStep::Exact(ExactStep::new(p.a(), cfg.eta, cfg.rho)?),
            UpdateMode::Linearized { gamma } => XStep::Linearized(gamma),
        };
        Ok(Self {
            p,
            cfg,
            step,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            batch: Vec::with_capacity(cfg.batch_size),
        })
    }

    fn warm_start(&mut self) -> Result<WarmPoint> {
        match self.cfg.warm_start {
            WarmStart::None => Ok(cold_start(self.p, self.cfg.rho)),
            WarmStart::Opg { iterations, schedule } => {
                opg_warmstart(self.p, self.cfg, iterations, schedule, &mut self.rng)
            }
        }
    }

    /// One inner iteration: sample, y-update, x-update, u-update.
    fn step(&mut self, state: &mut SolverState) {
        let (p, cfg) = (self.p, self.cfg);
        sample_batch(&mut self.rng, p.n(), cfg.batch_size, &mut self.batch);
        let grad = updates::vr_gradient_unchecked(p.f(), &state.x, &state.snapshot, &self.batch);
        state.y = y_update(p, &state.x, &state.u, cfg.rho);
        state.x = match &self.step {
            XStep::Exact(s) => s.apply(p, &state.x, &grad, &state.y, &state.u),
            XStep::Linearized(gamma) => x_update_linearized(p, &state.x, &grad, &state.y, &state.u, cfg.eta, cfg.rho, *gamma),
        };
        state.u = u_update(p, &state.u, &state.x, &state.y);
        state.epochs += cfg.batch_size as f64 / p.n() as f64;
    }

    /// Runs `m` inner iterations from the current snapshot.
    fn run_stage(
        &mut self,
        state: &mut SolverState,
        m: usize,
        sums: &mut StageSums,
        monitor: &mut Monitor<'_>,
        observer: &mut dyn FnMut(IterateView<'_>),
    ) -> Result<()> {
        for t in 1..=m {
            self.step(state);
            state.iter_in_stage = t;
            let what = if !all_finite(&state.x) {
                Some("x")
            } else if !all_finite(&state.y) {
                Some("y")
            } else if !all_finite(&state.u) {
                Some("u")
            } else {
                None
            };
            if let Some(what) = what {
                return Err(Error::Diverged {
                    stage: state.stage,
                    iter: t,
                    what,
                    trace: std::mem::take(&mut monitor.records),
                });
            }
            sums.x += &state.x;
            sums.y += &state.y;
            sums.count += 1;
            observer(IterateView {
                stage: state.stage,
                iter: t,
                epochs: state.epochs,
                x: &state.x,
                y: &state.y,
                u: &state.u,
            });
            if self.cfg.cadence == EvalCadence::Iteration {
                monitor.record(state.stage, t, state.epochs, &state.x, &state.y, &state.u);
            }
        }
        Ok(())
    }

    fn record_stage(&self, monitor: &mut Monitor<'_>, stage: usize, epochs: f64, x: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>) {
        if self.cfg.cadence == EvalCadence::Stage {
            monitor.record(stage, self.cfg.m, epochs, x, y, u);
        }
    }

    fn stage_output(&self, state: &SolverState, sums: &StageSums) -> (DVector<f64>, DVector<f64>) {
        match self.cfg.averaging {
            Averaging::StageAverage => sums.mean(),
            Averaging::LastIterate => (state.x.clone(), state.y.clone()),
        }
    }
}

fn check_finite_output(stage: usize, v: &DVector<f64>, monitor: &mut Monitor<'_>) -> Result<()> {
    if all_finite(v) {
        Ok(())
    } else {
        Err(Error::Diverged {
            stage,
            iter: 0,
            what: "stage output",
            trace: std::mem::take(&mut monitor.records),
        })
    }
}

/// Dispatches on `cfg.variant`.
pub fn solve(p: &ConstrainedProblem, cfg: &SolverConfig, options: &TraceOptions) -> Result<RunResult> {
    solve_observed(p, cfg, options, &mut |_| {})
}

/// Like [`solve`], calling `observer` after every inner iteration.
pub fn solve_observed(
    p: &ConstrainedProblem,
    cfg: &SolverConfig,
    options: &TraceOptions,
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<RunResult> {
    match cfg.variant {
        Variant::StronglyConvex => strongly_convex(p, cfg, options, observer),
        Variant::GeneralConvex => continuing(p, cfg, options, observer, false),
        Variant::Nonconvex => continuing(p, cfg, options, observer, true),
    }
}

fn expect_variant(cfg: &SolverConfig, v: Variant) -> Result<()> {
    if cfg.variant != v {
        return Err(Error::Config(format!("config variant is {:?}, expected {v:?}", cfg.variant)));
    }
    Ok(())
}

/// Strongly convex driver: every stage restarts from the previous stage's
/// output with a freshly initialized dual.
pub fn solve_strongly_convex(p: &ConstrainedProblem, cfg: &SolverConfig, options: &TraceOptions) -> Result<RunResult> {
    expect_variant(cfg, Variant::StronglyConvex)?;
    solve(p, cfg, options)
}

/// General convex driver: stages continue from the last iterates and the
/// reported point is the mean of the stage outputs.
pub fn solve_general_convex(p: &ConstrainedProblem, cfg: &SolverConfig, options: &TraceOptions) -> Result<RunResult> {
    expect_variant(cfg, Variant::GeneralConvex)?;
    solve(p, cfg, options)
}

/// Nonconvex driver: snapshots at the last inner iterate; the output is one
/// inner iterate chosen uniformly at random.
pub fn solve_nonconvex(p: &ConstrainedProblem, cfg: &SolverConfig, options: &TraceOptions) -> Result<RunResult> {
    expect_variant(cfg, Variant::Nonconvex)?;
    solve(p, cfg, options)
}

fn strongly_convex(
    p: &ConstrainedProblem,
    cfg: &SolverConfig,
    options: &TraceOptions,
    observer: &mut dyn FnMut(IterateView<'_>),
) -> Result<RunResult> {
    if !(p.f().lambda_f() > 0.0) {
        return Err(Error::Config(
            "f is not known to be strongly convex (lambda_f = 0); use the general convex variant".into(),
        ));
    }
    let clock = Stopwatch::start();
    let mut engine = Engine::new(p, cfg)?;
    let pinv = TransposePinv::new(p.a())?;
    let mut monitor = Monitor::new(p, options, cfg.rho, clock);

    let start = engine.warm_start()?;
    let mut epochs = start.epochs;
    let mut x_tilde = start.x;
    let mut y_tilde = start.y;
    let mut grad = p.f().full_gradient(&x_tilde)?;
    epochs += 1.0;
    let mut u_tilde = match &cfg.initial_dual {
        Some(u) => u.clone(),
        None => dual_init(&pinv, &grad, cfg.rho)?,
    };
    monitor.record(0, 0, epochs, &x_tilde, &y_tilde, &u_tilde);

    let mut state = SolverState {
        x: x_tilde.clone(),
        y: y_tilde.clone(),
        u: u_tilde.clone(),
        snapshot: Snapshot { x: x_tilde.clone(), z: grad.clone() },
        stage: 0,
        iter_in_stage: 0,
        epochs,
    };
    for s in 1..=cfg.stages {
        state.snapshot = Snapshot { x: x_tilde.clone(), z: grad };
        state.x = x_tilde.clone();
        state.y = y_tilde.clone();
        state.u = u_tilde.clone();
        state.stage = s;
        state.iter_in_stage = 0;
        let mut sums = StageSums::new(p.d(), p.rows());
        engine.run_stage(&mut state, cfg.m, &mut sums, &mut monitor, observer)?;
        (x_tilde, y_tilde) = engine.stage_output(&state, &sums);
        check_finite_output(s, &x_tilde, &mut monitor)?;
        if s < cfg.stages {
            grad = p.f().full_gradient(&x_tilde)?;
            state.epochs += 1.0;
            u_tilde = dual_init(&pinv, &grad, cfg.rho)?;
        } else {
            grad = DVector::zeros(0);
            u_tilde = state.u.clone();
        }
        engine.record_stage(&mut monitor, s, state.epochs, &x_tilde, &y_tilde, &u_tilde);
    }
    Ok(RunResult {
        x_out: x_tilde,
        y_out: y_tilde,
        u_out: u_tilde,
        trace: monitor.records,
        reservoir: None,
        epochs: state.epochs,
        wall_time: clock.elapsed_s(),
    })
}

/// Shared body of the general convex and nonconvex drivers.
fn continuing(
    p: &ConstrainedProblem,
    cfg: &SolverConfig,
    options: &TraceOptions,
    observer: &mut dyn FnMut(IterateView<'_>),
    nonconvex: bool,
) -> Result<RunResult> {
    let clock = Stopwatch::start();
    let mut engine = Engine::new(p, cfg)?;
    let mut monitor = Monitor::new(p, options, cfg.rho, clock);

    let start = engine.warm_start()?;
    let u0 = cfg.initial_dual.clone().unwrap_or(start.u);
    let mut state = SolverState {
        snapshot: Snapshot { x: start.x.clone(), z: DVector::zeros(0) },
        x: start.x,
        y: start.y,
        u: u0,
        stage: 0,
        iter_in_stage: 0,
        epochs: start.epochs,
    };
    monitor.record(0, 0, state.epochs, &state.x, &state.y, &state.u);

    let mut x_tilde = state.x.clone();
    let mut sum_x = DVector::zeros(p.d());
    let mut sum_y = DVector::zeros(p.rows());
    let mut x_bar = state.x.clone();
    let mut y_bar = state.y.clone();

    let mut pick_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pick_rng.set_stream(1);
    let mut pick: Option<ReservoirPick> = None;
    let mut seen = 0usize;

    for s in 1..=cfg.stages {
        let z = p.f().full_gradient(&x_tilde)?;
        state.epochs += 1.0;
        state.snapshot = Snapshot { x: x_tilde.clone(), z };
        state.stage = s;
        state.iter_in_stage = 0;
        let mut sums = StageSums::new(p.d(), p.rows());
        if nonconvex {
            let mut select = |view: IterateView<'_>| {
                seen += 1;
                if pick_rng.random_range(0..seen) == 0 {
                    pick = Some(ReservoirPick {
                        x: view.x.clone(),
                        y: view.y.clone(),
                        u: view.u.clone(),
                        stage: view.stage,
                        iter: view.iter,
                        index: seen - 1,
                    });
                }
                observer(view);
            };
            engine.run_stage(&mut state, cfg.m, &mut sums, &mut monitor, &mut select)?;
            x_tilde = state.x.clone();
            engine.record_stage(&mut monitor, s, state.epochs, &state.x, &state.y, &state.u);
        } else {
            engine.run_stage(&mut state, cfg.m, &mut sums, &mut monitor, observer)?;
            let (xs, ys) = engine.stage_output(&state, &sums);
            check_finite_output(s, &xs, &mut monitor)?;
            sum_x += &xs;
            sum_y += &ys;
            x_bar = &sum_x / s as f64;
            y_bar = &sum_y / s as f64;
            x_tilde = xs;
            engine.record_stage(&mut monitor, s, state.epochs, &x_bar, &y_bar, &state.u);
        }
    }

    let (x_out, y_out, u_out) = match (&pick, nonconvex) {
        (Some(r), true) => (r.x.clone(), r.y.clone(), r.u.clone()),
        (None, true) => (state.x.clone(), state.y.clone(), state.u.clone()),
        _ => (x_bar, y_bar, state.u.clone()),
    };
    Ok(RunResult {
        x_out,
        y_out,
        u_out,
        trace: monitor.records,
        reservoir: pick,
        epochs: state.epochs,
        wall_time: clock.elapsed_s(),
    })
}
