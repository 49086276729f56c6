//! The six subcommands as library functions; `main` only parses arguments
//! and routes output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use svrg_admm::advisor::{advise, gamma_min, AdviceRequest, ProblemConditioning, Regime};
use svrg_admm::metrics::{reference_solve, write_trace_csv, TraceRecord};
use svrg_admm::problems::{gen_tv_data, write_libsvm, TvData};
use svrg_admm::solver::solve;
use svrg_admm::{LossKind, ReferenceSolution, RunResult, SmoothSum, Variant};

use crate::error::{CliError, CliResult};
use crate::reference_file;
use crate::spec::{default_rho, load, Loaded, RunSpec, UpdateKind};

/// Keys of the `advise` report, in output order.
pub const ADVICE_KEYS: &[&str] = &[
    "n",
    "d",
    "rows",
    "l_f",
    "lambda_f",
    "l_max",
    "sigma_max",
    "sigma_min",
    "batch_size",
    "kappa_target",
    "rho_star",
    "gamma_min",
    "eta",
    "rho",
    "m",
    "gamma",
    "kappa",
    "kappa_min",
    "eta_star",
    "m_star",
    "b_star",
    "regime",
    "stages_needed",
    "stages_needed_hp",
    "nc_feasible",
    "nc_lhs",
    "C",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "na".into())
}

/// Flat `key=value` advice for the spec's problem.
pub fn cmd_advise(spec: &RunSpec) -> CliResult<Vec<(&'static str, String)>> {
    let loaded = load(spec)?;
    let p = &loaded.problem;
    let c = ProblemConditioning::from_problem(p);
    if spec.variant == Some(Variant::StronglyConvex) && !(c.lambda_f > 0.0) {
        return Err(CliError::Config(
            "strongly convex advice needs lambda_f > 0: add l2 > 0, or use the squared loss with full-rank features".into(),
        ));
    }
    let b = spec.batch_size.unwrap_or(p.n().min(100));
    let mut req = AdviceRequest {
        kappa_target: spec.kappa_target,
        batch_size: b,
        eta: spec.eta,
        rho: spec.rho,
        m: spec.m,
        gamma: None,
        r0_over_epsilon: spec.r0_over_epsilon,
        delta_prob: spec.delta,
    };
    let mut advice = advise(p, &req)?;
    let gamma = match spec.update {
        UpdateKind::Exact => None,
        UpdateKind::Linearized => Some(match spec.gamma {
            Some(g) => g,
            None => gamma_min(advice.eta, advice.rho, p.spectra().norm_ata)?,
        }),
        UpdateKind::Practical => Some(spec.gamma.unwrap_or(1.0)),
    };
    if gamma.is_some() {
        req.gamma = gamma;
        req.eta = Some(advice.eta);
        req.rho = Some(advice.rho);
        req.m = Some(advice.m);
        advice = advise(p, &req)?;
    }
    let regime = advice.regime.map(|r| match r {
        Regime::SmallBatch => "small_batch".to_string(),
        Regime::LargeBatch => "large_batch".to_string(),
    });
    Ok(vec![
        ("n", p.n().to_string()),
        ("d", p.d().to_string()),
        ("rows", p.rows().to_string()),
        ("l_f", c.l_f.to_string()),
        ("lambda_f", c.lambda_f.to_string()),
        ("l_max", c.l_max.to_string()),
        ("sigma_max", c.sigma_max.to_string()),
        ("sigma_min", c.sigma_min.to_string()),
        ("batch_size", b.to_string()),
        ("kappa_target", spec.kappa_target.to_string()),
        ("rho_star", fmt_opt(advice.rho_star)),
        ("gamma_min", advice.gamma_min.to_string()),
        ("eta", advice.eta.to_string()),
        ("rho", advice.rho.to_string()),
        ("m", advice.m.to_string()),
        ("gamma", fmt_opt(gamma)),
        ("kappa", fmt_opt(advice.kappa)),
        ("kappa_min", fmt_opt(advice.kappa_min)),
        ("eta_star", fmt_opt(advice.eta_star)),
        ("m_star", fmt_opt(advice.m_star)),
        ("b_star", fmt_opt(advice.b_star)),
        ("regime", regime.unwrap_or_else(|| "na".into())),
        ("stages_needed", advice.stages_needed.map(|s| s.to_string()).unwrap_or_else(|| "na".into())),
        ("stages_needed_hp", advice.stages_needed_hp.map(|s| s.to_string()).unwrap_or_else(|| "na".into())),
        ("nc_feasible", advice.nc.feasible.to_string()),
        ("nc_lhs", advice.nc.lhs.to_string()),
        ("C", fmt_opt(advice.nc_constants.map(|k| k.c))),
    ])
}

pub fn write_report<W: Write>(report: &[(&'static str, String)], mut out: W) -> std::io::Result<()> {
    for (k, v) in report {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()
}

/// One solver run on an already loaded problem; `rho` overrides the spec.
pub fn run_loaded(spec: &RunSpec, loaded: &Loaded, rho: Option<f64>) -> CliResult<RunResult> {
    let cfg = spec.solver_config(&loaded.problem, rho)?;
    let options = loaded.trace_options(spec)?;
    Ok(solve(&loaded.problem, &cfg, &options)?)
}

pub fn cmd_run(spec: &RunSpec) -> CliResult<RunResult> {
    let loaded = load(spec)?;
    run_loaded(spec, &loaded, None)
}

/// Records to write for a finished or diverged run.
pub fn trace_of(outcome: &CliResult<RunResult>) -> Option<&[TraceRecord]> {
    match outcome {
        Ok(r) => Some(&r.trace),
        Err(CliError::Core(svrg_admm::Error::Diverged { trace, .. })) => Some(trace),
        Err(_) => None,
    }
}

pub fn write_trace_file(records: &[TraceRecord], path: &Path) -> CliResult<()> {
    let file = File::create(path)?;
    write_trace_csv(records, BufWriter::new(file))?;
    Ok(())
}

#[derive(Debug)]
pub struct SweepEntry {
    pub rho: f64,
    pub outcome: CliResult<RunResult>,
}

pub const SWEEP_HEADER: &str = "rho,final_objective,final_feasibility,epochs,status";

/// Penalty values for a sweep; `relative` multiplies each by `ρ*`.
pub fn sweep_rhos(loaded: &Loaded, values: &[f64], relative: bool) -> CliResult<Vec<f64>> {
    if values.is_empty() {
        return Err(CliError::Config("rho list is empty".into()));
    }
    let scale = if relative {
        default_rho(&loaded.problem)
            .ok_or_else(|| CliError::Config("relative rho needs rho*, which is undefined here (lambda_f = 0 or rank-deficient A)".into()))?
    } else {
        1.0
    };
    Ok(values.iter().map(|v| v * scale).collect())
}

/// Runs identical configurations that differ only in `ρ` (and `γ_min` when
/// the linearized update has no explicit `γ`). Runs execute concurrently;
/// a failing run does not stop the others.
pub fn cmd_rho_sweep(spec: &RunSpec, values: &[f64], relative: bool) -> CliResult<Vec<SweepEntry>> {
    let loaded = load(spec)?;
    let rhos = sweep_rhos(&loaded, values, relative)?;
    let loaded = &loaded;
    let entries = std::thread::scope(|scope| {
        let handles: Vec<_> = rhos
            .iter()
            .map(|&rho| scope.spawn(move || run_loaded(spec, loaded, Some(rho))))
            .collect();
        rhos.iter()
            .zip(handles)
            .map(|(&rho, h)| SweepEntry {
                rho,
                outcome: h.join().expect("sweep worker panicked"),
            })
            .collect()
    });
    Ok(entries)
}

pub fn write_sweep_summary<W: Write>(entries: &[SweepEntry], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for e in entries {
        match &e.outcome {
            Ok(r) => {
                let last = r.trace.last().expect("a run always records its initial point");
                writeln!(out, "{},{},{},{},ok", e.rho, last.objective, last.feasibility, last.epochs)?;
            }
            Err(err) => {
                let status = if err.exit_code() == 2 { "diverged" } else { "error" };
                writeln!(out, "{},,,,{status}", e.rho)?;
            }
        }
    }
    out.flush()
}

/// Trace path for the `i`-th sweep entry inside `dir`.
pub fn sweep_trace_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("rho_{i}.csv"))
}

/// High-accuracy reference at the spec's `ρ` (default `ρ*`, else 1).
/// On non-convergence nothing is left at `out`.
pub fn cmd_reference(spec: &RunSpec, tol: f64, max_iter: usize, out: &Path) -> CliResult<ReferenceSolution> {
    let loaded = load(spec)?;
    let p = &loaded.problem;
    if !p.f().kind().is_convex() {
        return Err(CliError::Config("reference solves need a convex loss".into()));
    }
    let rho = spec.rho.or_else(|| default_rho(p)).unwrap_or(1.0);
    let outcome = reference_solve(p, rho, tol, max_iter).map_err(CliError::from).and_then(|r| {
        if r.converged(tol) {
            Ok(r)
        } else {
            Err(CliError::Config(format!(
                "reference did not converge: quality {:e} > tol {tol:e} after {} iterations",
                r.quality, r.iterations
            )))
        }
    });
    let written = outcome.and_then(|r| reference_file::write(&r, out).map(|_| r));
    if written.is_err() && out.exists() {
        std::fs::remove_file(out)?;
    }
    written
}

/// Sidecar holding the ground-truth coefficients next to a generated file.
pub fn truth_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth");
    PathBuf::from(s)
}

/// Writes synthetic TV data as LIBSVM plus a `.truth` sidecar (one
/// coefficient per line).
pub fn cmd_gen_tv(n: usize, d: usize, seed: u64, out: &Path) -> CliResult<TvData> {
    let data = gen_tv_data(n, d, seed)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_libsvm(&data.samples, &mut w)?;
    w.flush()?;
    let mut t = BufWriter::new(File::create(truth_path(out))?);
    for v in data.truth.iter() {
        writeln!(t, "{v}")?;
    }
    t.flush()?;
    Ok(data)
}

pub fn read_truth(path: &Path) -> CliResult<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let values = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad truth value {l:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareModel {
    ConvexLogistic,
    NonconvexSigmoid,
}

impl CompareModel {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s.trim() {
            "convex_logistic" => Ok(Self::ConvexLogistic),
            "nonconvex_sigmoid" => Ok(Self::NonconvexSigmoid),
            v => Err(CliError::Config(format!("unknown model {v:?}: use convex_logistic or nonconvex_sigmoid"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ConvexLogistic => "convex_logistic",
            Self::NonconvexSigmoid => "nonconvex_sigmoid",
        }
    }

    /// The spec with this model's loss (and driver, for the sigmoid).
    pub fn apply(self, spec: &RunSpec) -> RunSpec {
        let mut s = spec.clone();
        match self {
            Self::ConvexLogistic => {
                s.loss = LossKind::Logistic;
                if s.variant == Some(Variant::Nonconvex) {
                    s.variant = None;
                }
            }
            Self::NonconvexSigmoid => {
                s.loss = LossKind::Sigmoid;
                s.variant = Some(Variant::Nonconvex);
            }
        }
        s
    }
}

#[derive(Debug)]
pub struct CompareEntry {
    pub model: CompareModel,
    pub result: RunResult,
    /// Misclassification rate of the reported iterate on the held-out split.
    pub test_error: Option<f64>,
}

/// Runs each model on the same samples, split and seed.
pub fn cmd_compare(spec: &RunSpec, models: &[CompareModel]) -> CliResult<Vec<CompareEntry>> {
    if models.is_empty() {
        return Err(CliError::Config("no models to compare".into()));
    }
    if spec.problem == crate::spec::ProblemKind::Tv {
        return Err(CliError::Config("compare needs a classification problem".into()));
    }
    let mut entries = Vec::with_capacity(models.len());
    for &model in models {
        let s = model.apply(spec);
        let loaded = load(&s)?;
        let result = run_loaded(&s, &loaded, None)?;
        let test_error = match &loaded.test {
            Some(t) => Some(SmoothSum::new(s.loss, t.clone(), 0.0)?.error_rate(&result.x_out)),
            None => None,
        };
        entries.push(CompareEntry {
            model,
            result,
            test_error,
        });
    }
    Ok(entries)
}

/// Trace rows of every model, prefixed with a `variant` column.
pub fn write_compare_csv<W: Write>(entries: &[CompareEntry], mut out: W) -> std::io::Result<()> {
    writeln!(out, "variant,{}", svrg_admm::metrics::TRACE_HEADER)?;
    for e in entries {
        for rec in &e.result.trace {
            writeln!(out, "{},{}", e.model.name(), rec.csv_row())?;
        }
    }
    out.flush()
}
