//! Browser demo for `svrg-admm`.
//!
//! Three operations on synthetic total-variation regression, each returning
//! a JSON string for `www/index.html` to plot:
//!
//! * [`kappa_curve`]: the contraction factor `κ` against `ρ`, with `ρ*` marked.
//! * [`tv_run`]: one strongly convex SVRG-ADMM run at `ρ = factor · ρ*`.
//! * [`m_star_curve`]: advised inner iterations `m*` against batch size.
//!
//! The plain functions are what the tests call; the `#[wasm_bindgen]`
//! wrappers only convert errors.

use serde_json::{json, Value};
use svrg_admm::advisor::{eta_m_star, kappa, rho_star, ProblemConditioning, Regime};
use svrg_admm::metrics::TraceOptions;
use svrg_admm::problems::{build_tv, gen_tv_data};
use svrg_admm::solver::{solve, OpgSchedule, WarmStart};
use svrg_admm::{ConstrainedProblem, SolverConfig, UpdateMode, Variant};
use wasm_bindgen::prelude::*;

type DemoResult<T> = Result<T, String>;

fn tv_problem(n: usize, d: usize, seed: u64, lambda: f64) -> DemoResult<(ConstrainedProblem, Vec<f64>)> {
    if n < d {
        return Err(format!("need n >= d for a strongly convex TV problem (n = {n}, d = {d})"));
    }
    let data = gen_tv_data(n, d, seed).map_err(|e| e.to_string())?;
    let truth = data.truth.iter().copied().collect();
    let p = build_tv(data.samples, lambda).map_err(|e| e.to_string())?;
    Ok((p, truth))
}

/// `κ(ρ)` on a log grid spanning `ρ*/100 .. 100ρ*`, at the `(η*, m*)` the
/// advisor picks for `κ̃` with `b = 1` and the exact x-update.
pub fn kappa_curve(n: usize, d: usize, seed: u64, kappa_target: f64, points: usize) -> DemoResult<Value> {
    let (p, _) = tv_problem(n, d, seed, 0.1)?;
    let c = ProblemConditioning::from_problem(&p);
    let rs = rho_star(&c).map_err(|e| e.to_string())?;
    let adv = eta_m_star(&c, kappa_target, 1).map_err(|e| e.to_string())?;
    let (eta, m) = (adv.eta_star, adv.m_star.ceil());
    let kap = |rho: f64| kappa(&c, eta, rho, 1, m, 1.0 + eta * rho * c.sigma_max);
    let points = points.max(2);
    let mut curve = Vec::with_capacity(points);
    for i in 0..points {
        let rho = rs * 10f64.powf(-2.0 + 4.0 * i as f64 / (points - 1) as f64);
        let k = kap(rho).map_err(|e| e.to_string())?;
        curve.push(json!({ "rho": rho, "kappa": k }));
    }
    Ok(json!({
        "rho_star": rs,
        "kappa_star": kap(rs).map_err(|e| e.to_string())?,
        "eta": eta,
        "m": m,
        "curve": curve,
    }))
}

/// Strongly convex SVRG-ADMM on TV regression with `η = 1/L_f`,
/// `b = min(100, n)`, `m = ⌈2n/b⌉`, an OPG warm start of `n/b` iterations
/// and as many stages as fit in `epochs`.
pub fn tv_run(n: usize, d: usize, seed: u64, lambda: f64, rho_factor: f64, epochs: f64) -> DemoResult<Value> {
    let (p, truth) = tv_problem(n, d, seed, lambda)?;
    let c = ProblemConditioning::from_problem(&p);
    let rho = rho_factor * rho_star(&c).map_err(|e| e.to_string())?;
    let b = n.min(100);
    let m = (2 * n).div_ceil(b);
    let per_stage = 1.0 + (m * b) as f64 / n as f64;
    let stages = ((epochs - 1.0) / per_stage).floor().max(1.0) as usize;
    let mut cfg = SolverConfig::new(1.0 / c.l_f, rho, UpdateMode::Exact, m, b, stages, Variant::StronglyConvex);
    cfg.seed = seed;
    cfg.warm_start = WarmStart::Opg {
        iterations: n / b,
        schedule: OpgSchedule::Decaying,
    };
    let res = solve(&p, &cfg, &TraceOptions::default()).map_err(|e| e.to_string())?;
    let trace: Vec<Value> = res
        .trace
        .iter()
        .map(|r| json!({ "stage": r.stage, "epochs": r.epochs, "objective": r.objective, "feasibility": r.feasibility }))
        .collect();
    Ok(json!({
        "rho": rho,
        "stages": stages,
        "trace": trace,
        "x": res.x_out.iter().copied().collect::<Vec<f64>>(),
        "truth": truth,
    }))
}

/// `(η*, m*)` for every power-of-two batch size up to `n` (and `n` itself).
pub fn m_star_curve(n: usize, d: usize, seed: u64, kappa_target: f64) -> DemoResult<Value> {
    let (p, _) = tv_problem(n, d, seed, 0.1)?;
    let c = ProblemConditioning::from_problem(&p);
    let mut sizes: Vec<usize> = std::iter::successors(Some(1usize), |b| Some(b * 2)).take_while(|&b| b < n).collect();
    sizes.push(n);
    let mut rows = Vec::with_capacity(sizes.len());
    let mut b_star = 0.0;
    for b in sizes {
        let adv = eta_m_star(&c, kappa_target, b).map_err(|e| e.to_string())?;
        b_star = adv.b_star;
        let m = adv.m_star.ceil();
        rows.push(json!({
            "b": b,
            "eta_star": adv.eta_star,
            "m_star": adv.m_star,
            "regime": match adv.regime { Regime::SmallBatch => "small_batch", Regime::LargeBatch => "large_batch" },
            "epochs_per_stage": 1.0 + m * b as f64 / n as f64,
        }));
    }
    Ok(json!({ "b_star": b_star, "rows": rows }))
}

fn js(r: DemoResult<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = kappaCurve)]
pub fn kappa_curve_js(n: usize, d: usize, seed: u64, kappa_target: f64, points: usize) -> Result<String, JsError> {
    js(kappa_curve(n, d, seed, kappa_target, points))
}

#[wasm_bindgen(js_name = tvRun)]
pub fn tv_run_js(n: usize, d: usize, seed: u64, lambda: f64, rho_factor: f64, epochs: f64) -> Result<String, JsError> {
    js(tv_run(n, d, seed, lambda, rho_factor, epochs))
}

#[wasm_bindgen(js_name = mStarCurve)]
pub fn m_star_curve_js(n: usize, d: usize, seed: u64, kappa_target: f64) -> Result<String, JsError> {
    js(m_star_curve(n, d, seed, kappa_target))
}
