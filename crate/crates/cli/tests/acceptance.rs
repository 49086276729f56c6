//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process exits nonzero
//! when any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use svrg_admm::advisor::{
    beta, eta_m_star, g_norm, kappa, m_required, nc_condition_check, rho_star, ProblemConditioning,
};
use svrg_admm::metrics::{
    empirical_vr_variance, for_each_batch, j_metric, prox_grad_norm_sq, r_metric, reference_solve, TraceOptions,
    VarianceMode,
};
use svrg_admm::problems::{
    build_ggfl, build_tree_guided, gen_classification, graph_from_correlation, soft_threshold, tv_matrix,
    write_libsvm, SampleSet,
};
use svrg_admm::solver::{
    solve, solve_observed, vr_gradient, Averaging, IterateView, Snapshot,
};
use svrg_admm::{ConstrainedProblem, LossKind, SmoothSum, SolverConfig, UpdateMode, Variant};
use svrg_admm_cli::commands::{cmd_reference, cmd_rho_sweep};
use svrg_admm_cli::spec::{load, RunSpec, SpecPairs};
use tempfile::TempDir;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rv(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-scale..scale))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope and R² of `ys` against `xs`.
fn linfit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}

fn spec_of(text: &str) -> RunSpec {
    let mut pairs = SpecPairs::default();
    pairs.parse_text(text).unwrap();
    RunSpec::from_pairs(&pairs).unwrap()
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize, d: usize, binary: bool) -> SampleSet {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels = (0..n)
        .map(|_| {
            if binary {
                if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect();
    SampleSet::from_dense(&rows, labels).unwrap()
}

fn write_data(dir: &Path, name: &str, s: &SampleSet) -> String {
    let path = dir.join(name);
    write_libsvm(s, fs::File::create(&path).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

// 1. The variance-reduced gradient is unbiased over all mini-batches.
fn unbiasedness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, d) = (6, 4);
    let mut worst: f64 = 0.0;
    for (kind, binary) in [(LossKind::Logistic, true), (LossKind::Squared, false), (LossKind::Sigmoid, true)] {
        let f = SmoothSum::new(kind, random_samples(&mut rng, n, d, binary), 0.05).unwrap();
        for _ in 0..5 {
            let x = rv(&mut rng, d, 2.0);
            let xt = rv(&mut rng, d, 2.0);
            let snap = Snapshot {
                z: f.full_gradient(&xt).unwrap(),
                x: xt,
            };
            let full = f.full_gradient(&x).unwrap();
            for b in 1..=3 {
                let mut sum = DVector::zeros(d);
                let mut count = 0usize;
                for_each_batch(n, b, |batch| {
                    sum += vr_gradient(&f, &x, &snap, batch).unwrap();
                    count += 1;
                });
                worst = worst.max((sum / count as f64 - &full).amax());
            }
        }
    }
    verdict(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

// 2. Exhaustive variance stays under 4 L_max β(b) (J(x) − J* + J(x̃) − J*).
fn variance_bound() -> Verdict {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = write_data(dir.path(), "ridge.svm", &random_samples(&mut rng, 8, 3, false));
    let spec = spec_of(&format!(
        "data = {data}\nproblem = lasso\nloss = squared\nl2 = 0.1\nlambda = 0.05\ntest_split = 0\n"
    ));
    let out = dir.path().join("ref.txt");
    let reference = cmd_reference(&spec, 1e-12, 200_000, &out).unwrap();
    let p = load(&spec).unwrap().problem;
    let f = p.f();
    let j_star = j_metric(&p, &reference, &reference.x_star);
    let mut worst_ratio: f64 = 0.0;
    let mut full_batch_max: f64 = 0.0;
    let mut ok = true;
    for _ in 0..20 {
        let x = rv(&mut rng, 3, 3.0);
        let xt = rv(&mut rng, 3, 3.0);
        let gap = j_metric(&p, &reference, &x) - j_star + j_metric(&p, &reference, &xt) - j_star;
        for b in [1, 2, 4, 8] {
            let lhs = empirical_vr_variance(f, &x, &xt, b, VarianceMode::Exhaustive).unwrap();
            let rhs = 4.0 * f.l_max() * beta(b, 8).unwrap() * gap;
            if b == 8 {
                full_batch_max = full_batch_max.max(lhs.abs()).max(rhs.abs());
                ok &= lhs <= 1e-24 && rhs == 0.0;
            } else {
                worst_ratio = worst_ratio.max(lhs / rhs);
                ok &= lhs <= rhs;
            }
        }
    }
    verdict(
        ok,
        format!("max variance/bound {worst_ratio:.3}, b = n sides <= {full_batch_max:.1e}"),
    )
}

// 3. With b = n the iterates are those of linearized batch ADMM.
fn batch_equivalence() -> Verdict {
    let data = gen_classification(30, 5, 3).unwrap();
    let edges = graph_from_correlation(&data, 0.1).unwrap();
    let (lambda, mu, eta, rho) = (0.03, 0.02, 0.8, 0.6);
    let p = build_ggfl(data.clone(), &edges, LossKind::Logistic, lambda, mu).unwrap();
    let gamma = 1.0 + eta * rho * p.spectra().norm_ata;
    let mut cfg = SolverConfig::new(eta, rho, UpdateMode::Linearized { gamma }, 20, 30, 1, Variant::GeneralConvex);
    cfg.seed = 5;
    let mut seen: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = Vec::new();
    solve_observed(&p, &cfg, &TraceOptions::default(), &mut |v: IterateView| {
        seen.push((v.x.clone(), v.y.clone(), v.u.clone()))
    })
    .unwrap();

    // batch ADMM on the dense data, gradients written out by hand
    let n = data.n();
    let z = DMatrix::from_fn(n, 5, |i, j| data.dense_row(i)[j]);
    let o = DVector::from_row_slice(data.labels());
    let a = p.a().as_dmatrix().clone();
    let grad = |x: &DVector<f64>| {
        let t = &z * x;
        let w = DVector::from_fn(n, |i, _| -o[i] / (1.0 + (o[i] * t[i]).exp()) / n as f64);
        z.transpose() * w + x * mu
    };
    let shrink = |v: DVector<f64>| v.map(|e| e.signum() * (e.abs() - lambda / rho).max(0.0));
    let mut x = DVector::zeros(5);
    let mut u = DVector::zeros(a.nrows());
    let mut worst: f64 = 0.0;
    for (xs, ys, us) in &seen {
        let y = shrink(&a * &x + &u);
        x = &x - (grad(&x) + a.transpose() * (&a * &x - &y + &u) * rho) * (eta / gamma);
        u += &a * &x - &y;
        worst = worst.max((xs - &x).amax()).max((ys - &y).amax()).max((us - &u).amax());
    }
    verdict(seen.len() == 20 && worst <= 1e-10, format!("{} iterations, max deviation {worst:.2e}", seen.len()))
}

/// Ridge (μ = 0.1) with a graph-guided penalty on a spanning forest of the
/// correlation graph, so that `A` is square and invertible.
fn criterion4_problem() -> ConstrainedProblem {
    let data = gen_classification(1000, 50, 7).unwrap();
    let edges = graph_from_correlation(&data, 0.5).unwrap();
    build_tree_guided(data, &edges, LossKind::Squared, 0.01, 0.1).unwrap()
}

// 4. Linear convergence of the strongly convex driver at advised (η, ρ, m).
fn linear_convergence() -> Verdict {
    let p = criterion4_problem();
    let c = ProblemConditioning::from_problem(&p);
    let rho = rho_star(&c).unwrap();
    let b = 1;
    let adv = eta_m_star(&c, 0.8, b).unwrap();
    let m = adv.m_star.ceil() as usize;
    let k = kappa(&c, adv.eta_star, rho, b, m as f64, 1.0 + adv.eta_star * rho * c.sigma_max).unwrap();
    let reference = reference_solve(&p, rho, 2e-16, 20_000).unwrap();
    let opts = TraceOptions {
        reference: Some(reference),
        ..Default::default()
    };
    let mut ok = k <= 0.8;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_r2: f64 = 1.0;
    for seed in 0..5 {
        let mut cfg = SolverConfig::new(adv.eta_star, rho, UpdateMode::Exact, m, b, 20, Variant::StronglyConvex);
        cfg.seed = seed;
        cfg.averaging = Averaging::StageAverage;
        let trace = solve(&p, &cfg, &opts).unwrap().trace;
        let rs: Vec<f64> = trace.iter().map(|t| t.r.unwrap()).collect();
        let ratio = (rs[20] / rs[0]).powf(1.0 / 20.0);
        let s: Vec<f64> = (0..=20).map(|s| s as f64).collect();
        let logs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        let (slope, r2) = linfit(&s, &logs);
        ok &= ratio <= 0.8 * 1.5 && slope < 0.0 && r2 >= 0.95;
        worst_ratio = worst_ratio.max(ratio);
        worst_r2 = worst_r2.min(r2);
    }
    verdict(
        ok,
        format!("advised kappa {k:.3} (m = {m}), worst geometric ratio {worst_ratio:.3}, worst R^2 {worst_r2:.3}"),
    )
}

// 5. ρ* minimizes κ, and wins the desk-scale TV sweep.
fn rho_star_optimality() -> Verdict {
    let p = criterion4_problem();
    let c = ProblemConditioning::from_problem(&p);
    let rs = rho_star(&c).unwrap();
    let adv = eta_m_star(&c, 0.8, 1).unwrap();
    let eta = adv.eta_star;
    let m = adv.m_star.ceil();
    let kap = |rho: f64| kappa(&c, eta, rho, 1, m, 1.0 + eta * rho * c.sigma_max).unwrap();
    let k_star = kap(rs);
    let grid_ok = (0..50).all(|i| {
        let rho = rs * 10f64.powf(-2.0 + 4.0 * i as f64 / 49.0);
        k_star <= kap(rho) + 1e-12
    });

    let base = "synthetic = tv\nn = 10000\nd = 100\ndata_seed = 1\nproblem = tv\nlambda = 0.1\ntest_split = 0\n";
    let l_f = load(&spec_of(base)).unwrap().problem.f().l_f();
    let (n, b, m) = (10_000usize, 100usize, 200usize);
    // 10 epochs: the warm start costs 1, each stage 1 + m b / n
    let stages = (10.0 / (1.0 + (m * b) as f64 / n as f64)).floor() as usize;
    let factors = [0.1, 1.0, 10.0];
    let mut finals = vec![Vec::new(); 3];
    for seed in 0..5 {
        let spec = spec_of(&format!(
            "{base}variant = sc\nupdate = exact\neta = {}\nbatch_size = {b}\nm = {m}\nstages = {stages}\nseed = {seed}\n",
            1.0 / l_f
        ));
        for (k, e) in cmd_rho_sweep(&spec, &factors, true).unwrap().into_iter().enumerate() {
            finals[k].push(e.outcome.unwrap().trace.last().unwrap().objective);
        }
    }
    let med: Vec<f64> = finals.into_iter().map(median).collect();
    let sweep_ok = med[1] < med[0] && med[1] < med[2];
    verdict(
        grid_ok && sweep_ok,
        format!(
            "kappa grid {}, median objectives rho*/10 {:.6} rho* {:.6} 10rho* {:.6}",
            if grid_ok { "ok" } else { "violated" },
            med[0],
            med[1],
            med[2]
        ),
    )
}

// 6. O(1/s) rate of the general convex driver.
fn general_convex_rate() -> Verdict {
    let data = gen_classification(5000, 50, 7).unwrap();
    let edges = graph_from_correlation(&data, 0.5).unwrap();
    let p = build_ggfl(data, &edges, LossKind::Logistic, 1e-2, 0.0).unwrap();
    let rho = 1.0;
    let reference = reference_solve(&p, rho, 1e-12, 200_000).unwrap();
    let opts = TraceOptions {
        reference: Some(reference),
        ..Default::default()
    };
    let eta = 0.5 / p.f().l_f();
    let zeta = 1.0;
    let mut slopes = Vec::new();
    for seed in 0..5 {
        let mut cfg = SolverConfig::new(eta, rho, UpdateMode::Exact, 100, 100, 50, Variant::GeneralConvex);
        cfg.seed = seed;
        let trace = solve(&p, &cfg, &opts).unwrap().trace;
        let (xs, ys): (Vec<f64>, Vec<f64>) = trace
            .iter()
            .filter(|r| r.stage >= 2)
            .map(|r| ((r.stage as f64).ln(), (r.r.unwrap() + zeta * r.feasibility).ln()))
            .unzip();
        slopes.push(linfit(&xs, &ys).0);
    }
    let s = median(slopes);
    verdict((-1.3..=-0.7).contains(&s), format!("median log-log slope {s:.3}"))
}

// 7. T · min_t ‖∇̃L‖² stays bounded for the nonconvex driver.
fn nonconvex_rate() -> Verdict {
    let data = gen_classification(5000, 50, 7).unwrap();
    let p = ConstrainedProblem::generalized_lasso(
        SmoothSum::new(LossKind::Sigmoid, data, 0.0).unwrap(),
        tv_matrix(50).unwrap(),
        1e-2,
    )
    .unwrap();
    let c = ProblemConditioning::from_problem(&p);
    let (m, b) = (20usize, 50usize);
    let feasible = |eta: f64, rho: f64| nc_condition_check(&c, eta, rho, m, b, g_norm(UpdateMode::Exact, eta, rho, p.spectra())).feasible;
    // smallest feasible ρ over an η grid; feasibility is monotone in ρ
    let mut best: Option<(f64, f64)> = None;
    for i in 0..60 {
        let eta = 0.499 / c.l_f * 10f64.powf(-8.0 * i as f64 / 59.0);
        let (mut lo, mut hi) = ((4.0 * c.l_f / c.sigma_min).ln(), 1e8f64.ln() + (4.0 * c.l_f / c.sigma_min).ln());
        if !feasible(eta, hi.exp()) {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(eta, mid.exp()) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if best.is_none_or(|(_, r)| hi.exp() < r) {
            best = Some((eta, hi.exp()));
        }
    }
    let Some((eta, rho)) = best else {
        return verdict(false, "no feasible (eta, rho) found");
    };
    let ts = [100usize, 200, 400, 800];
    let mut at_t = vec![Vec::new(); ts.len()];
    let mut monotone = true;
    for seed in 0..5 {
        let mut cfg = SolverConfig::new(eta, rho, UpdateMode::Exact, m, b, 800 / m, Variant::Nonconvex);
        cfg.seed = seed;
        let mut running = f64::INFINITY;
        let mut mins = Vec::with_capacity(800);
        solve_observed(&p, &cfg, &TraceOptions::default(), &mut |v: IterateView| {
            let stat = prox_grad_norm_sq(&p, v.x, v.y, v.u, rho).unwrap();
            let next = running.min(stat);
            monotone &= next <= running;
            running = next;
            mins.push(running);
        })
        .unwrap();
        for (k, &t) in ts.iter().enumerate() {
            at_t[k].push(t as f64 * mins[t - 1]);
        }
    }
    let med: Vec<f64> = at_t.into_iter().map(median).collect();
    let hi = med.iter().copied().fold(0.0, f64::max);
    let lo = med.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = hi / lo;
    verdict(
        monotone && ratio <= 5.0,
        format!("eta {eta:.3e}, rho {rho:.3e}, T*min-stat max/min {ratio:.2}"),
    )
}

// 8. The nonconvex output index is uniform over all S·m iterates.
fn reservoir_uniformity() -> Verdict {
    let data = gen_classification(20, 3, 4).unwrap();
    let p = ConstrainedProblem::generalized_lasso(
        SmoothSum::new(LossKind::Sigmoid, data, 0.0).unwrap(),
        tv_matrix(3).unwrap(),
        0.01,
    )
    .unwrap();
    let (stages, m) = (3usize, 4usize);
    let cells = stages * m;
    let mut counts = vec![0usize; cells];
    let reps = 10_000;
    for seed in 0..reps {
        let mut cfg = SolverConfig::new(0.1, 5.0, UpdateMode::Exact, m, 2, stages, Variant::Nonconvex);
        cfg.seed = seed as u64;
        let pick = solve(&p, &cfg, &TraceOptions::default()).unwrap().reservoir.unwrap();
        counts[pick.index] += 1;
    }
    let expected = reps as f64 / cells as f64;
    let chi2: f64 = counts.iter().map(|&k| (k as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(0.99);
    verdict(chi2 <= critical, format!("chi-square {chi2:.2} vs critical {critical:.2} ({} cells)", cells))
}

// 9. References are stationary and R is nonnegative.
fn stationarity_consistency() -> Verdict {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let instances = [
        "problem = lasso\nloss = squared\nlambda = 0.05\nl2 = 0.01\n",
        "problem = lasso\nloss = logistic\nlambda = 0.02\nl2 = 0.01\n",
        "problem = ggfl\nloss = logistic\nlambda = 0.01\nl2 = 0.05\ngraph_threshold = 0.05\n",
        "problem = tv\nlambda = 0.05\n",
        "problem = tree\nloss = squared\nlambda = 0.1\nl2 = 0.02\ngraph_threshold = 0.05\n",
    ];
    let mut worst_stat: f64 = 0.0;
    let mut min_r = f64::INFINITY;
    for (i, extra) in instances.iter().enumerate() {
        let binary = extra.contains("logistic");
        let d = 4 + i;
        let data = write_data(dir.path(), &format!("i{i}.svm"), &random_samples(&mut rng, 40, d, binary));
        let spec = spec_of(&format!("data = {data}\ntest_split = 0\n{extra}"));
        let reference = cmd_reference(&spec, 1e-11, 200_000, &dir.path().join(format!("r{i}.txt"))).unwrap();
        let p = load(&spec).unwrap().problem;
        let stat =
            prox_grad_norm_sq(&p, &reference.x_star, &reference.y_star, &reference.u_star, reference.rho).unwrap();
        worst_stat = worst_stat.max(stat);
        for _ in 0..1000 {
            let x = rv(&mut rng, p.d(), 2.0);
            let y = soft_threshold(&rv(&mut rng, p.rows(), 2.0), 0.5).unwrap();
            min_r = min_r.min(r_metric(&p, &reference, &x, &y));
        }
    }
    verdict(
        worst_stat <= 1e-10 && min_r >= 0.0,
        format!("max prox-grad^2 at references {worst_stat:.2e}, min R {min_r:.3e}"),
    )
}

// 10. (η*, m*) reaches κ̃, and no η on a fine grid needs fewer inner iterations.
fn advisor_self_consistency() -> Verdict {
    let p = criterion4_problem();
    let c = ProblemConditioning::from_problem(&p);
    let rs = rho_star(&c).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for kt in [0.5, 0.9] {
        for b in [1, 4, c.n] {
            let adv = eta_m_star(&c, kt, b).unwrap();
            let k = kappa(&c, adv.eta_star, rs, b, adv.m_star, 1.0 + adv.eta_star * rs * c.sigma_max).unwrap();
            ok &= k <= kt * (1.0 + 1e-9);
            let beta_b = beta(b, c.n).unwrap();
            let mut eta_max = 1.0 / c.l_f;
            if beta_b > 0.0 {
                eta_max = eta_max.min(0.999_999 / (4.0 * c.l_max * beta_b));
            }
            let mut best_grid = f64::INFINITY;
            for i in 1..=200 {
                let eta = eta_max * i as f64 / 200.0;
                if let Some(m) = m_required(&c, eta, b, kt).unwrap() {
                    best_grid = best_grid.min(m.max(1.0));
                }
            }
            ok &= best_grid >= adv.m_star * (1.0 - 1e-9);
            notes.push(format!("k~={kt} b={b}: kappa {k:.4} m* {:.1} grid {:.1}", adv.m_star, best_grid));
        }
    }
    verdict(ok, notes.join("; "))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict, Duration); 10] = [
        (1, "unbiased variance-reduced gradient", unbiasedness, Duration::from_secs(1)),
        (2, "variance bound", variance_bound, Duration::from_secs(5)),
        (3, "full-batch equals batch ADMM", batch_equivalence, Duration::from_secs(1)),
        (4, "linear convergence (strongly convex)", linear_convergence, Duration::from_secs(30)),
        (5, "rho* optimality", rho_star_optimality, Duration::from_secs(120)),
        (6, "general convex O(1/s) rate", general_convex_rate, Duration::from_secs(120)),
        (7, "nonconvex O(1/T) rate", nonconvex_rate, Duration::from_secs(120)),
        (8, "reservoir output uniformity", reservoir_uniformity, Duration::from_secs(10)),
        (9, "stationarity consistency", stationarity_consistency, Duration::from_secs(30)),
        (10, "advisor self-consistency", advisor_self_consistency, Duration::from_secs(5)),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took < budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name} ({:.2}s of {}s) {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
