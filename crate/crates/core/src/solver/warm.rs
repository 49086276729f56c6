//! OPG-ADMM warm start: stochastic linearized ADMM with plain mini-batch
//! gradients.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use super::updates::{u_update, x_update_linearized, y_update};
use super::{sample_batch, SolverConfig, UpdateMode};
use crate::error::{Error, Result};
use crate::problems::ConstrainedProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OpgSchedule {
    /// `η_t = η/√t`
    #[default]
    Decaying,
    Constant,
}

/// Iterate after a warm start, plus the gradient work it cost (in epochs).
#[derive(Debug, Clone, PartialEq)]
pub struct WarmPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub epochs: f64,
}

pub fn cold_start(p: &ConstrainedProblem, rho: f64) -> WarmPoint {
    let x = DVector::zeros(p.d());
    let u = DVector::zeros(p.rows());
    WarmPoint {
        y: y_update(p, &x, &u, rho),
        x,
        u,
        epochs: 0.0,
    }
}

/// Runs `k` OPG-ADMM iterations from the cold start, drawing mini-batches
/// from `rng`. The linearization uses `cfg`'s γ in linearized mode and
/// `γ_min(η_t)` in exact mode.
pub fn opg_warmstart(
    p: &ConstrainedProblem,
    cfg: &SolverConfig,
    k: usize,
    schedule: OpgSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<WarmPoint> {
    let mut w = cold_start(p, cfg.rho);
    let n = p.n();
    let b = cfg.batch_size;
    let norm_ata = p.spectra().norm_ata;
    let mut batch = Vec::with_capacity(b);
    for t in 1..=k {
        let eta_t = match schedule {
            OpgSchedule::Decaying => cfg.eta / (t as f64).sqrt(),
            OpgSchedule::Constant => cfg.eta,
        };
        let gamma = match cfg.update {
            UpdateMode::Linearized { gamma } => gamma,
            UpdateMode::Exact => eta_t * cfg.rho * norm_ata + 1.0,
        };
        sample_batch(rng, n, b, &mut batch);
        let grad = p.f().batch_gradient(&w.x, &batch);
        w.y = y_update(p, &w.x, &w.u, cfg.rho);
        w.x = x_update_linearized(p, &w.x, &grad, &w.y, &w.u, eta_t, cfg.rho, gamma);
        w.u = u_update(p, &w.u, &w.x, &w.y);
        w.epochs += b as f64 / n as f64;
        if !(w.x.iter().chain(w.u.iter()).all(|v| v.is_finite())) {
            return Err(Error::Diverged {
                stage: 0,
                iter: t,
                what: "warm-start iterate",
                trace: Vec::new(),
            });
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_tv, gen_tv_data};
    use crate::solver::Variant;
    use rand::SeedableRng;

    fn problem() -> ConstrainedProblem {
        build_tv(gen_tv_data(40, 6, 2).unwrap().samples, 0.05).unwrap()
    }

    fn cfg(b: usize) -> SolverConfig {
        SolverConfig::new(0.5, 1.0, UpdateMode::Linearized { gamma: 2.5 }, 10, b, 3, Variant::GeneralConvex)
    }

    #[test]
    fn zero_iterations_is_cold_start() {
        let p = problem();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = opg_warmstart(&p, &cfg(4), 0, OpgSchedule::Decaying, &mut rng).unwrap();
        assert_eq!(w, cold_start(&p, 1.0));
        assert_eq!(w.x, DVector::zeros(6));
        assert_eq!(w.u, DVector::zeros(6));
    }

    #[test]
    fn deterministic_under_seed() {
        let p = problem();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            opg_warmstart(&p, &cfg(4), 25, OpgSchedule::Decaying, &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3).x, run(4).x);
        assert!((run(3).epochs - 25.0 * 4.0 / 40.0).abs() < 1e-12);
    }

    #[test]
    fn constant_full_batch_equals_batch_admm() {
        let p = problem();
        let c = cfg(40);
        let k = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = opg_warmstart(&p, &c, k, OpgSchedule::Constant, &mut rng).unwrap();

        // batch linearized ADMM written out with dense matrices
        let a = p.a().as_dmatrix().clone();
        let z = nalgebra::DMatrix::from_fn(40, 6, |i, j| p.f().data().dense_row(i)[j]);
        let o = DVector::from_column_slice(p.f().data().labels());
        let lam = 0.05;
        let (eta, rho, gamma) = (0.5, 1.0, 2.5);
        let mut x = DVector::<f64>::zeros(6);
        let mut u = DVector::<f64>::zeros(6);
        let mut y = DVector::<f64>::zeros(6);
        for _ in 0..k {
            let v = &a * &x + &u;
            y = v.map(|t: f64| t.signum() * (t.abs() - lam / rho).max(0.0));
            let grad = z.tr_mul(&(&z * &x - &o)) / 40.0;
            let dir = grad + a.tr_mul(&(&a * &x - &y + &u)) * rho;
            x -= dir * (eta / gamma);
            u += &a * &x - &y;
        }
        assert!((&w.x - x).amax() < 1e-10);
        assert!((&w.y - y).amax() < 1e-10);
        assert!((&w.u - u).amax() < 1e-10);
    }
}
