use nalgebra::DVector;

use crate::error::{Error, Result};

/// Elementwise `sign(v)·max(|v| − τ, 0)`, the prox of `τ‖·‖₁`.
pub fn soft_threshold(v: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::Input(format!("soft threshold needs tau >= 0, got {tau}")));
    }
    Ok(v.map(|x| shrink(x, tau)))
}

#[inline]
pub(crate) fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `λ‖y‖₁`
    L1(f64),
    Zero,
}

impl Regularizer {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::Input(format!("l1 weight must be >= 0, got {weight}")));
        }
        Ok(if weight == 0.0 {
            Regularizer::Zero
        } else {
            Regularizer::L1(weight)
        })
    }

    pub fn weight(&self) -> f64 {
        match *self {
            Regularizer::L1(w) => w,
            Regularizer::Zero => 0.0,
        }
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        match *self {
            Regularizer::L1(w) => w * y.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Zero => 0.0,
        }
    }

    /// `argmin_y scale·g(y) + ½‖y − v‖²`
    pub fn prox(&self, v: &DVector<f64>, scale: f64) -> DVector<f64> {
        match *self {
            Regularizer::L1(w) => v.map(|x| shrink(x, w * scale)),
            Regularizer::Zero => v.clone(),
        }
    }

    /// Projects a candidate subgradient onto `∂g(y)`.
    pub fn project_subgradient(&self, y: &DVector<f64>, candidate: &DVector<f64>) -> DVector<f64> {
        match *self {
            Regularizer::L1(w) => DVector::from_fn(y.len(), |j, _| {
                if y[j] != 0.0 {
                    w * y[j].signum()
                } else {
                    candidate[j].clamp(-w, w)
                }
            }),
            Regularizer::Zero => DVector::zeros(y.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_cases() {
        let v = DVector::from_vec(vec![2.0, -0.3]);
        assert_eq!(soft_threshold(&v, 0.5).unwrap().as_slice(), &[1.5, 0.0]);
        assert!(soft_threshold(&v, -1.0).is_err());
        assert_eq!(soft_threshold(&v, 0.0).unwrap(), v);
    }

    #[test]
    fn beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = DVector::from_fn(8, |_, _| rng.random_range(-2.0..2.0));
        let tau = 0.7;
        let obj = |y: &DVector<f64>| tau * y.iter().map(|a| a.abs()).sum::<f64>() + 0.5 * (y - &v).norm_squared();
        let best = soft_threshold(&v, tau).unwrap();
        let fbest = obj(&best);
        for _ in 0..1000 {
            let p = &best + DVector::from_fn(8, |_, _| rng.random_range(-0.1..0.1));
            assert!(fbest <= obj(&p) + 1e-14);
        }
    }

    #[test]
    fn zero_weight_collapses() {
        assert_eq!(Regularizer::l1(0.0).unwrap(), Regularizer::Zero);
        assert!(Regularizer::l1(-1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nonexpansive(v in proptest::collection::vec(-5.0f64..5.0, 6), w in proptest::collection::vec(-5.0f64..5.0, 6), tau in 0.0f64..3.0) {
                let v = DVector::from_vec(v);
                let w = DVector::from_vec(w);
                let d = (soft_threshold(&v, tau).unwrap() - soft_threshold(&w, tau).unwrap()).norm();
                prop_assert!(d <= (v - w).norm() + 1e-12);
            }
        }
    }
}
