use serde::{Deserialize, Serialize};

use super::{GradientSet, Parameterized, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Algorithm {
    pub fn adam() -> Self {
        Algorithm::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer hyper-parameters and per-parameter accumulators for one owner.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub algorithm: Algorithm,
    pub lr: f64,
    pub step: u64,
    /// Adam first moments (empty for SGD).
    pub first_moment: Vec<Tensor>,
    /// Adam second moments (empty for SGD).
    pub second_moment: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new<P: Parameterized + ?Sized>(algorithm: Algorithm, lr: f64, owner: &P) -> Self {
        let moments = || match algorithm {
            Algorithm::Sgd => Vec::new(),
            Algorithm::Adam { .. } => owner.parameters().iter().map(|t| Tensor::zeros(t.shape())).collect(),
        };
        Self {
            algorithm,
            lr,
            step: 0,
            first_moment: moments(),
            second_moment: moments(),
        }
    }

    pub fn apply<P: Parameterized + ?Sized>(&mut self, owner: &mut P, grads: &GradientSet) -> Result<()> {
        grads.check_congruent(owner)?;
        if let Algorithm::Adam { .. } = self.algorithm {
            if self.first_moment.len() != grads.len()
                || self.first_moment.iter().zip(grads.tensors()).any(|(m, g)| m.shape() != g.shape())
            {
                return Err(Error::Shape("optimizer accumulators do not mirror the parameters".into()));
            }
        }
        self.step += 1;
        let lr = self.lr;
        match self.algorithm {
            Algorithm::Sgd => {
                for (p, g) in owner.parameters_mut().into_iter().zip(grads.tensors()) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= lr * gv;
                    }
                }
            }
            Algorithm::Adam { beta1, beta2, epsilon } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let params = owner.parameters_mut();
                for (((p, g), m), v) in params
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    for (((pv, &gv), mv), vv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut().iter_mut())
                        .zip(v.data_mut().iter_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{Activation, Mlp};

    fn small() -> Mlp {
        Mlp::init(3, &[2], Activation::Linear, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
    }

    #[test]
    fn sgd_zero_gradient_is_a_fixed_point() {
        let mut m = small();
        let before = m.clone();
        let mut opt = OptimizerState::new(Algorithm::Sgd, 0.1, &m);
        let zero = GradientSet::zeros_like(&m);
        opt.apply(&mut m, &zero).unwrap();
        assert_eq!(m.parameter_bytes(), before.parameter_bytes());
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn sgd_moves_by_lr_times_gradient() {
        let mut m = small();
        let before = m.clone();
        let g = GradientSet::new(m.parameters().iter().map(|t| Tensor::filled(t.shape(), 0.5)).collect());
        OptimizerState::new(Algorithm::Sgd, 0.1, &m).apply(&mut m, &g).unwrap();
        for (a, b) in m.parameters().iter().zip(before.parameters()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x, y - 0.1 * 0.5);
            }
        }
    }

    #[test]
    fn adam_matches_scalar_oracle_over_three_steps() {
        // scalar reference written out longhand
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 1e-3f64);
        let grads = [0.3, -1.2, 0.05];
        let mut m = small();
        let start = m.parameters()[0].data()[0];
        let mut opt = OptimizerState::new(Algorithm::adam(), lr, &m);
        let (mut p, mut mm, mut vv) = (start, 0.0, 0.0);
        for (t, &g) in grads.iter().enumerate() {
            let mut gs = GradientSet::zeros_like(&m);
            gs.tensors_mut()[0].data_mut()[0] = g;
            opt.apply(&mut m, &gs).unwrap();
            mm = b1 * mm + (1.0 - b1) * g;
            vv = b2 * vv + (1.0 - b2) * g * g;
            let mh = mm / (1.0 - b1.powi(t as i32 + 1));
            let vh = vv / (1.0 - b2.powi(t as i32 + 1));
            p -= lr * mh / (vh.sqrt() + eps);
            assert!((m.parameters()[0].data()[0] - p).abs() < 1e-15);
        }
        // first Adam step moves by ≈ lr regardless of gradient magnitude
        let mut m2 = small();
        let s2 = m2.parameters()[0].data()[0];
        let mut gs = GradientSet::zeros_like(&m2);
        gs.tensors_mut()[0].data_mut()[0] = 37.0;
        OptimizerState::new(Algorithm::adam(), lr, &m2).apply(&mut m2, &gs).unwrap();
        assert!(((s2 - m2.parameters()[0].data()[0]) - lr).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut m = small();
        let mut opt = OptimizerState::new(Algorithm::adam(), 1e-3, &m);
        let bad = GradientSet::new(vec![Tensor::zeros(&[1])]);
        assert!(matches!(opt.apply(&mut m, &bad), Err(Error::Shape(_))));
        assert_eq!(opt.step, 0);
    }
}
