//! First-order optimizers over flat parameter buffers. Both minimize a loss:
//! callers pass the gradient of the loss, not of the objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::InvalidConfig(format!("unknown optimizer {s:?} (expected sgd or adam)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                m: vec![0.0; num_params],
                v: vec![0.0; num_params],
                t: 0,
            },
        }
    }

    /// One descent step; fails without touching `params` if the gradient is not finite.
    pub fn step(&mut self, params: &mut Parameters, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient (norm {})",
                grads.l2_norm()
            )));
        }
        match self {
            Optimizer::Sgd => params.add_scaled(grads, -lr),
            Optimizer::Adam { beta1, beta2, eps, m, v, t } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                let g = grads.as_slice();
                for (i, p) in params.as_mut_slice().iter_mut().enumerate() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g[i] * g[i];
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                }
            }
        }
        if !params.all_finite() {
            return Err(Error::Divergence("parameters became non-finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn params() -> Parameters {
        init_params(&ModelConfig {
            vocab_size: 8,
            context_length: 4,
            num_layers: 1,
            num_heads: 1,
            embed_dim: 4,
            mlp_dim: 4,
            seed: 1,
        })
        .unwrap()
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.as_mut_slice()[3] = 2.0;
        Optimizer::new(OptimizerKind::Sgd, p.len()).step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p.as_slice()[3], before.as_slice()[3] - 1.0);
        assert_eq!(p.as_slice()[4], before.as_slice()[4]);
    }

    #[test]
    fn adam_first_step_has_unit_magnitude() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.as_mut_slice()[0] = 3.0;
        g.as_mut_slice()[1] = -1e-3;
        Optimizer::new(OptimizerKind::Adam, p.len()).step(&mut p, &g, 0.01).unwrap();
        assert!((before.as_slice()[0] - p.as_slice()[0] - 0.01).abs() < 1e-8);
        assert!((p.as_slice()[1] - before.as_slice()[1] - 0.01).abs() < 1e-6);
        assert_eq!(p.as_slice()[2], before.as_slice()[2]);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.as_mut_slice()[0] = f64::NAN;
        let err = Optimizer::new(OptimizerKind::Sgd, p.len()).step(&mut p, &g, 0.1);
        assert!(matches!(err, Err(Error::Divergence(_))));
        assert_eq!(p, before);
    }
}
