use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;

use super::state::NetworkState;
use crate::error::{bail_validation, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 penalty: `weight_decay * θ` is added to the gradient
    /// before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub config: AdamConfig,
}

impl OptimizerState {
    pub fn new(param_count: usize, config: AdamConfig) -> Self {
        Self {
            step: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            config,
        }
    }

    /// One bias-corrected Adam update of `net`'s parameters.
    pub fn step(&mut self, net: &mut NetworkState, grad: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        if grad.len() != n || net.params().len() != n {
            bail_validation!(
                "optimizer sized for {n} parameters, got gradient {} and network {}",
                grad.len(),
                net.params().len()
            );
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient entry".into()));
        }
        let c = self.config;
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let params = net.params_mut();
        for i in 0..n {
            let g = grad[i] + c.weight_decay * params[i];
            self.first_moment[i] = c.beta1 * self.first_moment[i] + (1.0 - c.beta1) * g;
            self.second_moment[i] = c.beta2 * self.second_moment[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            params[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Layer, NetworkSpec};

    fn net() -> NetworkState {
        let spec = NetworkSpec {
            input: [1, 3, 3],
            layers: alloc::vec![
                Layer::Conv2d { in_channels: 1, out_channels: 2, kernel: 3, stride: 1, padding: 0 },
                Layer::GlobalAvgPool,
                Layer::Dense { inputs: 2, outputs: 2 },
            ],
            classes: 2,
        };
        NetworkState::build(spec, 9).unwrap()
    }

    #[test]
    fn zero_gradient_without_decay_leaves_params() {
        let mut n = net();
        let before = n.params().to_vec();
        let cfg = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
        let mut opt = OptimizerState::new(before.len(), cfg);
        opt.step(&mut n, &vec![0.0; before.len()]).unwrap();
        assert_eq!(n.params(), before.as_slice());
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut n = net();
        let before = n.params().to_vec();
        let cfg = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
        let grad: Vec<f64> = (0..before.len()).map(|i| (i as f64 - 10.0) * 0.37 + 0.01).collect();
        let mut opt = OptimizerState::new(before.len(), cfg);
        opt.step(&mut n, &grad).unwrap();
        for ((a, b), g) in n.params().iter().zip(&before).zip(&grad) {
            let delta = a - b;
            assert_eq!(delta.signum(), -g.signum());
            // |Δ| = lr·|g|/(|g|+ε)
            let bound_lo = cfg.lr * g.abs() / (g.abs() + cfg.eps) * (1.0 - 1e-12);
            assert!(delta.abs() <= cfg.lr * (1.0 + 1e-12) && delta.abs() >= bound_lo);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut n = net();
        let mut opt = OptimizerState::new(n.params().len(), AdamConfig::default());
        let mut g = vec![0.0; n.params().len()];
        g[3] = f64::NAN;
        assert!(matches!(opt.step(&mut n, &g), Err(Error::Numeric(_))));
    }

    #[test]
    fn identical_runs_give_identical_trajectories() {
        let run = || {
            let mut n = net();
            let mut opt = OptimizerState::new(n.params().len(), AdamConfig::default());
            for k in 0..5 {
                let g: Vec<f64> = (0..n.params().len()).map(|i| ((i * 7 + k) % 5) as f64 - 2.0).collect();
                opt.step(&mut n, &g).unwrap();
            }
            n.params().to_vec()
        };
        assert_eq!(run(), run());
    }
}
