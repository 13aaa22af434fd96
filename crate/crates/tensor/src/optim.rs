use std::collections::BTreeMap;

use crate::params::ParameterStore;
use crate::tensor::Tensor;
use crate::TensorError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay (AdamW); zero gives plain Adam.
    pub weight_decay: f64,
}

/// Adam / AdamW with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: ParameterStore,
    v: ParameterStore,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterStore) -> Self {
        Self {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// Restores saved moments; they must cover exactly the parameter names.
    pub fn from_state(
        config: AdamConfig,
        step: u64,
        m: ParameterStore,
        v: ParameterStore,
    ) -> Self {
        Self { config, step, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &ParameterStore {
        &self.m
    }

    pub fn second_moments(&self) -> &ParameterStore {
        &self.v
    }

    /// Applies one update with learning rate `lr`. Parameters without an
    /// entry in `grads` are left untouched.
    pub fn update(
        &mut self,
        params: &mut ParameterStore,
        grads: &BTreeMap<String, Tensor>,
        lr: f64,
    ) -> Result<(), TensorError> {
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (name, grad) in grads {
            let p = params
                .get_mut(name)
                .ok_or_else(|| TensorError::UnknownName(name.clone()))?;
            let m = self
                .m
                .get_mut(name)
                .ok_or_else(|| TensorError::UnknownName(name.clone()))?;
            if p.shape() != grad.shape() {
                return Err(TensorError::ShapeChange {
                    name: name.clone(),
                    old: p.shape().to_vec(),
                    new: grad.shape().to_vec(),
                });
            }
            for (mi, &g) in m.data_mut().iter_mut().zip(grad.data()) {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
            }
            let v = self.v.get_mut(name).expect("moment stores share names");
            for (vi, &g) in v.data_mut().iter_mut().zip(grad.data()) {
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
            }
            let m = self.m.get(name).expect("moment stores share names");
            let v = self.v.get(name).expect("moment stores share names");
            for ((pi, &mi), &vi) in p.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
                if weight_decay != 0.0 {
                    *pi -= lr * weight_decay * *pi;
                }
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_store(x: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("x", Tensor::new(vec![1], vec![x])).unwrap();
        s
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first Adam step is lr * sign(g).
        let mut p = quadratic_store(3.0);
        let mut opt = Adam::new(
            AdamConfig {
                beta1: 0.9,
                beta2: 0.98,
                eps: 1e-9,
                weight_decay: 0.0,
            },
            &p,
        );
        let grads = BTreeMap::from([("x".to_string(), Tensor::new(vec![1], vec![6.0]))]);
        opt.update(&mut p, &grads, 0.1).unwrap();
        assert!((p.get("x").unwrap().item() - 2.9).abs() < 1e-9);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = quadratic_store(3.0);
        let mut opt = Adam::new(
            AdamConfig {
                beta1: 0.8,
                beta2: 0.98,
                eps: 1e-9,
                weight_decay: 0.01,
            },
            &p,
        );
        for _ in 0..2000 {
            let x = p.get("x").unwrap().item();
            let grads = BTreeMap::from([("x".to_string(), Tensor::new(vec![1], vec![2.0 * (x - 1.0)]))]);
            opt.update(&mut p, &grads, 0.01).unwrap();
        }
        assert!((p.get("x").unwrap().item() - 1.0).abs() < 0.05);
    }

    #[test]
    fn unknown_gradient_name_is_an_error() {
        let mut p = quadratic_store(0.0);
        let cfg = AdamConfig {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            weight_decay: 0.0,
        };
        let mut opt = Adam::new(cfg, &p);
        let grads = BTreeMap::from([("y".to_string(), Tensor::new(vec![1], vec![1.0]))]);
        assert!(matches!(
            opt.update(&mut p, &grads, 0.1),
            Err(TensorError::UnknownName(n)) if n == "y"
        ));
    }
}
