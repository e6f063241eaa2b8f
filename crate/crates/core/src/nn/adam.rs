//! Adam optimizer over a [`ParamStore`].

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter, in store order.
#[derive(Debug)]
pub struct AdamState {
    cfg: AdamConfig,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
    step_count: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let first = store
            .iter()
            .map(|p| Array2::zeros(p.value.raw_dim()))
            .collect();
        let second = store
            .iter()
            .map(|p| Array2::zeros(p.value.raw_dim()))
            .collect();
        Self {
            cfg,
            first_moment: first,
            second_moment: second,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam update with bias correction, consuming the accumulated
    /// gradients; gradients are zeroed afterwards.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);

        for (idx, id) in store.ids().enumerate().collect::<Vec<_>>() {
            let grad = store.grad(id).clone();
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            ndarray::Zip::from(&mut *m).and(&grad).for_each(|m, &g| {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            });
            ndarray::Zip::from(&mut *v).and(&grad).for_each(|v, &g| {
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            });
            let value = store.value_mut(id);
            ndarray::Zip::from(value)
                .and(&*m)
                .and(&*v)
                .for_each(|x, &m, &v| {
                    let m_hat = m / bc1;
                    let v_hat = v / bc2;
                    *x -= c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
                });
        }
        store.zero_grads();
    }
}
