//! Minimal differentiable-computation substrate.
//!
//! Everything learnable lives in a [`ParamStore`] as named f64 matrices.
//! A forward pass records onto a [`tape::Graph`]; `backward` walks the
//! tape in reverse node order (deterministic by construction) and
//! accumulates gradients back into the store. [`adam::AdamState`] applies
//! updates, and [`gradcheck::grad_check`] compares analytic gradients to
//! central finite differences.

pub mod adam;
pub mod func;
pub mod gradcheck;
pub mod tape;

use ndarray::Array2;
use rand::Rng;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Handle to one parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// A named learnable matrix with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

/// Ordered collection of parameters. Insertion order is the canonical
/// order for checkpoints, Adam state, and gradient walks, so two stores
/// built by the same construction sequence are interchangeable.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::State(format!("duplicate parameter name '{name}'")));
        }
        let id = ParamId(self.params.len());
        let grad = Array2::zeros(value.raw_dim());
        self.params.push(Param { name: name.clone(), value, grad });
        self.by_name.insert(name, id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0].grad
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn accumulate_grads(&mut self, grads: &ParamGrads) {
        assert_eq!(grads.grads.len(), self.params.len());
        for (p, g) in self.params.iter_mut().zip(&grads.grads) {
            if let Some(g) = g {
                p.grad += g;
            }
        }
    }

    /// Euclidean norm over all gradient entries jointly.
    pub fn grad_global_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so the global norm does not exceed `max_norm`.
    pub fn clip_grads(&mut self, max_norm: f64) {
        let norm = self.grad_global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for p in &mut self.params {
                p.grad.mapv_inplace(|g| g * s);
            }
        }
    }

    pub fn snapshot(&self) -> Vec<Array2<f64>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Array2<f64>]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            p.value.assign(v);
        }
    }
}

/// Per-parameter gradient buffers produced by one backward pass.
/// Entries stay `None` for parameters the pass never touched.
#[derive(Debug)]
pub struct ParamGrads {
    grads: Vec<Option<Array2<f64>>>,
}

impl ParamGrads {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            grads: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads[id.0].as_ref()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Array2<f64>) {
        match &mut self.grads[id.0] {
            Some(acc) => *acc += g,
            slot => *slot = Some(g.clone()),
        }
    }
}

/// Uniform init on `(-limit, limit)` with `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

/// Uniform init on `(lo, hi)`, used for embedding tables.
pub fn uniform_init<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn store_names_unique() {
        let mut s = ParamStore::new();
        s.add("w", Array2::zeros((2, 2))).unwrap();
        assert!(s.add("w", Array2::zeros((1, 1))).is_err());
    }

    #[test]
    fn clip_shrinks_to_max_norm() {
        let mut s = ParamStore::new();
        let id = s.add("w", Array2::zeros((1, 2))).unwrap();
        s.params[id.0].grad = array![[3.0, 4.0]];
        assert!((s.grad_global_norm() - 5.0).abs() < 1e-12);
        s.clip_grads(1.0);
        assert!((s.grad_global_norm() - 1.0).abs() < 1e-12);
        // already within bound: untouched
        let before = s.grad(id).clone();
        s.clip_grads(10.0);
        assert_eq!(s.grad(id), &before);
    }

    #[test]
    fn snapshot_restore_round_trip() {
        let mut s = ParamStore::new();
        let id = s.add("w", array![[1.0, 2.0]]).unwrap();
        let snap = s.snapshot();
        s.value_mut(id)[[0, 0]] = 9.0;
        s.restore(&snap);
        assert_eq!(s.value(id), &array![[1.0, 2.0]]);
    }
}
