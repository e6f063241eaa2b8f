//! Gated recurrent unit over per-view sequences of spatial-plus-context
//! vectors.
//!
//! Update rule per step, all quantities column vectors:
//!
//! ```text
//! z = sigmoid(M_z p + O_z h + b_z)
//! r = sigmoid(M_r p + O_r h + b_r)
//! h~ = tanh(M_h p + r .* (O_h h) + b_h)
//! h' = (1 - z) .* h + z .* h~
//! ```
//!
//! Each view owns a disjoint parameter set.

use rand::Rng;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::tape::{Graph, NodeId};
use crate::nn::{glorot_uniform, ParamId, ParamStore};

#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    m_z: ParamId,
    m_r: ParamId,
    m_h: ParamId,
    o_z: ParamId,
    o_r: ParamId,
    o_h: ParamId,
    b_z: ParamId,
    b_r: ParamId,
    b_h: ParamId,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name_prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config("GRU dimensions must be >= 1".into()));
        }
        // input kernels are stored (hidden, input) so they left-multiply
        let input_kernel = |s: &mut ParamStore, g: &str, rng: &mut R| {
            s.add(
                format!("{name_prefix}.m_{g}"),
                glorot_uniform(hidden_dim, input_dim, rng),
            )
        };
        let m_z = input_kernel(store, "z", rng)?;
        let m_r = input_kernel(store, "r", rng)?;
        let m_h = input_kernel(store, "h", rng)?;
        let rec_kernel = |s: &mut ParamStore, g: &str, rng: &mut R| {
            s.add(
                format!("{name_prefix}.o_{g}"),
                glorot_uniform(hidden_dim, hidden_dim, rng),
            )
        };
        let o_z = rec_kernel(store, "z", rng)?;
        let o_r = rec_kernel(store, "r", rng)?;
        let o_h = rec_kernel(store, "h", rng)?;
        let bias = |s: &mut ParamStore, g: &str| {
            s.add(format!("{name_prefix}.b_{g}"), Array2::zeros((hidden_dim, 1)))
        };
        let b_z = bias(store, "z")?;
        let b_r = bias(store, "r")?;
        let b_h = bias(store, "h")?;
        Ok(Self {
            input_dim,
            hidden_dim,
            m_z,
            m_r,
            m_h,
            o_z,
            o_r,
            o_h,
            b_z,
            b_r,
            b_h,
        })
    }

    fn gate_preact(
        &self,
        g: &mut Graph,
        m: ParamId,
        o: ParamId,
        b: ParamId,
        p: NodeId,
        h: NodeId,
    ) -> NodeId {
        let mn = g.param(m);
        let on = g.param(o);
        let bn = g.param(b);
        let mp = g.matmul(mn, p);
        let oh = g.matmul(on, h);
        let s = g.add(mp, oh);
        g.add(s, bn)
    }

    /// One update step; `p` is `(input_dim, 1)`, `h_prev` is `(hidden_dim, 1)`.
    pub fn step(&self, g: &mut Graph, p: NodeId, h_prev: NodeId) -> NodeId {
        assert_eq!(
            g.shape(p),
            (self.input_dim, 1),
            "GRU input shape mismatch"
        );
        assert_eq!(
            g.shape(h_prev),
            (self.hidden_dim, 1),
            "GRU hidden shape mismatch"
        );
        let z_pre = self.gate_preact(g, self.m_z, self.o_z, self.b_z, p, h_prev);
        let z = g.sigmoid(z_pre);
        let r_pre = self.gate_preact(g, self.m_r, self.o_r, self.b_r, p, h_prev);
        let r = g.sigmoid(r_pre);

        let mh = g.param(self.m_h);
        let oh = g.param(self.o_h);
        let bh = g.param(self.b_h);
        let mp = g.matmul(mh, p);
        let ohh = g.matmul(oh, h_prev);
        let gated = g.hadamard(r, ohh);
        let pre = g.add(mp, gated);
        let pre = g.add(pre, bh);
        let h_cand = g.tanh(pre);

        let one_minus_z = g.scale_shift(z, -1.0, 1.0);
        let keep = g.hadamard(one_minus_z, h_prev);
        let update = g.hadamard(z, h_cand);
        g.add(keep, update)
    }

    /// Folds [`GruCell::step`] over the sequence from a zero hidden state
    /// and returns the final hidden state.
    pub fn unroll(&self, g: &mut Graph, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset("GRU unroll over empty sequence".into()));
        }
        let mut h = g.constant(Array2::zeros((self.hidden_dim, 1)));
        for &p in inputs {
            h = self.step(g, p, h);
        }
        Ok(h)
    }

    pub fn param_ids(&self) -> [ParamId; 9] {
        [
            self.m_z, self.m_r, self.m_h, self.o_z, self.o_r, self.o_h, self.b_z, self.b_r,
            self.b_h,
        ]
    }
}
