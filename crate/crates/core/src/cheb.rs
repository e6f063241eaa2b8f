//! Chebyshev-polynomial graph convolution.
//!
//! The filter of order `K` acts through the recursion
//! `T_0 H = H`, `T_1 H = L~ H`, `T_k H = 2 L~ T_{k-1} H - T_{k-2} H`,
//! applied to `N x F` signal panels; the dense polynomial of the scaled
//! Laplacian is never materialized. With `K` terms the receptive field is
//! each node's (K-1)-hop neighborhood.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tape::{Graph, NodeId};
use crate::nn::{glorot_uniform, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Activation> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!(
                "unknown activation '{other}', expected relu|tanh|identity"
            ))),
        }
    }

    pub fn apply(&self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::Identity => x,
        }
    }
}

/// Chebyshev basis panels `[T_0(L~) H, ..., T_{K-1}(L~) H]` without a tape.
pub fn cheb_basis(lt: &Array2<f64>, h: &Array2<f64>, order: usize) -> Result<Vec<Array2<f64>>> {
    if order == 0 {
        return Err(Error::Config("Chebyshev order must be >= 1".into()));
    }
    if lt.nrows() != lt.ncols() {
        return Err(Error::Shape(format!(
            "scaled Laplacian is {}x{}, not square",
            lt.nrows(),
            lt.ncols()
        )));
    }
    if h.nrows() != lt.nrows() {
        return Err(Error::Shape(format!(
            "signal has {} rows, graph has {} nodes",
            h.nrows(),
            lt.nrows()
        )));
    }
    let mut panels = Vec::with_capacity(order);
    panels.push(h.clone());
    if order > 1 {
        panels.push(lt.dot(h));
    }
    for k in 2..order {
        let next = 2.0 * lt.dot(&panels[k - 1]) - &panels[k - 2];
        panels.push(next);
    }
    Ok(panels)
}

/// One spectral convolution layer with learnable per-order filter
/// matrices; weights are shared across all time steps of a view block.
#[derive(Debug, Clone)]
pub struct ChebLayer {
    pub order: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub activation: Activation,
    /// `order` filter matrices, each `(in_features, out_features)`.
    theta: Vec<ParamId>,
    /// Optional additive bias after the filter sum, default off.
    bias: Option<ParamId>,
}

impl ChebLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name_prefix: &str,
        order: usize,
        in_features: usize,
        out_features: usize,
        activation: Activation,
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("Chebyshev order must be >= 1".into()));
        }
        if in_features == 0 || out_features == 0 {
            return Err(Error::Config("feature dimensions must be >= 1".into()));
        }
        let theta = (0..order)
            .map(|k| {
                store.add(
                    format!("{name_prefix}.theta{k}"),
                    glorot_uniform(in_features, out_features, rng),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let bias = if with_bias {
            Some(store.add(
                format!("{name_prefix}.bias"),
                Array2::zeros((out_features, 1)),
            )?)
        } else {
            None
        };
        Ok(Self {
            order,
            in_features,
            out_features,
            activation,
            theta,
            bias,
        })
    }

    /// `f(sum_k T_k(L~) H theta_k)` on the tape; `h` is `(N, in_features)`,
    /// `lt` is the constant scaled Laplacian node.
    pub fn forward(&self, g: &mut Graph, lt: NodeId, h: NodeId) -> NodeId {
        let (n, f) = g.shape(h);
        assert_eq!(
            f, self.in_features,
            "layer expects {} input features, got {f}",
            self.in_features
        );
        assert_eq!(g.shape(lt), (n, n), "graph/signal node count mismatch");

        let mut t_prev2 = h;
        let mut sum = {
            let th = g.param(self.theta[0]);
            g.matmul(h, th)
        };
        let mut t_prev1 = None;
        if self.order > 1 {
            let t1 = g.matmul(lt, h);
            let th = g.param(self.theta[1]);
            let term = g.matmul(t1, th);
            sum = g.add(sum, term);
            t_prev1 = Some(t1);
        }
        for k in 2..self.order {
            let prev1 = t_prev1.expect("set for order > 1");
            let lt_t = g.matmul(lt, prev1);
            let twice = g.scale_shift(lt_t, 2.0, 0.0);
            let tk = g.sub(twice, t_prev2);
            let th = g.param(self.theta[k]);
            let term = g.matmul(tk, th);
            sum = g.add(sum, term);
            t_prev2 = prev1;
            t_prev1 = Some(tk);
        }
        if let Some(bias) = self.bias {
            // bias is (out_features, 1); broadcast across nodes by adding
            // to the transposed panel
            let bt = g.param(bias);
            let st = g.transpose(sum);
            let with_bias = g.add_col_vec(st, bt);
            sum = g.transpose(with_bias);
        }
        self.activation.apply(g, sum)
    }

    /// Plain evaluation without a tape, for callers outside training.
    pub fn forward_plain(&self, store: &ParamStore, lt: &Array2<f64>, h: &Array2<f64>) -> Result<Array2<f64>> {
        let panels = cheb_basis(lt, h, self.order)?;
        if h.ncols() != self.in_features {
            return Err(Error::Shape(format!(
                "layer expects {} input features, got {}",
                self.in_features,
                h.ncols()
            )));
        }
        let mut sum: Array2<f64> = Array2::zeros((h.nrows(), self.out_features));
        for (panel, theta) in panels.iter().zip(&self.theta) {
            sum += &panel.dot(store.value(*theta));
        }
        if let Some(bias) = self.bias {
            let b = store.value(bias);
            for mut row in sum.rows_mut() {
                row += &b.column(0);
            }
        }
        Ok(match self.activation {
            Activation::Relu => sum.mapv(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::Tanh => sum.mapv(f64::tanh),
            Activation::Identity => sum,
        })
    }

    pub fn theta_ids(&self) -> &[ParamId] {
        &self.theta
    }
}
