//! Context embedding and the context-aware attention head that fuses the
//! per-view predictions into one forecast per region.
//!
//! The head concatenates, per region, the per-view predicted values, the
//! embedded context of the target interval, and the region's TF-IDF
//! facility profile, then applies one affine map and a softmax to get
//! convex combination weights over the views.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tape::{Graph, NodeId};
use crate::nn::{glorot_uniform, uniform_init, ParamId, ParamStore};

/// City-wide weather state for one time interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Weather {
    Sunny,
    Cloudy,
    Rainy,
}

impl Weather {
    pub const COUNT: usize = 3;

    pub fn index(&self) -> usize {
        match self {
            Weather::Sunny => 0,
            Weather::Cloudy => 1,
            Weather::Rainy => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Weather::Sunny => "sunny",
            Weather::Cloudy => "cloudy",
            Weather::Rainy => "rainy",
        }
    }

    pub fn parse(s: &str) -> Result<Weather> {
        match s {
            "sunny" => Ok(Weather::Sunny),
            "cloudy" => Ok(Weather::Cloudy),
            "rainy" => Ok(Weather::Rainy),
            other => Err(Error::Config(format!(
                "unknown weather '{other}', expected sunny|cloudy|rainy"
            ))),
        }
    }
}

impl std::fmt::Display for Weather {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Categorical context shared by all regions for one time interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextRecord {
    hour: u8,
    pub weather: Weather,
    pub holiday: bool,
}

impl ContextRecord {
    pub fn new(hour: u8, weather: Weather, holiday: bool) -> Result<Self> {
        if hour >= 24 {
            return Err(Error::Bounds(format!("hour {hour} outside [0, 24)")));
        }
        Ok(Self {
            hour,
            weather,
            holiday,
        })
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }
}

/// Embedding dimensions for the three context categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingDims {
    pub hour: usize,
    pub weather: usize,
    pub holiday: usize,
}

impl Default for EmbeddingDims {
    fn default() -> Self {
        Self {
            hour: 8,
            weather: 4,
            holiday: 2,
        }
    }
}

impl EmbeddingDims {
    /// Total embedded context dimension m.
    pub fn total(&self) -> usize {
        self.hour + self.weather + self.holiday
    }
}

/// Learnable lookup tables for hour, weather and holiday categories.
/// One instance is shared by every view block and the attention head.
#[derive(Debug, Clone)]
pub struct ContextEmbedding {
    pub dims: EmbeddingDims,
    hour_table: ParamId,
    weather_table: ParamId,
    holiday_table: ParamId,
}

impl ContextEmbedding {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        dims: EmbeddingDims,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.hour == 0 || dims.weather == 0 || dims.holiday == 0 {
            return Err(Error::Config(
                "embedding dimensions must all be positive".into(),
            ));
        }
        let hour_table = store.add("context.hour", uniform_init(24, dims.hour, -0.05, 0.05, rng))?;
        let weather_table = store.add(
            "context.weather",
            uniform_init(Weather::COUNT, dims.weather, -0.05, 0.05, rng),
        )?;
        let holiday_table = store.add(
            "context.holiday",
            uniform_init(2, dims.holiday, -0.05, 0.05, rng),
        )?;
        Ok(Self {
            dims,
            hour_table,
            weather_table,
            holiday_table,
        })
    }

    /// Embeds one record as the concatenation (hour, weather, holiday)
    /// of table rows; an `(m, 1)` tape node.
    pub fn embed(&self, g: &mut Graph, ctx: &ContextRecord) -> NodeId {
        let ht = g.param(self.hour_table);
        let wt = g.param(self.weather_table);
        let dt = g.param(self.holiday_table);
        let h = g.embed_row(ht, ctx.hour() as usize);
        let w = g.embed_row(wt, ctx.weather.index());
        let d = g.embed_row(dt, usize::from(ctx.holiday));
        g.concat_rows(&[h, w, d])
    }
}

/// Per-region fusion weights over the three views for one target
/// interval. Columns are ordered (dist, poi, transport); views absent
/// from a variant keep weight zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub w: Array2<f64>,
}

impl AttentionWeights {
    pub fn node_count(&self) -> usize {
        self.w.nrows()
    }

    /// Checks every row is a point on the simplex: entries nonnegative
    /// and summing to 1 within `tol`.
    pub fn validate_simplex(&self, tol: f64) -> Result<()> {
        for (n, row) in self.w.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Invariant(format!(
                    "attention row {n} sums to {sum}, expected 1"
                )));
            }
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::Invariant(format!(
                    "attention row {n} has a negative weight"
                )));
            }
        }
        Ok(())
    }
}

/// The attention head: one affine map from the concatenated
/// (predictions, context, facility profile) vector to per-view logits,
/// then a column softmax.
#[derive(Debug, Clone)]
pub struct AttentionHead {
    /// Number of views being fused (2 or 3).
    pub n_views: usize,
    /// `(n_views, 3 + m + |C|)` weight, left-multiplying the stacked input.
    fc_weight: ParamId,
    /// `(n_views, 1)` bias.
    fc_bias: ParamId,
    /// `(|C|, N)` TF-IDF profiles, fixed (not learned).
    poi_profiles: Array2<f64>,
}

impl AttentionHead {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        n_views: usize,
        context_dim: usize,
        poi_profiles: Array2<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        if n_views < 2 {
            return Err(Error::Config(
                "attention fusion needs at least two views".into(),
            ));
        }
        let input_dim = n_views + context_dim + poi_profiles.nrows();
        let fc_weight = store.add(
            "attention.fc.weight",
            glorot_uniform(n_views, input_dim, rng),
        )?;
        let fc_bias = store.add("attention.fc.bias", Array2::zeros((n_views, 1)))?;
        Ok(Self {
            n_views,
            fc_weight,
            fc_bias,
            poi_profiles,
        })
    }

    /// Computes the weight matrix for all regions at once.
    ///
    /// `q_stack` is `(n_views, N)`: per-view predictions as rows.
    /// `e_next` is the `(m, 1)` embedded context of the target interval.
    /// Returns an `(n_views, N)` node whose columns lie on the simplex.
    pub fn weights(&self, g: &mut Graph, q_stack: NodeId, e_next: NodeId) -> NodeId {
        let n = g.shape(q_stack).1;
        let e_b = g.broadcast_cols(e_next, n);
        let poi = g.constant(self.poi_profiles.clone());
        let x = g.concat_rows(&[q_stack, e_b, poi]);
        let w = g.param(self.fc_weight);
        let b = g.param(self.fc_bias);
        let wx = g.matmul(w, x);
        let logits = g.add_col_vec(wx, b);
        g.softmax_cols(logits)
    }
}

/// Convex combination of per-view predictions.
///
/// `q` is `(N, n_views)` in the fixed view order of `w`; `w` rows must lie
/// on the simplex within 1e-6.
pub fn fuse(q: &Array2<f64>, w: &AttentionWeights) -> Result<Array1<f64>> {
    if q.dim() != w.w.dim() {
        return Err(Error::Shape(format!(
            "predictions are {:?}, weights are {:?}",
            q.dim(),
            w.w.dim()
        )));
    }
    w.validate_simplex(1e-6)?;
    Ok(Array1::from_iter(
        q.rows()
            .into_iter()
            .zip(w.w.rows())
            .map(|(qr, wr)| qr.dot(&wr)),
    ))
}

/// Uniform average over views: the fixed-weight fusion baseline.
pub fn average_fuse(q: &Array2<f64>) -> Array1<f64> {
    let k = q.ncols() as f64;
    q.sum_axis(ndarray::Axis(1)) / k
}
