//! Evaluation metrics and the deterministic reference baselines.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fusion::ContextRecord;
use crate::grid::{PopulationFrame, SeriesWindow};

/// Aggregate error metrics over a prediction block, in persons.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mae: f64,
    pub rmse: f64,
    /// Weighted absolute percentage error: `100 * sum|err| / sum|truth|`.
    pub wape: f64,
    /// Per-region MAE for diagnostics.
    pub per_region_mae: Array1<f64>,
}

/// MAE, RMSE and WAPE over `(T', N)` prediction and truth blocks.
pub fn evaluate(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<EvalResult> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "prediction block is {:?}, truth is {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    let (t, n) = pred.dim();
    if t == 0 || n == 0 {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    let truth_mass: f64 = truth.iter().map(|y| y.abs()).sum();
    if truth_mass == 0.0 {
        return Err(Error::Numeric(
            "WAPE undefined: truth values are all zero".into(),
        ));
    }
    let count = (t * n) as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut per_region = Array1::zeros(n);
    for ti in 0..t {
        for ni in 0..n {
            let err = truth[[ti, ni]] - pred[[ti, ni]];
            abs_sum += err.abs();
            sq_sum += err * err;
            per_region[ni] += err.abs();
        }
    }
    per_region /= t as f64;
    Ok(EvalResult {
        mae: abs_sum / count,
        rmse: (sq_sum / count).sqrt(),
        wape: 100.0 * abs_sum / truth_mass,
        per_region_mae: per_region,
    })
}

/// Key for the historical-average baseline: day type plus hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HaKey {
    pub holiday: bool,
    pub hour: u8,
}

impl HaKey {
    pub fn of(ctx: &ContextRecord) -> Self {
        Self {
            holiday: ctx.holiday,
            hour: ctx.hour(),
        }
    }
}

/// Historical average over the training segment: predicts the per-region
/// mean of all training frames sharing the query's (day type, hour) key.
#[derive(Debug, Clone)]
pub struct HistoricalAverage {
    n: usize,
    sums: std::collections::HashMap<HaKey, (Array1<f64>, usize)>,
}

impl HistoricalAverage {
    /// `contexts` is indexed by absolute time, so it must cover every
    /// frame's `time_index`; `frames` may be any subset of the series.
    pub fn fit(frames: &[PopulationFrame], contexts: &[ContextRecord]) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyDataset("historical average needs frames".into()));
        }
        let n = frames[0].values.len();
        let mut sums: std::collections::HashMap<HaKey, (Array1<f64>, usize)> =
            std::collections::HashMap::new();
        for frame in frames {
            let ctx = contexts.get(frame.time_index).ok_or_else(|| {
                Error::Shape(format!(
                    "no context record for frame at time {}",
                    frame.time_index
                ))
            })?;
            let entry = sums
                .entry(HaKey::of(ctx))
                .or_insert_with(|| (Array1::zeros(n), 0));
            entry.0 += &frame.values;
            entry.1 += 1;
        }
        Ok(Self { n, sums })
    }

    pub fn predict(&self, key: HaKey) -> Result<Array1<f64>> {
        match self.sums.get(&key) {
            Some((sum, count)) => Ok(sum / *count as f64),
            None => Err(Error::State(format!(
                "no training frames for day-type={} hour={}",
                if key.holiday { "holiday" } else { "business" },
                key.hour
            ))),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }
}

/// Persistence baseline: the last observed frame is the forecast.
pub fn persistence(window: &SeriesWindow) -> Result<Array1<f64>> {
    window
        .inputs
        .last()
        .map(|f| f.values.clone())
        .ok_or_else(|| Error::EmptyDataset("persistence needs a nonempty window".into()))
}
