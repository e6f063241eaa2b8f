//! Grid partition, node indexing, population frames, and sliding windows.
//!
//! A city is partitioned into a `rows x cols` grid of square cells. Cells are
//! the graph nodes everywhere else in the crate, addressed by a row-major
//! [`RegionId`]. Population observations are flat vectors of length
//! `rows * cols`, one value per cell, indexed by time.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fusion::ContextRecord;

/// The `I x J` city partition.
///
/// `cell_size_m` is only used to derive centroid distances for the
/// distance graph; the rest of the pipeline is unit-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    cell_size_m: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, cell_size_m: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "grid must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if !(cell_size_m > 0.0) {
            return Err(Error::Config(format!(
                "cell size must be positive, got {cell_size_m}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            cell_size_m,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    /// Number of regions N = rows * cols.
    pub fn node_count(&self) -> usize {
        self.rows * self.cols
    }
}

/// Row-major region index: `n = i * cols + j` for cell `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(pub usize);

impl RegionId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Maps a `(row, col)` cell to its row-major region id.
pub fn region_index(i: usize, j: usize, grid: &GridSpec) -> Result<RegionId> {
    if i >= grid.rows() || j >= grid.cols() {
        return Err(Error::Bounds(format!(
            "cell ({i}, {j}) outside {}x{} grid",
            grid.rows(),
            grid.cols()
        )));
    }
    Ok(RegionId(i * grid.cols() + j))
}

/// Inverse of [`region_index`]: recovers `(row, col)` from a region id.
pub fn region_coords(n: RegionId, grid: &GridSpec) -> Result<(usize, usize)> {
    if n.index() >= grid.node_count() {
        return Err(Error::Bounds(format!(
            "region {} outside grid with {} nodes",
            n.index(),
            grid.node_count()
        )));
    }
    Ok((n.index() / grid.cols(), n.index() % grid.cols()))
}

/// Centroid of a cell in a planar frame whose origin is the centroid of
/// cell (0, 0). x grows with the column index, y with the row index.
pub fn region_centroid(n: RegionId, grid: &GridSpec) -> Result<(f64, f64)> {
    let (i, j) = region_coords(n, grid)?;
    Ok((j as f64 * grid.cell_size_m(), i as f64 * grid.cell_size_m()))
}

/// Euclidean distance in meters between two region centroids.
pub fn region_distance(a: RegionId, b: RegionId, grid: &GridSpec) -> Result<f64> {
    let (xa, ya) = region_centroid(a, grid)?;
    let (xb, yb) = region_centroid(b, grid)?;
    Ok(((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt())
}

/// One population observation over the whole grid at a single time index.
///
/// Values are stored flat in region order. During generation they are
/// nonnegative integers stored as reals; predictions are arbitrary reals.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationFrame {
    pub values: Array1<f64>,
    pub time_index: usize,
}

impl PopulationFrame {
    pub fn new(values: Array1<f64>, time_index: usize, grid: &GridSpec) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "frame has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { values, time_index })
    }

    /// Reshape the flat vector to an `I x J` matrix (row-major).
    pub fn to_grid(&self, grid: &GridSpec) -> Result<Array2<f64>> {
        if self.values.len() != grid.node_count() {
            return Err(Error::Shape(format!(
                "frame has {} values, grid has {} nodes",
                self.values.len(),
                grid.node_count()
            )));
        }
        Ok(Array2::from_shape_fn((grid.rows(), grid.cols()), |(i, j)| {
            self.values[i * grid.cols() + j]
        }))
    }

    /// Inverse of [`PopulationFrame::to_grid`]; bit-exact round trip.
    pub fn from_grid(m: &Array2<f64>, time_index: usize, grid: &GridSpec) -> Result<Self> {
        if m.nrows() != grid.rows() || m.ncols() != grid.cols() {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, grid is {}x{}",
                m.nrows(),
                m.ncols(),
                grid.rows(),
                grid.cols()
            )));
        }
        let values = Array1::from_iter(m.iter().copied());
        Ok(Self { values, time_index })
    }
}

/// One training sample: `L` consecutive input frames, the frame one step
/// ahead as the target, and the `L + 1` context records aligned with the
/// inputs plus the target interval.
#[derive(Debug, Clone)]
pub struct SeriesWindow {
    pub inputs: Vec<PopulationFrame>,
    pub target: PopulationFrame,
    pub contexts: Vec<ContextRecord>,
}

impl SeriesWindow {
    /// Context record for the target interval (the last of `L + 1`).
    pub fn target_context(&self) -> &ContextRecord {
        self.contexts.last().expect("window has L+1 contexts")
    }

    pub fn window_len(&self) -> usize {
        self.inputs.len()
    }
}

/// Slices an ordered series into all sliding windows of `window_len` input
/// frames plus a one-step-ahead target.
///
/// With `T` frames this yields `T - window_len` windows; window `k` takes
/// input frames `[k, k + window_len)` and targets frame `k + window_len`.
pub fn make_windows(
    series: &[PopulationFrame],
    contexts: &[ContextRecord],
    window_len: usize,
) -> Result<Vec<SeriesWindow>> {
    if window_len == 0 {
        return Err(Error::Config("window length must be >= 1".into()));
    }
    if contexts.len() != series.len() {
        return Err(Error::Shape(format!(
            "{} context records for {} frames",
            contexts.len(),
            series.len()
        )));
    }
    if series.len() < window_len + 1 {
        return Err(Error::EmptyDataset(format!(
            "need at least {} frames for window length {}, got {}",
            window_len + 1,
            window_len,
            series.len()
        )));
    }
    for pair in series.windows(2) {
        if pair[1].time_index != pair[0].time_index + 1 {
            return Err(Error::State(format!(
                "frames not consecutive: {} followed by {}",
                pair[0].time_index, pair[1].time_index
            )));
        }
    }

    let mut out = Vec::with_capacity(series.len() - window_len);
    for k in 0..series.len() - window_len {
        out.push(SeriesWindow {
            inputs: series[k..k + window_len].to_vec(),
            target: series[k + window_len].clone(),
            contexts: contexts[k..=k + window_len].to_vec(),
        });
    }
    Ok(out)
}
