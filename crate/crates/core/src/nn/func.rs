//! Standalone checked versions of the dense/embedding/softmax primitives,
//! for callers that need the plain math without a tape.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// `y = W^T x + b` with `W: (p, q)`, `x: p`, `b: q`.
pub fn dense(x: &Array1<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let (p, q) = w.dim();
    if x.len() != p || b.len() != q {
        return Err(Error::Shape(format!(
            "dense: x has {}, W is {}x{}, b has {}",
            x.len(),
            p,
            q,
            b.len()
        )));
    }
    Ok(w.t().dot(x) + b)
}

/// Row `index` of an embedding table.
pub fn embedding_lookup(table: &Array2<f64>, index: usize) -> Result<Array1<f64>> {
    if index >= table.nrows() {
        return Err(Error::Bounds(format!(
            "embedding index {index} out of range for table with {} rows",
            table.nrows()
        )));
    }
    Ok(table.row(index).to_owned())
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(z: &Array1<f64>) -> Result<Array1<f64>> {
    if z.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("softmax input contains NaN".into()));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = z.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    Ok(exps / sum)
}
