//! Attention-weight export: flat CSV rows and a GeoJSON grid for
//! external map plotting.

use serde_json::{json, Value};

use crate::error::Result;
use crate::fusion::AttentionWeights;
use crate::grid::GridSpec;

/// One exported weight row for a (target interval, region) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionRow {
    pub t: usize,
    pub n: usize,
    pub w_dist: f64,
    pub w_poi: f64,
    pub w_transport: f64,
}

/// Flattens one interval's weight matrix into per-region rows.
pub fn attention_rows(t: usize, weights: &AttentionWeights) -> Vec<AttentionRow> {
    (0..weights.node_count())
        .map(|n| AttentionRow {
            t,
            n,
            w_dist: weights.w[[n, 0]],
            w_poi: weights.w[[n, 1]],
            w_transport: weights.w[[n, 2]],
        })
        .collect()
}

/// `t,n,w_dist,w_poi,w_transport` CSV.
pub fn write_attention_csv<W: std::io::Write>(rows: &[AttentionRow], mut out: W) -> Result<()> {
    writeln!(out, "t,n,w_dist,w_poi,w_transport")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.n, r.w_dist, r.w_poi, r.w_transport
        )?;
    }
    Ok(())
}

/// GeoJSON FeatureCollection with one square cell polygon per row, in the
/// grid's planar meter frame, weights attached as properties.
pub fn attention_geojson(grid: &GridSpec, rows: &[AttentionRow]) -> Value {
    let s = grid.cell_size_m();
    let features: Vec<Value> = rows
        .iter()
        .map(|r| {
            let i = (r.n / grid.cols()) as f64;
            let j = (r.n % grid.cols()) as f64;
            let (cx, cy) = (j * s, i * s);
            let (x0, x1) = (cx - s / 2.0, cx + s / 2.0);
            let (y0, y1) = (cy - s / 2.0, cy + s / 2.0);
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[
                        [x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]
                    ]]
                },
                "properties": {
                    "t": r.t,
                    "n": r.n,
                    "w_dist": r.w_dist,
                    "w_poi": r.w_poi,
                    "w_transport": r.w_transport
                }
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "features": features
    })
}
