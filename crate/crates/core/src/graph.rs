//! Construction of the three inter-region affinity graphs and their
//! scaled Laplacians.
//!
//! Each view encodes one notion of similarity between grid cells:
//!
//! - `dist`: thresholded Gaussian kernel of centroid distance,
//! - `poi`: cosine similarity of TF-IDF facility profiles,
//! - `transport`: count of shared transit/road lines.
//!
//! All adjacencies are symmetric with a zero diagonal; self-information
//! enters spectral convolution through the order-0 Chebyshev term instead
//! of explicit self-loops.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{Error, Result};
use crate::grid::{region_distance, GridSpec, RegionId};

/// Which affinity a [`ViewGraph`] encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewKind {
    Dist,
    Poi,
    Transport,
}

impl ViewKind {
    pub const ALL: [ViewKind; 3] = [ViewKind::Dist, ViewKind::Poi, ViewKind::Transport];

    pub fn name(&self) -> &'static str {
        match self {
            ViewKind::Dist => "dist",
            ViewKind::Poi => "poi",
            ViewKind::Transport => "transport",
        }
    }

    pub fn parse(s: &str) -> Result<ViewKind> {
        match s {
            "dist" => Ok(ViewKind::Dist),
            "poi" => Ok(ViewKind::Poi),
            "transport" => Ok(ViewKind::Transport),
            other => Err(Error::Config(format!(
                "unknown view '{other}', expected dist|poi|transport"
            ))),
        }
    }
}

impl std::fmt::Display for ViewKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// TF-IDF facility profile of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiProfile {
    /// TF-IDF scores, one per category; all entries nonnegative.
    pub tfidf: Array1<f64>,
    /// Raw facility counts the scores were derived from.
    pub raw_counts: Array1<u32>,
}

/// Binary line-membership profile of one region: entry `m` is true when
/// the region overlaps a station or road segment of line `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportProfile {
    pub lines: Vec<bool>,
}

/// Result of the dominant-eigenvalue estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMax {
    pub value: f64,
    /// False when power iteration hit its iteration cap and the
    /// conservative fallback of 2.0 was used instead.
    pub converged: bool,
}

/// One affinity graph plus the spectral quantities convolution needs.
#[derive(Debug, Clone)]
pub struct ViewGraph {
    pub kind: ViewKind,
    pub adjacency: Array2<f64>,
    pub scaled_laplacian: Array2<f64>,
    pub lambda_max: f64,
    pub lambda_max_converged: bool,
}

impl ViewGraph {
    /// Builds the Laplacian pipeline for a validated adjacency matrix.
    pub fn from_adjacency(kind: ViewKind, adjacency: Array2<f64>) -> Result<Self> {
        let lap = normalized_laplacian(&adjacency)?;
        let lmax = estimate_lambda_max(&lap)?;
        let scaled = scaled_laplacian(&lap, lmax.value)?;
        Ok(Self {
            kind,
            adjacency,
            scaled_laplacian: scaled,
            lambda_max: lmax.value,
            lambda_max_converged: lmax.converged,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }
}

/// Distance graph: `A[n, m] = exp(-d(n,m)^2 / (2 theta^2))` when the
/// centroid distance is within `kappa` meters, zero otherwise. The
/// diagonal is zero.
pub fn build_distance_graph(grid: &GridSpec, theta_m: f64, kappa_m: f64) -> Result<ViewGraph> {
    if !(theta_m > 0.0) {
        return Err(Error::Config(format!(
            "kernel bandwidth theta must be positive, got {theta_m}"
        )));
    }
    if !(kappa_m > 0.0) {
        return Err(Error::Config(format!(
            "distance cutoff kappa must be positive, got {kappa_m}"
        )));
    }
    let n = grid.node_count();
    let mut adj = Array2::zeros((n, n));
    for a in 0..n {
        for b in (a + 1)..n {
            let d = region_distance(RegionId(a), RegionId(b), grid)?;
            if d <= kappa_m {
                let w = (-d * d / (2.0 * theta_m * theta_m)).exp();
                adj[[a, b]] = w;
                adj[[b, a]] = w;
            }
        }
    }
    ViewGraph::from_adjacency(ViewKind::Dist, adj)
}

/// TF-IDF over per-region facility counts.
///
/// `counts` is `N x |C|`. For region `n` and category `c`:
/// `t[n][c] = (count / region total) * ln(N / df_c)` where `df_c` is the
/// number of regions with a nonzero count in `c`. Regions with no
/// facilities at all get the zero vector; categories present nowhere
/// contribute zero.
pub fn compute_tfidf(counts: &Array2<u32>) -> Vec<PoiProfile> {
    let (n, c) = counts.dim();
    let mut df = vec![0usize; c];
    for row in counts.rows() {
        for (cat, &v) in row.iter().enumerate() {
            if v != 0 {
                df[cat] += 1;
            }
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { (n as f64 / d as f64).ln() })
        .collect();

    (0..n)
        .map(|region| {
            let row = counts.row(region);
            let total: u32 = row.sum();
            let tfidf = if total == 0 {
                Array1::zeros(c)
            } else {
                Array1::from_iter(
                    row.iter()
                        .enumerate()
                        .map(|(cat, &v)| v as f64 / total as f64 * idf[cat]),
                )
            };
            PoiProfile {
                tfidf,
                raw_counts: row.to_owned(),
            }
        })
        .collect()
}

fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        // cosine with a zero vector is defined as 0: no facility signal,
        // no facility-based affinity
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

/// POI graph: cosine similarity of TF-IDF profiles, thresholded at
/// `gamma`; zero diagonal.
pub fn build_poi_graph(profiles: &[PoiProfile], gamma: f64) -> Result<ViewGraph> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "similarity threshold gamma must be in [0, 1], got {gamma}"
        )));
    }
    let n = profiles.len();
    let mut adj = Array2::zeros((n, n));
    for a in 0..n {
        for b in (a + 1)..n {
            let s = cosine(&profiles[a].tfidf, &profiles[b].tfidf);
            if s >= gamma && s > 0.0 {
                adj[[a, b]] = s;
                adj[[b, a]] = s;
            }
        }
    }
    ViewGraph::from_adjacency(ViewKind::Poi, adj)
}

/// Transportation graph: `A[n, m]` counts the lines regions `n` and `m`
/// share; zero diagonal.
pub fn build_transport_graph(profiles: &[TransportProfile]) -> Result<ViewGraph> {
    let n = profiles.len();
    let m = profiles.first().map(|p| p.lines.len()).unwrap_or(0);
    for (i, p) in profiles.iter().enumerate() {
        if p.lines.len() != m {
            return Err(Error::Shape(format!(
                "transport profile {i} has {} lines, expected {m}",
                p.lines.len()
            )));
        }
    }
    let mut adj = Array2::zeros((n, n));
    for a in 0..n {
        for b in (a + 1)..n {
            let shared = profiles[a]
                .lines
                .iter()
                .zip(&profiles[b].lines)
                .filter(|(x, y)| **x && **y)
                .count();
            if shared > 0 {
                adj[[a, b]] = shared as f64;
                adj[[b, a]] = shared as f64;
            }
        }
    }
    ViewGraph::from_adjacency(ViewKind::Transport, adj)
}

fn check_symmetric_nonnegative(adj: &Array2<f64>) -> Result<()> {
    let (r, c) = adj.dim();
    if r != c {
        return Err(Error::Shape(format!("adjacency is {r}x{c}, not square")));
    }
    for i in 0..r {
        for j in 0..c {
            if adj[[i, j]] < 0.0 {
                return Err(Error::Invariant(format!(
                    "adjacency entry ({i}, {j}) is negative: {}",
                    adj[[i, j]]
                )));
            }
            if adj[[i, j]] != adj[[j, i]] {
                return Err(Error::Invariant(format!(
                    "adjacency not symmetric at ({i}, {j}): {} vs {}",
                    adj[[i, j]],
                    adj[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Symmetric normalized Laplacian `L = I - D^{-1/2} A D^{-1/2}`.
///
/// Isolated nodes (zero degree) take `D^{-1/2} = 0`, so their Laplacian
/// row is the identity row.
pub fn normalized_laplacian(adj: &Array2<f64>) -> Result<Array2<f64>> {
    check_symmetric_nonnegative(adj)?;
    let n = adj.nrows();
    let deg: Array1<f64> = adj.sum_axis(ndarray::Axis(1));
    let dinv_sqrt: Array1<f64> =
        deg.mapv(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
    let mut lap = Array2::eye(n);
    for i in 0..n {
        for j in 0..n {
            if adj[[i, j]] != 0.0 {
                lap[[i, j]] -= dinv_sqrt[i] * adj[[i, j]] * dinv_sqrt[j];
            }
        }
    }
    Ok(lap)
}

const POWER_ITER_MAX: usize = 10_000;
const POWER_ITER_RTOL: f64 = 1e-8;

/// Largest eigenvalue of a symmetric Laplacian via power iteration.
///
/// Iterates on `L + I` so the target eigenvalue `lambda_max + 1` strictly
/// dominates in magnitude (the normalized Laplacian spectrum sits in
/// [0, 2]). Convergence is declared when the residual
/// `||(L + I) v - rho v||` drops below `1e-8 * rho`, which bounds the
/// eigenvalue error by the same amount for a symmetric matrix; an
/// iterate-difference test would allow silent underestimates on graphs
/// with a small spectral gap, and an underestimated `lambda_max` pushes
/// the scaled spectrum outside [-1, 1]. Falls back to 2.0 with
/// `converged = false` after 10 000 iterations (the scaled Laplacian is
/// always within bounds there since the true spectrum sits in [0, 2]).
pub fn estimate_lambda_max(lap: &Array2<f64>) -> Result<LambdaMax> {
    let (r, c) = lap.dim();
    if r != c {
        return Err(Error::Shape(format!("laplacian is {r}x{c}, not square")));
    }
    let n = r;
    for i in 0..n {
        for j in (i + 1)..n {
            if (lap[[i, j]] - lap[[j, i]]).abs() > 1e-12 {
                return Err(Error::Invariant(format!(
                    "laplacian not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    // deterministic pseudo-random start; a fixed structured vector such as
    // all-ones can be exactly orthogonal to the dominant eigenvector
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let mut v: Array1<f64> = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0)));
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 || n == 0 {
        return Err(Error::Numeric("degenerate start vector".into()));
    }
    v.mapv_inplace(|x| x / norm);

    let shifted = lap + &Array2::<f64>::eye(n);
    for _ in 0..POWER_ITER_MAX {
        let w = shifted.dot(&v);
        let rayleigh = v.dot(&w);
        let residual = (&w - &(&v * rayleigh)).mapv(|x| x * x).sum().sqrt();
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            // L + I is positive definite, so this cannot happen for a
            // valid Laplacian; treat as non-convergence
            break;
        }
        v = w / wn;
        if residual <= POWER_ITER_RTOL * rayleigh.abs() {
            return Ok(LambdaMax {
                value: rayleigh - 1.0,
                converged: true,
            });
        }
    }
    Ok(LambdaMax {
        value: 2.0,
        converged: false,
    })
}

/// Rescales the Laplacian spectrum into [-1, 1]:
/// `L~ = (2 / lambda_max) L - I`.
pub fn scaled_laplacian(lap: &Array2<f64>, lambda_max: f64) -> Result<Array2<f64>> {
    if !(lambda_max > 0.0) {
        return Err(Error::Config(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    let n = lap.nrows();
    Ok(lap * (2.0 / lambda_max) - &Array2::<f64>::eye(n))
}

/// Serializes nonzero upper-triangle edges as `kind,n,m,weight` CSV rows.
pub fn write_graph_csv<W: std::io::Write>(graph: &ViewGraph, mut out: W) -> Result<()> {
    writeln!(out, "kind,n,m,weight")?;
    let n = graph.node_count();
    for a in 0..n {
        for b in (a + 1)..n {
            let w = graph.adjacency[[a, b]];
            if w != 0.0 {
                writeln!(out, "{},{},{},{}", graph.kind, a, b, w)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_graph_kernel_values() {
        let grid = GridSpec::new(1, 3, 500.0).unwrap();
        let g = build_distance_graph(&grid, 500.0, 1000.0).unwrap();
        // adjacent cells at 500 m: exp(-0.5)
        let expect = (-0.5f64).exp();
        assert!((g.adjacency[[0, 1]] - expect).abs() < 1e-12);
        assert!((expect - 0.60653).abs() < 1e-5);
        // 1000 m still within cutoff
        assert!(g.adjacency[[0, 2]] > 0.0);
        // diagonal excluded
        for i in 0..3 {
            assert_eq!(g.adjacency[[i, i]], 0.0);
        }
    }

    #[test]
    fn distance_graph_cutoff() {
        let grid = GridSpec::new(1, 4, 500.0).unwrap();
        let g = build_distance_graph(&grid, 500.0, 1000.0).unwrap();
        // cells 0 and 3 are 1500 m apart, beyond kappa
        assert_eq!(g.adjacency[[0, 3]], 0.0);
    }

    #[test]
    fn distance_graph_monotone_in_distance() {
        let grid = GridSpec::new(1, 5, 500.0).unwrap();
        let g = build_distance_graph(&grid, 800.0, 2500.0).unwrap();
        assert!(g.adjacency[[0, 1]] > g.adjacency[[0, 2]]);
        assert!(g.adjacency[[0, 2]] > g.adjacency[[0, 3]]);
    }

    #[test]
    fn distance_graph_config_errors() {
        let grid = GridSpec::new(2, 2, 500.0).unwrap();
        assert!(build_distance_graph(&grid, 0.0, 1000.0).is_err());
        assert!(build_distance_graph(&grid, 500.0, -1.0).is_err());
    }

    #[test]
    fn tfidf_ubiquitous_category_scores_zero() {
        // one category present in both regions: idf = ln(2/2) = 0
        let counts = ndarray::array![[3u32, 0], [5, 0]];
        let profiles = compute_tfidf(&counts);
        assert_eq!(profiles[0].tfidf[0], 0.0);
        assert_eq!(profiles[1].tfidf[0], 0.0);
    }

    #[test]
    fn tfidf_hand_example() {
        // region 1 counts (2, 2); category b only in region 1:
        // t = (2/4) * ln(2/1) = 0.5 ln 2
        let counts = ndarray::array![[4u32, 0], [2, 2]];
        let profiles = compute_tfidf(&counts);
        let expect = 0.5 * 2.0f64.ln();
        assert!((profiles[1].tfidf[1] - expect).abs() < 1e-12);
        assert!((expect - 0.34657).abs() < 1e-5);
    }

    #[test]
    fn tfidf_zero_region_gets_zero_vector() {
        let counts = ndarray::array![[0u32, 0], [1, 2]];
        let profiles = compute_tfidf(&counts);
        assert!(profiles[0].tfidf.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poi_graph_identical_profiles() {
        let p = PoiProfile {
            tfidf: ndarray::array![0.5, 0.2],
            raw_counts: ndarray::array![1, 1],
        };
        let g = build_poi_graph(&[p.clone(), p], 0.5).unwrap();
        assert!((g.adjacency[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poi_graph_threshold_rejects() {
        let a = PoiProfile {
            tfidf: ndarray::array![1.0, 0.0],
            raw_counts: ndarray::array![1, 0],
        };
        let b = PoiProfile {
            tfidf: ndarray::array![1.0, 1.0],
            raw_counts: ndarray::array![1, 1],
        };
        // cos = 1/sqrt(2) ~ 0.7071 < 0.8
        let g = build_poi_graph(&[a, b], 0.8).unwrap();
        assert_eq!(g.adjacency[[0, 1]], 0.0);
    }

    #[test]
    fn poi_graph_zero_vector_has_no_edges() {
        let z = PoiProfile {
            tfidf: ndarray::array![0.0, 0.0],
            raw_counts: ndarray::array![0, 0],
        };
        let b = PoiProfile {
            tfidf: ndarray::array![1.0, 1.0],
            raw_counts: ndarray::array![1, 1],
        };
        let g = build_poi_graph(&[z, b], 0.0).unwrap();
        assert_eq!(g.adjacency[[0, 1]], 0.0);
    }

    #[test]
    fn poi_graph_gamma_validation() {
        let p = PoiProfile {
            tfidf: ndarray::array![1.0],
            raw_counts: ndarray::array![1],
        };
        assert!(build_poi_graph(&[p.clone()], -0.1).is_err());
        assert!(build_poi_graph(&[p], 1.1).is_err());
    }

    fn tp(bits: &[u8]) -> TransportProfile {
        TransportProfile {
            lines: bits.iter().map(|&b| b != 0).collect(),
        }
    }

    #[test]
    fn transport_graph_shared_line_counts() {
        let g = build_transport_graph(&[tp(&[1, 1, 0]), tp(&[1, 1, 1]), tp(&[0, 0, 0])]).unwrap();
        assert_eq!(g.adjacency[[0, 1]], 2.0);
        assert_eq!(g.adjacency[[0, 2]], 0.0);
        assert_eq!(g.adjacency[[1, 2]], 0.0);
        let g2 = build_transport_graph(&[tp(&[1, 0, 0]), tp(&[1, 0, 0])]).unwrap();
        assert_eq!(g2.adjacency[[0, 1]], 1.0);
    }

    #[test]
    fn transport_graph_dim_mismatch() {
        assert!(build_transport_graph(&[tp(&[1, 0]), tp(&[1, 0, 1])]).is_err());
    }

    #[test]
    fn laplacian_single_edge() {
        let adj = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let lap = normalized_laplacian(&adj).unwrap();
        assert_eq!(lap, ndarray::array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn laplacian_isolated_node_row() {
        let adj = ndarray::array![
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0]
        ];
        let lap = normalized_laplacian(&adj).unwrap();
        assert_eq!(lap[[2, 2]], 1.0);
        assert_eq!(lap[[2, 0]], 0.0);
        assert_eq!(lap[[2, 1]], 0.0);
    }

    #[test]
    fn laplacian_zero_adjacency_is_identity() {
        let adj = Array2::zeros((4, 4));
        let lap = normalized_laplacian(&adj).unwrap();
        assert_eq!(lap, Array2::<f64>::eye(4));
    }

    #[test]
    fn laplacian_rejects_asymmetric() {
        let adj = ndarray::array![[0.0, 1.0], [0.5, 0.0]];
        assert!(normalized_laplacian(&adj).is_err());
    }

    #[test]
    fn lambda_max_single_edge() {
        let adj = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let lap = normalized_laplacian(&adj).unwrap();
        let lm = estimate_lambda_max(&lap).unwrap();
        assert!(lm.converged);
        assert!((lm.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn lambda_max_identity() {
        let lap = Array2::eye(5);
        let lm = estimate_lambda_max(&lap).unwrap();
        assert!(lm.converged);
        assert!((lm.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lambda_max_triangle() {
        // 3-cycle: normalized Laplacian spectrum {0, 1.5, 1.5}
        let adj = ndarray::array![
            [0.0, 1.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 0.0]
        ];
        let lap = normalized_laplacian(&adj).unwrap();
        let lm = estimate_lambda_max(&lap).unwrap();
        assert!(lm.converged);
        assert!((lm.value - 1.5).abs() < 1e-6);
    }

    #[test]
    fn scaled_laplacian_cases() {
        // L = I, lambda_max = 1 -> identity
        let lt = scaled_laplacian(&Array2::eye(3), 1.0).unwrap();
        assert_eq!(lt, Array2::<f64>::eye(3));
        // single edge, lambda_max = 2 -> [[0, -1], [-1, 0]]
        let lap = ndarray::array![[1.0, -1.0], [-1.0, 1.0]];
        let lt = scaled_laplacian(&lap, 2.0).unwrap();
        assert!((lt[[0, 0]]).abs() < 1e-15);
        assert!((lt[[0, 1]] + 1.0).abs() < 1e-15);
        // L = 0 -> -I
        let lt = scaled_laplacian(&Array2::zeros((2, 2)), 2.0).unwrap();
        assert_eq!(lt, -Array2::<f64>::eye(2));
        // bad lambda
        assert!(scaled_laplacian(&Array2::eye(2), 0.0).is_err());
    }

    #[test]
    fn builders_produce_exact_symmetry() {
        let grid = GridSpec::new(4, 4, 500.0).unwrap();
        let g = build_distance_graph(&grid, 800.0, 1500.0).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(g.adjacency[[i, j]], g.adjacency[[j, i]]);
            }
        }
    }

    #[test]
    fn poi_sparsity_monotone_in_gamma() {
        let counts = Array2::from_shape_fn((12, 4), |(i, j)| ((i * 7 + j * 3) % 5) as u32);
        let profiles = compute_tfidf(&counts);
        let mut last = usize::MAX;
        for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let g = build_poi_graph(&profiles, gamma).unwrap();
            let edges = g.adjacency.iter().filter(|&&w| w > 0.0).count();
            assert!(edges <= last);
            last = edges;
        }
    }

    #[test]
    fn graph_csv_export() {
        let adj = ndarray::array![[0.0, 2.0], [2.0, 0.0]];
        let g = ViewGraph::from_adjacency(ViewKind::Transport, adj).unwrap();
        let mut buf = Vec::new();
        write_graph_csv(&g, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "kind,n,m,weight\ntransport,0,1,2\n");
    }
}
