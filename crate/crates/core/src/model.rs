//! The full multi-view forecaster: per-view ChebConv + GRU + readout
//! blocks, shared context embedding, and a fusion head, trained with
//! mini-batch Adam.

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cheb::{Activation, ChebLayer};
use crate::data::{CityScenario, Scaler};
use crate::error::{Error, Result};
use crate::fusion::{
    AttentionHead, AttentionWeights, ContextEmbedding, EmbeddingDims,
};
use crate::graph::{
    build_distance_graph, build_poi_graph, build_transport_graph, compute_tfidf, ViewGraph,
    ViewKind,
};
use crate::grid::{PopulationFrame, SeriesWindow};
use crate::gru::GruCell;
use crate::metrics::{evaluate, EvalResult};
use crate::nn::adam::{AdamConfig, AdamState};
use crate::nn::tape::{Graph, NodeId};
use crate::nn::{glorot_uniform, ParamId, ParamStore};

/// Graph-construction hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphParams {
    /// Gaussian kernel bandwidth, meters.
    pub theta_m: f64,
    /// Distance cutoff, meters.
    pub kappa_m: f64,
    /// Cosine-similarity threshold for the facility graph.
    pub gamma: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            theta_m: 1000.0,
            kappa_m: 2000.0,
            gamma: 0.5,
        }
    }
}

/// The three view graphs plus the TF-IDF matrix shared with the
/// attention head.
#[derive(Debug, Clone)]
pub struct GraphBundle {
    pub dist: ViewGraph,
    pub poi: ViewGraph,
    pub transport: ViewGraph,
    /// `(|C|, N)`: region profiles as columns.
    pub tfidf: Array2<f64>,
}

impl GraphBundle {
    pub fn get(&self, kind: ViewKind) -> &ViewGraph {
        match kind {
            ViewKind::Dist => &self.dist,
            ViewKind::Poi => &self.poi,
            ViewKind::Transport => &self.transport,
        }
    }
}

/// Builds all three views from a scenario.
pub fn build_graphs(scenario: &CityScenario, params: &GraphParams) -> Result<GraphBundle> {
    let dist = build_distance_graph(&scenario.grid, params.theta_m, params.kappa_m)?;
    let profiles = compute_tfidf(&scenario.poi_counts);
    let poi = build_poi_graph(&profiles, params.gamma)?;
    let transport = build_transport_graph(&scenario.transport_profiles)?;
    let n = scenario.node_count();
    let c = scenario.category_count();
    let mut tfidf = Array2::zeros((c, n));
    for (region, p) in profiles.iter().enumerate() {
        for cat in 0..c {
            tfidf[[cat, region]] = p.tfidf[cat];
        }
    }
    Ok(GraphBundle {
        dist,
        poi,
        transport,
        tfidf,
    })
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Chebyshev order K.
    pub cheb_order: usize,
    /// Output features of each stacked convolution layer; the list
    /// length is the layer count V.
    pub gcn_features: Vec<usize>,
    pub gru_hidden: usize,
    pub embedding: EmbeddingDims,
    /// Input window length L.
    pub window: usize,
    /// Activation of the hidden convolution layers; the final layer is
    /// always linear before the recurrent stage.
    pub activation: Activation,
    /// Optional additive bias inside each convolution layer.
    pub cheb_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            cheb_order: 3,
            gcn_features: vec![8, 2],
            gru_hidden: 64,
            embedding: EmbeddingDims::default(),
            window: 8,
            activation: Activation::Relu,
            cheb_bias: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cheb_order == 0 {
            return Err(Error::Config("cheb_order must be >= 1".into()));
        }
        if self.gcn_features.is_empty() || self.gcn_features.iter().any(|&f| f == 0) {
            return Err(Error::Config(
                "gcn_features must be a nonempty list of positive sizes".into(),
            ));
        }
        if self.gru_hidden == 0 {
            return Err(Error::Config("gru_hidden must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        Ok(())
    }
}

/// How per-view predictions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionKind {
    /// Context-aware attention weights.
    Attention,
    /// Fixed uniform average.
    Average,
}

#[derive(Debug)]
enum Fusion {
    /// Exactly one view: its prediction passes through unchanged.
    Single,
    Average,
    Attention(AttentionHead),
}

#[derive(Debug)]
struct ViewBlock {
    scaled_laplacian: Option<Array2<f64>>,
    cheb: Vec<ChebLayer>,
    gru: GruCell,
    readout_w: ParamId,
    readout_b: ParamId,
}

/// The assembled forecaster. All learnable state lives in `store`;
/// construction order is deterministic, so identical `(config, seed)`
/// pairs produce bit-identical models.
#[derive(Debug)]
pub struct AcmvModel {
    store: ParamStore,
    config: ModelConfig,
    node_count: usize,
    views: Vec<ViewKind>,
    blocks: Vec<ViewBlock>,
    embedding: ContextEmbedding,
    fusion: Fusion,
    fusion_kind: FusionKind,
}

fn canonical_views(views: &[ViewKind]) -> Result<Vec<ViewKind>> {
    if views.is_empty() {
        return Err(Error::Config("view subset must be nonempty".into()));
    }
    let mut sorted = views.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != views.len() {
        return Err(Error::Config("duplicate views in subset".into()));
    }
    Ok(sorted)
}

impl AcmvModel {
    /// Builds a model over a subset of the three views.
    ///
    /// Single-view subsets skip fusion entirely (the view's prediction
    /// is the output); larger subsets fuse with `fusion` (an attention
    /// head sized to the subset, or the fixed average).
    pub fn new(
        config: &ModelConfig,
        graphs: &GraphBundle,
        views: &[ViewKind],
        fusion: FusionKind,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let views = canonical_views(views)?;
        let n = graphs.dist.node_count();
        for v in &views {
            if graphs.get(*v).node_count() != n {
                return Err(Error::Shape(format!(
                    "view {v} has {} nodes, expected {n}",
                    graphs.get(*v).node_count()
                )));
            }
        }
        if graphs.tfidf.ncols() != n {
            return Err(Error::Shape(format!(
                "tfidf profile matrix has {} columns, expected {n}",
                graphs.tfidf.ncols()
            )));
        }

        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embedding = ContextEmbedding::new(&mut store, config.embedding, &mut rng)?;

        let mut blocks = Vec::with_capacity(views.len());
        for view in &views {
            blocks.push(Self::build_block(
                &mut store,
                config,
                n,
                Some(view.name()),
                Some(graphs.get(*view).scaled_laplacian.clone()),
                &mut rng,
            )?);
        }

        let fusion_kind = fusion;
        let fusion = if views.len() == 1 {
            Fusion::Single
        } else {
            match fusion {
                FusionKind::Average => Fusion::Average,
                FusionKind::Attention => Fusion::Attention(AttentionHead::new(
                    &mut store,
                    views.len(),
                    config.embedding.total(),
                    graphs.tfidf.clone(),
                    &mut rng,
                )?),
            }
        };

        Ok(Self {
            store,
            config: config.clone(),
            node_count: n,
            views,
            blocks,
            embedding,
            fusion,
            fusion_kind,
        })
    }

    /// Temporal-only baseline: raw frames plus context feed the GRU
    /// directly, with no graph convolution and no fusion.
    pub fn temporal_only(config: &ModelConfig, node_count: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if node_count == 0 {
            return Err(Error::Config("node count must be >= 1".into()));
        }
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embedding = ContextEmbedding::new(&mut store, config.embedding, &mut rng)?;
        let block = Self::build_block(&mut store, config, node_count, None, None, &mut rng)?;
        Ok(Self {
            store,
            config: config.clone(),
            node_count,
            views: Vec::new(),
            blocks: vec![block],
            embedding,
            fusion: Fusion::Single,
            fusion_kind: FusionKind::Average,
        })
    }

    fn build_block(
        store: &mut ParamStore,
        config: &ModelConfig,
        n: usize,
        view: Option<&str>,
        scaled_laplacian: Option<Array2<f64>>,
        rng: &mut ChaCha8Rng,
    ) -> Result<ViewBlock> {
        let prefix = view.unwrap_or("temporal").to_string();
        let mut cheb = Vec::new();
        let mut features = 1usize;
        if scaled_laplacian.is_some() {
            let layer_count = config.gcn_features.len();
            for (idx, &out_features) in config.gcn_features.iter().enumerate() {
                let activation = if idx + 1 == layer_count {
                    Activation::Identity
                } else {
                    config.activation
                };
                cheb.push(ChebLayer::new(
                    store,
                    &format!("{prefix}.cheb{idx}"),
                    config.cheb_order,
                    features,
                    out_features,
                    activation,
                    config.cheb_bias,
                    rng,
                )?);
                features = out_features;
            }
        }
        let spatial_dim = n * features;
        let input_dim = spatial_dim + config.embedding.total();
        let gru = GruCell::new(
            store,
            &format!("{prefix}.gru"),
            input_dim,
            config.gru_hidden,
            rng,
        )?;
        let readout_w = store.add(
            format!("{prefix}.readout.weight"),
            glorot_uniform(config.gru_hidden, n, rng),
        )?;
        let readout_b = store.add(format!("{prefix}.readout.bias"), Array2::zeros((n, 1)))?;
        Ok(ViewBlock {
            scaled_laplacian,
            cheb,
            gru,
            readout_w,
            readout_b,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn views(&self) -> &[ViewKind] {
        &self.views
    }

    pub fn fusion_kind(&self) -> FusionKind {
        self.fusion_kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn validate_window(&self, window: &SeriesWindow) -> Result<()> {
        if window.inputs.is_empty() {
            return Err(Error::EmptyDataset("window has no input frames".into()));
        }
        for f in window.inputs.iter().chain(std::iter::once(&window.target)) {
            if f.values.len() != self.node_count {
                return Err(Error::Shape(format!(
                    "frame has {} regions, model expects {}",
                    f.values.len(),
                    self.node_count
                )));
            }
        }
        if window.contexts.len() != window.inputs.len() + 1 {
            return Err(Error::Shape(format!(
                "window has {} contexts for {} inputs; expected one per input plus target",
                window.contexts.len(),
                window.inputs.len()
            )));
        }
        Ok(())
    }

    /// Records the forward pass for one window on `g`.
    fn forward_nodes(&self, g: &mut Graph, window: &SeriesWindow) -> Result<ForwardNodes> {
        self.validate_window(window)?;
        let n = self.node_count;
        let window_len = window.inputs.len();

        let mut q_nodes = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let lt_node = block
                .scaled_laplacian
                .as_ref()
                .map(|lt| g.constant(lt.clone()));
            let mut step_inputs = Vec::with_capacity(window_len);
            for (frame, ctx) in window.inputs.iter().zip(&window.contexts) {
                let col = Array2::from_shape_fn((n, 1), |(i, _)| frame.values[i]);
                let mut h = g.constant(col);
                if let Some(lt) = lt_node {
                    for layer in &block.cheb {
                        h = layer.forward(g, lt, h);
                    }
                    let (rows, cols) = g.shape(h);
                    h = g.reshape(h, rows * cols, 1);
                }
                let e = self.embedding.embed(g, ctx);
                step_inputs.push(g.concat_rows(&[h, e]));
            }
            let hidden = block.gru.unroll(g, &step_inputs)?;
            let w = g.param(block.readout_w);
            let b = g.param(block.readout_b);
            q_nodes.push(g.dense(hidden, w, b));
        }

        let (fused, weight_node) = match &self.fusion {
            Fusion::Single => (q_nodes[0], None),
            Fusion::Average => {
                let mut acc = q_nodes[0];
                for &q in &q_nodes[1..] {
                    acc = g.add(acc, q);
                }
                (g.scale_shift(acc, 1.0 / q_nodes.len() as f64, 0.0), None)
            }
            Fusion::Attention(head) => {
                let rows: Vec<NodeId> = q_nodes.iter().map(|&q| g.transpose(q)).collect();
                let q_stack = g.concat_rows(&rows);
                let e_next = self.embedding.embed(g, window.target_context());
                let w = head.weights(g, q_stack, e_next);
                let weighted = g.hadamard(w, q_stack);
                let col_sums = g.sum_rows(weighted);
                (g.transpose(col_sums), Some(w))
            }
        };
        Ok(ForwardNodes {
            fused,
            per_view: q_nodes,
            weights: weight_node,
        })
    }

    /// Canonical `(N, 3)` weight matrix for export: fused weights land in
    /// their view's column, absent views stay zero.
    fn canonical_weights(&self, g: &Graph, nodes: &ForwardNodes) -> AttentionWeights {
        let n = self.node_count;
        let mut w = Array2::zeros((n, 3));
        match (&self.fusion, nodes.weights) {
            (Fusion::Single, _) => {
                let col = self.views.first().map(|v| view_column(*v)).unwrap_or(0);
                for i in 0..n {
                    w[[i, col]] = 1.0;
                }
                // the temporal-only baseline has no view; report uniform
                // weights so rows still sum to one
                if self.views.is_empty() {
                    for i in 0..n {
                        w[[i, 0]] = 1.0;
                    }
                }
            }
            (Fusion::Average, _) => {
                let share = 1.0 / self.views.len() as f64;
                for view in &self.views {
                    let col = view_column(*view);
                    for i in 0..n {
                        w[[i, col]] = share;
                    }
                }
            }
            (Fusion::Attention(_), Some(wn)) => {
                let wv = g.value(wn);
                for (row, view) in self.views.iter().enumerate() {
                    let col = view_column(*view);
                    for i in 0..n {
                        w[[i, col]] = wv[[row, i]];
                    }
                }
            }
            (Fusion::Attention(_), None) => unreachable!("attention always yields weights"),
        }
        AttentionWeights { w }
    }

    /// Evaluation forward pass: scaled-space prediction, per-view
    /// predictions, and the fusion weights.
    pub fn forward(&self, window: &SeriesWindow) -> Result<ForwardOutput> {
        let mut g = Graph::new(&self.store);
        let nodes = self.forward_nodes(&mut g, window)?;
        let fused = g.value(nodes.fused).column(0).to_owned();
        let mut per_view = Array2::zeros((self.node_count, self.blocks.len()));
        for (k, &q) in nodes.per_view.iter().enumerate() {
            per_view.column_mut(k).assign(&g.value(q).column(0));
        }
        let weights = self.canonical_weights(&g, &nodes);
        Ok(ForwardOutput {
            fused,
            per_view,
            weights,
        })
    }

    /// Forecast in persons: runs the scaled forward pass and inverts the
    /// scaler on the fused output.
    pub fn predict(
        &self,
        window: &SeriesWindow,
        scaler: &Scaler,
    ) -> Result<(PopulationFrame, AttentionWeights)> {
        let out = self.forward(window)?;
        out.weights.validate_simplex(1e-6)?;
        Ok((
            PopulationFrame {
                values: scaler.unscale_array(&out.fused),
                time_index: window.target.time_index,
            },
            out.weights,
        ))
    }

    /// Mini-batch Adam training with deterministic shuffling, best-epoch
    /// checkpointing on validation MAE, and early stopping.
    pub fn train(
        &mut self,
        train_windows: &[SeriesWindow],
        val_windows: &[SeriesWindow],
        scaler: &Scaler,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<TrainReport> {
        if train_windows.is_empty() || val_windows.is_empty() {
            return Err(Error::EmptyDataset(
                "training and validation splits must both be nonempty".into(),
            ));
        }
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        let started = std::time::Instant::now();
        let mut report = TrainReport {
            epochs: Vec::new(),
            best_epoch: None,
            wall_time_s: 0.0,
        };
        if cfg.epochs == 0 {
            return Ok(report);
        }

        let mut adam = AdamState::new(&self.store, cfg.adam);
        let mut best_val = f64::INFINITY;
        let mut best_snapshot = self.store.snapshot();
        let mut losses = vec![0.0f64; train_windows.len()];

        for epoch in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..train_windows.len()).collect();
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            shuffle(&mut order, &mut rng);

            for chunk in order.chunks(cfg.batch_size) {
                let scale = 1.0 / chunk.len() as f64;
                for &idx in chunk {
                    let window = &train_windows[idx];
                    let mut g = Graph::new(&self.store);
                    let nodes = self.forward_nodes(&mut g, window)?;
                    let target = g.constant(Array2::from_shape_fn(
                        (self.node_count, 1),
                        |(i, _)| window.target.values[i],
                    ));
                    let diff = g.sub(nodes.fused, target);
                    let sq = g.hadamard(diff, diff);
                    let loss_node = g.mean_all(sq);
                    losses[idx] = g.scalar(loss_node);
                    let grads = g.backward_scaled(loss_node, scale);
                    self.store.accumulate_grads(&grads);
                }
                self.store.clip_grads(cfg.clip_norm);
                adam.step(&mut self.store);
            }

            // summed in window order so the epoch loss is independent of
            // the shuffle
            let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
            let val = evaluate_model(self, val_windows, scaler)?;
            if !train_loss.is_finite() || !val.mae.is_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at epoch {epoch}: loss {train_loss}, val MAE {}",
                    val.mae
                )));
            }
            report.epochs.push(EpochStats {
                epoch,
                train_loss,
                val_mae: val.mae,
                val_rmse: val.rmse,
                val_wape: val.wape,
            });
            if val.mae < best_val {
                best_val = val.mae;
                report.best_epoch = Some(epoch);
                best_snapshot = self.store.snapshot();
            }
            if let Some(best) = report.best_epoch {
                if epoch - best >= cfg.patience {
                    break;
                }
            }
        }
        self.store.restore(&best_snapshot);
        report.wall_time_s = started.elapsed().as_secs_f64();
        Ok(report)
    }
}

impl AcmvModel {
    /// MSE loss of one forward pass against the window target, without
    /// recording gradients.
    pub fn window_loss(&self, window: &SeriesWindow) -> Result<f64> {
        let out = self.forward(window)?;
        mse_loss(&out.fused, &window.target.values)
    }

    /// Central finite-difference check of the end-to-end gradient
    /// (forward + MSE) on one window. Returns the max relative error
    /// with denominator `max(|analytic|, |numeric|, 1e-8)`; parameter
    /// values are restored exactly and gradients cleared.
    pub fn grad_check_window(&mut self, window: &SeriesWindow, eps: f64) -> Result<f64> {
        self.store.zero_grads();
        let grads = {
            let mut g = Graph::new(&self.store);
            let nodes = self.forward_nodes(&mut g, window)?;
            let target = g.constant(Array2::from_shape_fn((self.node_count, 1), |(i, _)| {
                window.target.values[i]
            }));
            let diff = g.sub(nodes.fused, target);
            let sq = g.hadamard(diff, diff);
            let loss = g.mean_all(sq);
            g.backward(loss)
        };
        self.store.accumulate_grads(&grads);
        let analytic: Vec<Array2<f64>> = self
            .store
            .ids()
            .map(|id| self.store.grad(id).clone())
            .collect();

        let mut max_rel = 0.0f64;
        for (idx, id) in self.store.ids().enumerate().collect::<Vec<_>>() {
            let dim = self.store.value(id).raw_dim();
            for i in 0..dim[0] {
                for j in 0..dim[1] {
                    let orig = self.store.value(id)[[i, j]];
                    self.store.value_mut(id)[[i, j]] = orig + eps;
                    let f_plus = self.window_loss(window)?;
                    self.store.value_mut(id)[[i, j]] = orig - eps;
                    let f_minus = self.window_loss(window)?;
                    self.store.value_mut(id)[[i, j]] = orig;

                    let numeric = (f_plus - f_minus) / (2.0 * eps);
                    let a = analytic[idx][[i, j]];
                    let denom = a.abs().max(numeric.abs()).max(1e-8);
                    max_rel = max_rel.max((a - numeric).abs() / denom);
                }
            }
        }
        self.store.zero_grads();
        Ok(max_rel)
    }
}

/// Deterministic Fisher-Yates shuffle.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

fn view_column(view: ViewKind) -> usize {
    match view {
        ViewKind::Dist => 0,
        ViewKind::Poi => 1,
        ViewKind::Transport => 2,
    }
}

struct ForwardNodes {
    fused: NodeId,
    per_view: Vec<NodeId>,
    weights: Option<NodeId>,
}

/// Evaluation-mode forward products.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Fused prediction in scaled space.
    pub fused: Array1<f64>,
    /// `(N, n_views)` per-view predictions in the model's view order.
    pub per_view: Array2<f64>,
    /// `(N, 3)` canonical fusion weights.
    pub weights: AttentionWeights,
}

/// Mean squared error between scaled vectors.
pub fn mse_loss(pred: &Array1<f64>, target: &Array1<f64>) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "loss inputs have lengths {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Early-stopping patience in epochs without a new best validation MAE.
    pub patience: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            adam: AdamConfig::default(),
            patience: 20,
            clip_norm: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_rmse: f64,
    pub val_wape: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub wall_time_s: f64,
}

/// Runs the model over scaled windows and scores the unscaled
/// predictions against the unscaled targets.
pub fn evaluate_model(
    model: &AcmvModel,
    windows: &[SeriesWindow],
    scaler: &Scaler,
) -> Result<EvalResult> {
    let (pred, truth) = prediction_block(model, windows, scaler)?;
    evaluate(&pred, &truth)
}

/// Unscaled `(T', N)` prediction and truth blocks over a window list.
pub fn prediction_block(
    model: &AcmvModel,
    windows: &[SeriesWindow],
    scaler: &Scaler,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset("no windows to evaluate".into()));
    }
    let n = model.node_count();
    let mut pred = Array2::zeros((windows.len(), n));
    let mut truth = Array2::zeros((windows.len(), n));
    for (i, w) in windows.iter().enumerate() {
        let out = model.forward(w)?;
        for j in 0..n {
            pred[[i, j]] = scaler.unscale(out.fused[j]);
            truth[[i, j]] = scaler.unscale(w.target.values[j]);
        }
    }
    Ok((pred, truth))
}
