//! Reverse-mode autodiff on an explicit tape of matrix operations.
//!
//! A [`Graph`] records one forward pass. Nodes are f64 matrices; column
//! vectors are `(d, 1)` matrices. `backward` walks nodes in reverse
//! creation order, which is deterministic for a deterministic forward
//! pass, and returns per-parameter gradients.
//!
//! Shape agreement between operands is a programming invariant of the
//! callers, so shape violations panic rather than returning errors; the
//! public model APIs validate user-facing dimensions before recording.

use ndarray::{s, Array2};

use super::{ParamGrads, ParamId, ParamStore};

/// Handle to one node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Leaf reading a parameter from the store.
    Param(ParamId),
    /// Leaf holding a constant; never receives gradient.
    Const,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    /// Adds a `(r, 1)` column vector to every column of a `(r, c)` matrix.
    AddColVec(NodeId, NodeId),
    /// `alpha * x + beta`, elementwise.
    ScaleShift(NodeId, f64, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    /// Softmax applied independently to each column.
    SoftmaxCols(NodeId),
    ConcatRows(Vec<NodeId>),
    Transpose(NodeId),
    Reshape(NodeId),
    /// Repeats a `(r, 1)` column across `c` columns.
    BroadcastCols(NodeId),
    /// Sums over rows, producing `(1, c)`.
    SumRows(NodeId),
    /// Extracts row `idx` of a table node as a `(d, 1)` column.
    EmbedRow(NodeId, usize),
    /// Mean over all entries, producing `(1, 1)`.
    MeanAll(NodeId),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a node. Parameter leaves read through to the store.
    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        let node = &self.nodes[id.0];
        match node.op {
            Op::Param(pid) => self.store.value(pid),
            _ => &node.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.value(id).dim()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        id
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.push(Array2::zeros((0, 0)), Op::Param(id), true)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Const, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        assert_eq!(ac, br, "matmul shape mismatch: ({ar},{ac}) x ({br},{bc})");
        let v = self.value(a).dot(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    fn binary_elementwise(
        &mut self,
        a: NodeId,
        b: NodeId,
        f: impl Fn(&Array2<f64>, &Array2<f64>) -> Array2<f64>,
        op: Op,
    ) -> NodeId {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "elementwise shape mismatch: {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
        let v = f(self.value(a), self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, op, ng)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_elementwise(a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    pub fn add_col_vec(&mut self, mat: NodeId, col: NodeId) -> NodeId {
        let (r, _c) = self.shape(mat);
        assert_eq!(
            self.shape(col),
            (r, 1),
            "bias column must be ({r}, 1), got {:?}",
            self.shape(col)
        );
        let v = self.value(mat) + self.value(col);
        let ng = self.needs(mat) || self.needs(col);
        self.push(v, Op::AddColVec(mat, col), ng)
    }

    pub fn scale_shift(&mut self, x: NodeId, alpha: f64, beta: f64) -> NodeId {
        let v = self.value(x).mapv(|e| alpha * e + beta);
        let ng = self.needs(x);
        self.push(v, Op::ScaleShift(x, alpha, beta), ng)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).mapv(|e| 1.0 / (1.0 + (-e).exp()));
        let ng = self.needs(x);
        self.push(v, Op::Sigmoid(x), ng)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).mapv(f64::tanh);
        let ng = self.needs(x);
        self.push(v, Op::Tanh(x), ng)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).mapv(|e| if e > 0.0 { e } else { 0.0 });
        let ng = self.needs(x);
        self.push(v, Op::Relu(x), ng)
    }

    /// Column-wise softmax with max subtraction.
    pub fn softmax_cols(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (r, c) = xv.dim();
        let mut v = Array2::zeros((r, c));
        for j in 0..c {
            let col = xv.column(j);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for i in 0..r {
                let e = (col[i] - max).exp();
                v[[i, j]] = e;
                sum += e;
            }
            for i in 0..r {
                v[[i, j]] /= sum;
            }
        }
        let ng = self.needs(x);
        self.push(v, Op::SoftmaxCols(x), ng)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of zero nodes");
        let cols = self.shape(parts[0]).1;
        let rows: usize = parts
            .iter()
            .map(|&p| {
                let (r, c) = self.shape(p);
                assert_eq!(c, cols, "concat_rows column mismatch");
                r
            })
            .sum();
        let mut v = Array2::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let pv = self.value(p);
            v.slice_mut(s![at..at + pv.nrows(), ..]).assign(pv);
            at += pv.nrows();
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(v, Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).t().to_owned();
        let ng = self.needs(x);
        self.push(v, Op::Transpose(x), ng)
    }

    /// Row-major reshape to `(rows, cols)`.
    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> NodeId {
        let xv = self.value(x);
        assert_eq!(
            xv.len(),
            rows * cols,
            "reshape element count mismatch: {} -> ({rows}, {cols})",
            xv.len()
        );
        let v = Array2::from_shape_vec((rows, cols), xv.iter().copied().collect())
            .expect("element count checked");
        let ng = self.needs(x);
        self.push(v, Op::Reshape(x), ng)
    }

    pub fn broadcast_cols(&mut self, x: NodeId, cols: usize) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.ncols(), 1, "broadcast_cols expects a column vector");
        let mut v = Array2::zeros((xv.nrows(), cols));
        for j in 0..cols {
            v.column_mut(j).assign(&xv.column(0));
        }
        let ng = self.needs(x);
        self.push(v, Op::BroadcastCols(x), ng)
    }

    pub fn sum_rows(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let v = xv
            .sum_axis(ndarray::Axis(0))
            .insert_axis(ndarray::Axis(0));
        let ng = self.needs(x);
        self.push(v, Op::SumRows(x), ng)
    }

    /// Row `idx` of a table node, as a `(d, 1)` column vector.
    pub fn embed_row(&mut self, table: NodeId, idx: usize) -> NodeId {
        let tv = self.value(table);
        assert!(
            idx < tv.nrows(),
            "embedding row {idx} out of range for table with {} rows",
            tv.nrows()
        );
        let v = tv
            .row(idx)
            .to_owned()
            .insert_axis(ndarray::Axis(1));
        let ng = self.needs(table);
        self.push(v, Op::EmbedRow(table, idx), ng)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let v = Array2::from_elem((1, 1), xv.sum() / xv.len() as f64);
        let ng = self.needs(x);
        self.push(v, Op::MeanAll(x), ng)
    }

    /// `W^T x + b` for `W: (p, q)`, `x: (p, 1)`, `b: (q, 1)`.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let wt = self.transpose(w);
        let wx = self.matmul(wt, x);
        self.add(wx, b)
    }

    /// Scalar value of a `(1, 1)` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "scalar() on non-scalar node");
        v[[0, 0]]
    }

    /// Backpropagates from a scalar node, seeding with `seed` (1.0 for a
    /// plain loss; `1/batch` when accumulating a batch mean).
    pub fn backward_scaled(&self, loss: NodeId, seed: f64) -> ParamGrads {
        assert_eq!(
            self.value(loss).dim(),
            (1, 1),
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), seed));
        let mut out = ParamGrads::new(self.store);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Param(pid) => out.accumulate(*pid, &g),
                Op::Const => {}
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let da = g.dot(&self.value(*b).t());
                        accumulate(&mut grads[a.0], da);
                    }
                    if self.needs(*b) {
                        let db = self.value(*a).t().dot(&g);
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], -&g);
                    }
                }
                Op::Hadamard(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], &g * self.value(*b));
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], &g * self.value(*a));
                    }
                }
                Op::AddColVec(mat, col) => {
                    if self.needs(*mat) {
                        accumulate(&mut grads[mat.0], g.clone());
                    }
                    if self.needs(*col) {
                        let dc = g
                            .sum_axis(ndarray::Axis(1))
                            .insert_axis(ndarray::Axis(1));
                        accumulate(&mut grads[col.0], dc);
                    }
                }
                Op::ScaleShift(x, alpha, _beta) => {
                    if self.needs(*x) {
                        accumulate(&mut grads[x.0], &g * *alpha);
                    }
                }
                Op::Sigmoid(x) => {
                    if self.needs(*x) {
                        let y = &self.nodes[i].value;
                        accumulate(&mut grads[x.0], &g * &(y * &y.mapv(|e| 1.0 - e)));
                    }
                }
                Op::Tanh(x) => {
                    if self.needs(*x) {
                        let y = &self.nodes[i].value;
                        accumulate(&mut grads[x.0], &g * &y.mapv(|e| 1.0 - e * e));
                    }
                }
                Op::Relu(x) => {
                    if self.needs(*x) {
                        let xin = self.value(*x);
                        let mut dg = g.clone();
                        ndarray::Zip::from(&mut dg).and(xin).for_each(|d, &v| {
                            if v <= 0.0 {
                                *d = 0.0;
                            }
                        });
                        accumulate(&mut grads[x.0], dg);
                    }
                }
                Op::SoftmaxCols(x) => {
                    if self.needs(*x) {
                        let y = &self.nodes[i].value;
                        let (r, c) = y.dim();
                        let mut dx = Array2::zeros((r, c));
                        for j in 0..c {
                            let dot: f64 =
                                (0..r).map(|k| y[[k, j]] * g[[k, j]]).sum();
                            for k in 0..r {
                                dx[[k, j]] = y[[k, j]] * (g[[k, j]] - dot);
                            }
                        }
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let rows = self.shape(p).0;
                        if self.needs(p) {
                            let slice = g.slice(s![at..at + rows, ..]).to_owned();
                            accumulate(&mut grads[p.0], slice);
                        }
                        at += rows;
                    }
                }
                Op::Transpose(x) => {
                    if self.needs(*x) {
                        accumulate(&mut grads[x.0], g.t().to_owned());
                    }
                }
                Op::Reshape(x) => {
                    if self.needs(*x) {
                        let (r, c) = self.shape(*x);
                        let back =
                            Array2::from_shape_vec((r, c), g.iter().copied().collect())
                                .expect("same element count");
                        accumulate(&mut grads[x.0], back);
                    }
                }
                Op::BroadcastCols(x) => {
                    if self.needs(*x) {
                        let dc = g
                            .sum_axis(ndarray::Axis(1))
                            .insert_axis(ndarray::Axis(1));
                        accumulate(&mut grads[x.0], dc);
                    }
                }
                Op::SumRows(x) => {
                    if self.needs(*x) {
                        let (r, _c) = self.shape(*x);
                        let mut dx = Array2::zeros(self.shape(*x));
                        for i2 in 0..r {
                            dx.row_mut(i2).assign(&g.row(0));
                        }
                        accumulate(&mut grads[x.0], dx);
                    }
                }
                Op::EmbedRow(table, idx) => {
                    if self.needs(*table) {
                        let mut dt = Array2::zeros(self.shape(*table));
                        for (k, &gv) in g.column(0).iter().enumerate() {
                            dt[[*idx, k]] = gv;
                        }
                        accumulate(&mut grads[table.0], dt);
                    }
                }
                Op::MeanAll(x) => {
                    if self.needs(*x) {
                        let (r, c) = self.shape(*x);
                        let per = g[[0, 0]] / (r * c) as f64;
                        accumulate(&mut grads[x.0], Array2::from_elem((r, c), per));
                    }
                }
            }
        }
        out
    }

    pub fn backward(&self, loss: NodeId) -> ParamGrads {
        self.backward_scaled(loss, 1.0)
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;
    use ndarray::array;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn dense_identity_and_bias() {
        let mut store = ParamStore::new();
        let w = store.add("w", Array2::eye(2)).unwrap();
        let b = store.add("b", array![[1.0], [1.0]]).unwrap();
        let mut g = Graph::new(&store);
        let x = g.constant(array![[1.0], [2.0]]);
        let wn = g.param(w);
        let bn = g.param(b);
        let y = g.dense(x, wn, bn);
        assert_eq!(g.value(y), &array![[2.0], [3.0]]);

        // x = 0 -> y = b
        let mut g = Graph::new(&store);
        let x0 = g.constant(array![[0.0], [0.0]]);
        let wn = g.param(w);
        let bn = g.param(b);
        let y0 = g.dense(x0, wn, bn);
        assert_eq!(g.value(y0), store.value(b));
    }

    #[test]
    fn softmax_values() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        // equal logits -> uniform
        let z = g.constant(array![[5.0], [5.0], [5.0]]);
        let s = g.softmax_cols(z);
        for i in 0..3 {
            assert!((g.value(s)[[i, 0]] - 1.0 / 3.0).abs() < 1e-12);
        }
        // extreme logits do not overflow
        let z = g.constant(array![[1000.0], [0.0], [0.0]]);
        let s = g.softmax_cols(z);
        assert!((g.value(s)[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(g.value(s).iter().all(|v| v.is_finite()));
        // ln(1), ln(2), ln(3) -> 1/6, 2/6, 3/6
        let z = g.constant(array![[1.0f64.ln()], [2.0f64.ln()], [3.0f64.ln()]]);
        let s = g.softmax_cols(z);
        for (i, expect) in [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0].iter().enumerate() {
            assert!((g.value(s)[[i, 0]] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_row_gradient_accumulates() {
        let mut store = ParamStore::new();
        let t = store
            .add("table", Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64))
            .unwrap();
        let mut g = Graph::new(&store);
        let tn = g.param(t);
        let e1 = g.embed_row(tn, 2);
        let e2 = g.embed_row(tn, 2);
        let sum = g.add(e1, e2);
        let sq = g.mean_all(sum);
        let grads = g.backward(sq);
        let gt = grads.get(t).unwrap();
        // two lookups of the same row: gradient doubles
        for k in 0..3 {
            assert!((gt[[2, k]] - 2.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(gt[[0, 0]], 0.0);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn embed_row_bounds() {
        let mut store = ParamStore::new();
        let t = store.add("table", Array2::zeros((4, 3))).unwrap();
        let mut g = Graph::new(&store);
        let tn = g.param(t);
        let _ = g.embed_row(tn, 4);
    }

    /// Randomized finite-difference check for one op composition.
    fn check_unary<F>(name: &str, build: F, trials: usize, positive_input: bool)
    where
        F: Fn(&mut Graph, NodeId) -> NodeId,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..trials {
            let r = rng.gen_range(1..5);
            let c = rng.gen_range(1..5);
            let mut store = ParamStore::new();
            let mut init = randn(r, c, &mut rng);
            if positive_input {
                // keep relu inputs away from the kink
                init.mapv_inplace(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
            }
            let x = store.add("x", init).unwrap();
            {
                let mut g = Graph::new(&store);
                let xn = g.param(x);
                let y = build(&mut g, xn);
                let loss = g.mean_all(y);
                let grads = g.backward(loss);
                store.accumulate_grads(&grads);
            }
            let err = grad_check(
                &mut store,
                |s| {
                    let mut g = Graph::new(s);
                    let xn = g.param(x);
                    let y = build(&mut g, xn);
                    let loss = g.mean_all(y);
                    g.scalar(loss)
                },
                1e-6,
            );
            assert!(err < 1e-4, "{name} trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn gradcheck_sigmoid() {
        check_unary("sigmoid", |g, x| g.sigmoid(x), 20, false);
    }

    #[test]
    fn gradcheck_tanh() {
        check_unary("tanh", |g, x| g.tanh(x), 20, false);
    }

    #[test]
    fn gradcheck_relu() {
        check_unary("relu", |g, x| g.relu(x), 20, true);
    }

    #[test]
    fn gradcheck_softmax_cols() {
        check_unary(
            "softmax",
            |g, x| {
                let s = g.softmax_cols(x);
                // weight entries unevenly so grads differ per row
                let w = g.constant(Array2::from_shape_fn(g.shape(s), |(i, j)| {
                    (i + 2 * j + 1) as f64
                }));
                g.hadamard(s, w)
            },
            20,
            false,
        );
    }

    #[test]
    fn gradcheck_scale_shift_reshape_transpose() {
        check_unary(
            "scale/reshape/transpose",
            |g, x| {
                let (r, c) = g.shape(x);
                let y = g.scale_shift(x, -1.7, 0.3);
                let t = g.transpose(y);
                g.reshape(t, r * c, 1)
            },
            20,
            false,
        );
    }

    #[test]
    fn gradcheck_matmul_dense_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let p = rng.gen_range(1..5);
            let q = rng.gen_range(1..5);
            let mut store = ParamStore::new();
            let w = store.add("w", randn(p, q, &mut rng)).unwrap();
            let b = store.add("b", randn(q, 1, &mut rng)).unwrap();
            let x = store.add("x", randn(p, 1, &mut rng)).unwrap();
            {
                let mut g = Graph::new(&store);
                let (wn, bn, xn) = (g.param(w), g.param(b), g.param(x));
                let y = g.dense(xn, wn, bn);
                let t = g.tanh(y);
                let loss = g.mean_all(t);
                let grads = g.backward(loss);
                store.accumulate_grads(&grads);
            }
            let err = grad_check(
                &mut store,
                |s| {
                    let mut g = Graph::new(s);
                    let (wn, bn, xn) = (g.param(w), g.param(b), g.param(x));
                    let y = g.dense(xn, wn, bn);
                    let t = g.tanh(y);
                    let loss = g.mean_all(t);
                    g.scalar(loss)
                },
                1e-6,
            );
            assert!(err < 1e-4, "dense trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn gradcheck_concat_broadcast_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..20 {
            let r = rng.gen_range(1..4);
            let c = rng.gen_range(2..5);
            let mut store = ParamStore::new();
            let a = store.add("a", randn(r, c, &mut rng)).unwrap();
            let v = store.add("v", randn(r, 1, &mut rng)).unwrap();
            let run = |s: &ParamStore| -> (f64, Option<ParamGrads>) {
                let mut g = Graph::new(s);
                let an = g.param(a);
                let vn = g.param(v);
                let bv = g.broadcast_cols(vn, c);
                let cat = g.concat_rows(&[an, bv]);
                let sums = g.sum_rows(cat);
                let sq = g.hadamard(sums, sums);
                let loss = g.mean_all(sq);
                let grads = g.backward(loss);
                (g.scalar(loss), Some(grads))
            };
            let (_, grads) = run(&store);
            store.accumulate_grads(&grads.unwrap());
            let err = grad_check(&mut store, |s| run(s).0, 1e-6);
            assert!(err < 1e-4, "concat trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let z = g.constant(array![[0.3], [-1.2], [2.4]]);
        let zs = g.scale_shift(z, 1.0, 17.5);
        let s1 = g.softmax_cols(z);
        let s2 = g.softmax_cols(zs);
        for i in 0..3 {
            assert!((g.value(s1)[[i, 0]] - g.value(s2)[[i, 0]]).abs() < 1e-12);
        }
    }
}
