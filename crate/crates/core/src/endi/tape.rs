//! A minimal reverse-mode tape over row-major matrices.
//!
//! Every node holds its forward value. `backward` walks the tape once in
//! reverse and returns the gradient of a scalar node with respect to every
//! node. Shapes are checked when a node is recorded; a mismatch is a bug in
//! the caller and panics.

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a * col` with `col` an m×1 column broadcast across columns.
    MulCol(Var, Var),
    /// `a + row` with `row` a 1×n row broadcast down the rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    /// Natural log of `max(x, floor)`; floored entries pass no gradient.
    Log(Var, f64),
    Abs(Var),
    ConcatCols(Var, Var),
    /// out[i] = src[index[i]], or 0 where the index is `None`.
    Gather(Var, Vec<Option<usize>>),
    /// Adds row `i` of the source into row `rows[i]` of the output. Rows
    /// whose weight column is exactly zero are skipped in the forward pass so
    /// hidden content cannot perturb the result, not even by a signed zero.
    ScatterRows {
        src: Var,
        weights: Var,
        rows: Vec<usize>,
    },
    /// Column-wise maximum; ties go to the first row.
    MaxRows(Var, Vec<usize>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    /// Forward value is fixed, gradient flows into the relaxed input.
    Straight(Var),
    SumAll(Var),
}

#[derive(Clone, Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every node on a tape.
#[derive(Clone, Debug)]
pub struct Grads {
    grads: Vec<Vec<f64>>,
}

impl Grads {
    pub fn of(&self, v: Var) -> &[f64] {
        &self.grads[v.0]
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(rows * cols, value.len(), "leaf shape");
        self.push(rows, cols, value, Op::Leaf)
    }

    /// A tensor as a matrix; leading axes fold into rows.
    pub fn tensor(&mut self, t: &Tensor) -> Var {
        let (r, c) = t.matrix_dims();
        self.leaf(r, c, t.data().to_vec())
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.leaf(1, 1, vec![v])
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn item(&self, v: Var) -> f64 {
        let n = &self.nodes[v.0];
        assert_eq!((n.rows, n.cols), (1, 1), "item() on a non-scalar");
        n.value[0]
    }

    pub fn row(&self, v: Var, i: usize) -> &[f64] {
        let n = &self.nodes[v.0];
        &n.value[i * n.cols..(i + 1) * n.cols]
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> (usize, usize) {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa, sb, "{what}: shape mismatch");
        sa
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let (r, c) = self.shape(a);
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        self.push(r, c, value, op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul: inner dimensions {k} and {k2}");
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, &y) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        self.push(m, n, out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.same_shape(a, b, "add");
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(r, c, value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.same_shape(a, b, "sub");
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        self.push(r, c, value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.same_shape(a, b, "mul");
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        self.push(r, c, value, Op::Mul(a, b))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(col), (r, 1), "mul_col: column shape");
        let (av, cv) = (self.value(a), self.value(col));
        let value = (0..r * c).map(|i| av[i] * cv[i / c]).collect();
        self.push(r, c, value, Op::MulCol(a, col))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "add_row: row shape");
        let (av, rv) = (self.value(a), self.value(row));
        let value = (0..r * c).map(|i| av[i] + rv[i % c]).collect();
        self.push(r, c, value, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, Op::Scale(a, k), |x| k * x)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        self.map(a, Op::AddScalar(a), |x| x + k)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, Op::Softplus(a), softplus)
    }

    pub fn log(&mut self, a: Var, floor: f64) -> Var {
        self.map(a, Op::Log(a, floor), |x| x.max(floor).ln())
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, Op::Abs(a), f64::abs)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (r, ca) = self.shape(a);
        let (r2, cb) = self.shape(b);
        assert_eq!(r, r2, "concat_cols: row counts");
        let (av, bv) = (self.value(a), self.value(b));
        let mut value = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            value.extend_from_slice(&av[i * ca..(i + 1) * ca]);
            value.extend_from_slice(&bv[i * cb..(i + 1) * cb]);
        }
        self.push(r, ca + cb, value, Op::ConcatCols(a, b))
    }

    pub fn gather(&mut self, src: Var, index: Vec<Option<usize>>, rows: usize, cols: usize) -> Var {
        assert_eq!(index.len(), rows * cols, "gather: index length");
        let sv = self.value(src);
        let value = index.iter().map(|i| i.map_or(0.0, |i| sv[i])).collect();
        self.push(rows, cols, value, Op::Gather(src, index))
    }

    /// Rows `rows` of `src` as a new matrix.
    pub fn pick_rows(&mut self, src: Var, rows: &[usize]) -> Var {
        let (r, c) = self.shape(src);
        assert!(rows.iter().all(|&i| i < r), "pick_rows: row out of range");
        let index = rows.iter().flat_map(|&i| (0..c).map(move |j| Some(i * c + j))).collect();
        self.gather(src, index, rows.len(), c)
    }

    /// Column `j` of `src` as an m×1 column.
    pub fn pick_col(&mut self, src: Var, j: usize) -> Var {
        let (r, c) = self.shape(src);
        assert!(j < c, "pick_col: column out of range");
        let index = (0..r).map(|i| Some(i * c + j)).collect();
        self.gather(src, index, r, 1)
    }

    /// 3×3 same-padded neighbourhoods of an (h·w)×c map: each output row
    /// holds the nine neighbour rows in row-major offset order, zero off-grid.
    pub fn patches3x3(&mut self, src: Var, h: usize, w: usize) -> Var {
        let (r, c) = self.shape(src);
        assert_eq!(r, h * w, "patches3x3: map size");
        let mut index = Vec::with_capacity(r * 9 * c);
        for row in 0..h {
            for col in 0..w {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                        let inside = (0..h as i64).contains(&nr) && (0..w as i64).contains(&nc);
                        for k in 0..c {
                            index.push(inside.then(|| (nr as usize * w + nc as usize) * c + k));
                        }
                    }
                }
            }
        }
        self.gather(src, index, r, 9 * c)
    }

    pub fn scatter_rows(&mut self, src: Var, weights: Var, rows: Vec<usize>, out_rows: usize) -> Var {
        let (n, c) = self.shape(src);
        assert_eq!(self.shape(weights), (n, 1), "scatter_rows: weight column");
        assert_eq!(rows.len(), n, "scatter_rows: one target per row");
        assert!(rows.iter().all(|&r| r < out_rows), "scatter_rows: target out of range");
        let (sv, wv) = (self.value(src), self.value(weights));
        let mut value = vec![0.0; out_rows * c];
        for (i, &r) in rows.iter().enumerate() {
            let wgt = wv[i];
            if wgt == 0.0 {
                continue;
            }
            for j in 0..c {
                value[r * c + j] += wgt * sv[i * c + j];
            }
        }
        self.push(out_rows, c, value, Op::ScatterRows { src, weights, rows })
    }

    pub fn max_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        assert!(r > 0, "max_rows: empty input");
        let av = self.value(a);
        let mut arg = vec![0usize; c];
        let mut value = av[..c].to_vec();
        for i in 1..r {
            for j in 0..c {
                if av[i * c + j] > value[j] {
                    value[j] = av[i * c + j];
                    arg[j] = i;
                }
            }
        }
        self.push(1, c, value, Op::MaxRows(a, arg))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let av = self.value(a);
        let value = (0..r).flat_map(|i| softmax(&av[i * c..(i + 1) * c])).collect();
        self.push(r, c, value, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let av = self.value(a);
        let value = (0..r).flat_map(|i| log_softmax(&av[i * c..(i + 1) * c])).collect();
        self.push(r, c, value, Op::LogSoftmaxRows(a))
    }

    /// Straight-through: the value is `forward`, the gradient goes to `relaxed`.
    pub fn straight(&mut self, relaxed: Var, forward: Vec<f64>) -> Var {
        let (r, c) = self.shape(relaxed);
        assert_eq!(forward.len(), r * c, "straight: forward length");
        self.push(r, c, forward, Op::Straight(relaxed))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(1, 1, vec![s], Op::SumAll(a))
    }

    /// Σ weight·term over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(f64, Var)]) -> Var {
        let mut acc = self.scalar(0.0);
        for &(w, t) in terms {
            let s = self.scale(t, w);
            acc = self.add(acc, s);
        }
        acc
    }

    /// Gradient of scalar `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        if self.shape(out) != (1, 1) {
            return Err(Error::Shape("backward needs a scalar output".into()));
        }
        let mut g: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        g[out.0][0] = 1.0;
        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) || g[idx].iter().all(|&x| x == 0.0) {
                continue;
            }
            let up = std::mem::take(&mut g[idx]);
            let y = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    let (av, bv) = (self.value(*a), self.value(*b));
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += up[i * n + j] * bv[p * n + j];
                            }
                            g[a.0][i * k + p] += s;
                        }
                    }
                    for p in 0..k {
                        for i in 0..m {
                            let x = av[i * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                g[b.0][p * n + j] += x * up[i * n + j];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut g[a.0], &up, 1.0);
                    acc(&mut g[b.0], &up, 1.0);
                }
                Op::Sub(a, b) => {
                    acc(&mut g[a.0], &up, 1.0);
                    acc(&mut g[b.0], &up, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    for i in 0..up.len() {
                        g[a.0][i] += up[i] * bv[i];
                        g[b.0][i] += up[i] * av[i];
                    }
                }
                Op::MulCol(a, col) => {
                    let c = node.cols;
                    let (av, cv) = (self.value(*a), self.value(*col));
                    for i in 0..up.len() {
                        g[a.0][i] += up[i] * cv[i / c];
                        g[col.0][i / c] += up[i] * av[i];
                    }
                }
                Op::AddRow(a, row) => {
                    let c = node.cols;
                    acc(&mut g[a.0], &up, 1.0);
                    for i in 0..up.len() {
                        g[row.0][i % c] += up[i];
                    }
                }
                Op::Scale(a, k) => acc(&mut g[a.0], &up, *k),
                Op::AddScalar(a) => acc(&mut g[a.0], &up, 1.0),
                Op::Tanh(a) => {
                    for i in 0..up.len() {
                        g[a.0][i] += up[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    for i in 0..up.len() {
                        g[a.0][i] += up[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Softplus(a) => {
                    let av = self.value(*a);
                    for i in 0..up.len() {
                        g[a.0][i] += up[i] * sigmoid(av[i]);
                    }
                }
                Op::Log(a, floor) => {
                    let av = self.value(*a);
                    for i in 0..up.len() {
                        if av[i] > *floor {
                            g[a.0][i] += up[i] / av[i];
                        }
                    }
                }
                Op::Abs(a) => {
                    let av = self.value(*a);
                    for i in 0..up.len() {
                        g[a.0][i] += up[i] * sign(av[i]);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.shape(*a).1;
                    let cb = self.shape(*b).1;
                    for i in 0..node.rows {
                        for j in 0..ca {
                            g[a.0][i * ca + j] += up[i * (ca + cb) + j];
                        }
                        for j in 0..cb {
                            g[b.0][i * cb + j] += up[i * (ca + cb) + ca + j];
                        }
                    }
                }
                Op::Gather(src, index) => {
                    for (i, ix) in index.iter().enumerate() {
                        if let Some(s) = ix {
                            g[src.0][*s] += up[i];
                        }
                    }
                }
                Op::ScatterRows { src, weights, rows } => {
                    let c = node.cols;
                    let (sv, wv) = (self.value(*src), self.value(*weights));
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dw = 0.0;
                        for j in 0..c {
                            g[src.0][i * c + j] += wv[i] * up[r * c + j];
                            dw += sv[i * c + j] * up[r * c + j];
                        }
                        g[weights.0][i] += dw;
                    }
                }
                Op::MaxRows(a, arg) => {
                    let c = node.cols;
                    for j in 0..c {
                        g[a.0][arg[j] * c + j] += up[j];
                    }
                }
                Op::SoftmaxRows(a) => {
                    let c = node.cols;
                    for i in 0..node.rows {
                        let r = i * c..(i + 1) * c;
                        let dot: f64 = up[r.clone()].iter().zip(&y[r.clone()]).map(|(u, p)| u * p).sum();
                        for j in r {
                            g[a.0][j] += y[j] * (up[j] - dot);
                        }
                    }
                }
                Op::LogSoftmaxRows(a) => {
                    let c = node.cols;
                    for i in 0..node.rows {
                        let r = i * c..(i + 1) * c;
                        let total: f64 = up[r.clone()].iter().sum();
                        for j in r {
                            g[a.0][j] += up[j] - y[j].exp() * total;
                        }
                    }
                }
                Op::Straight(a) => acc(&mut g[a.0], &up, 1.0),
                Op::SumAll(a) => {
                    for x in g[a.0].iter_mut() {
                        *x += up[0];
                    }
                }
            }
            g[idx] = up;
        }
        Ok(Grads { grads: g })
    }
}

fn acc(dst: &mut [f64], src: &[f64], k: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    xs.iter().map(|x| x - lse).collect()
}
