//! The computation tape and its operations.

use std::sync::Arc;

use lpssl_core::sparse::CsrMatrix;
use ndarray::{Axis, Zip};

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::{Mat, EPS};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    MatMulNT(usize, usize),
    SpMM(Arc<CsrMatrix>, usize),
    ScaleRows(Arc<Vec<f64>>, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    MulCol(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    Elu(usize),
    Prelu(usize, usize),
    Sigmoid(usize),
    LogSigmoid(usize),
    Log(usize),
    Exp(usize),
    RowL2Normalize(usize),
    RowSum(usize),
    LogSumExpRows(usize),
    Sum(usize),
    Mean(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    GatherRows(usize, Arc<Vec<usize>>),
    StandardizeCols(usize, f64),
    StandardizeRows(usize),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
    /// Saved forward quantities: column/row means, inverse std, norms.
    aux: Option<(Mat, Mat)>,
}

/// Memory accounting over every value recorded so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TapeStats {
    pub nodes: usize,
    /// Sum of element counts of all recorded values (all stay alive until
    /// the tape is dropped, so this is the forward peak).
    pub live_elements: usize,
    pub largest_elements: usize,
    pub largest_shape: (usize, usize),
}

impl TapeStats {
    pub fn live_bytes(&self) -> usize {
        self.live_elements * std::mem::size_of::<f64>()
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    stats: TapeStats,
}

fn same_shape(op: &str, a: &Mat, b: &Mat) {
    assert_eq!(a.dim(), b.dim(), "{op}: shape mismatch {:?} vs {:?}", a.dim(), b.dim());
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

fn column(v: ndarray::Array1<f64>) -> Mat {
    v.insert_axis(Axis(1))
}

fn row(v: ndarray::Array1<f64>) -> Mat {
    v.insert_axis(Axis(0))
}

/// Standardize along `axis` (0: per column, 1: per row) with population
/// variance. Returns `(x_hat, mean, inv_std)`; mean and inv_std keep the
/// reduced axis with length 1.
fn standardize(x: &Mat, axis: Axis, eps: f64) -> (Mat, Mat, Mat) {
    let len = x.len_of(axis) as f64;
    let mean = x.sum_axis(axis).insert_axis(axis) / len;
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(axis).insert_axis(axis) / len;
    let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
    (centered * &inv_std, mean, inv_std)
}

fn standardize_backward(g: &Mat, x_hat: &Mat, inv_std: &Mat, axis: Axis) -> Mat {
    let len = x_hat.len_of(axis) as f64;
    let sum_g = g.sum_axis(axis).insert_axis(axis);
    let sum_gx = (g * x_hat).sum_axis(axis).insert_axis(axis);
    (g * len - &sum_g - x_hat * &sum_gx) * inv_std / len
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Var {
        self.push_aux(value, op, needs_grad, None)
    }

    fn push_aux(&mut self, value: Mat, op: Op, needs_grad: bool, aux: Option<(Mat, Mat)>) -> Var {
        let elems = value.len();
        self.stats.nodes += 1;
        self.stats.live_elements += elems;
        if elems > self.stats.largest_elements {
            self.stats.largest_elements = elems;
            self.stats.largest_shape = value.dim();
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            aux,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// The single entry of a 1x1 value.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.dim(), (1, 1), "scalar: value is {:?}", m.dim());
        m[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.ng(v.0)
    }

    pub fn stats(&self) -> TapeStats {
        self.stats
    }

    /// Shapes of every recorded value, in recording order.
    pub fn shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().map(|n| n.value.dim())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that never receives gradients.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Same value as `v`, cut from the backward graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    /// Record the current value of a stored parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.ncols(), y.nrows(), "matmul: {:?} x {:?}", x.dim(), y.dim());
        let out = x.dot(y);
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(out, Op::MatMul(a.0, b.0), ng)
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.ncols(), y.ncols(), "matmul_nt: {:?} x {:?}^T", x.dim(), y.dim());
        let out = x.dot(&y.t());
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(out, Op::MatMulNT(a.0, b.0), ng)
    }

    /// Sparse-dense product `s * b`; `s` is a constant.
    pub fn sparse_matmul(&mut self, s: &Arc<CsrMatrix>, b: Var) -> Var {
        let x = self.value(b);
        assert_eq!(s.cols(), x.nrows(), "sparse_matmul: {}x{} x {:?}", s.rows(), s.cols(), x.dim());
        let width = x.ncols();
        let dense = x.as_standard_layout();
        let out = s.mul_dense(dense.as_slice().expect("standard layout"), width);
        let out = Mat::from_shape_vec((s.rows(), width), out).expect("shape");
        let ng = self.ng(b.0);
        self.push(out, Op::SpMM(Arc::clone(s), b.0), ng)
    }

    /// `diag(d) * b`; `d` is a constant.
    pub fn scale_rows(&mut self, d: &Arc<Vec<f64>>, b: Var) -> Var {
        let x = self.value(b);
        assert_eq!(d.len(), x.nrows(), "scale_rows: {} vs {:?}", d.len(), x.dim());
        let dcol = column(ndarray::Array1::from(d.as_ref().clone()));
        let out = x * &dcol;
        let ng = self.ng(b.0);
        self.push(out, Op::ScaleRows(Arc::clone(d), b.0), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        same_shape("add", self.value(a), self.value(b));
        let out = self.value(a) + self.value(b);
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(out, Op::Add(a.0, b.0), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        same_shape("sub", self.value(a), self.value(b));
        let out = self.value(a) - self.value(b);
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(out, Op::Sub(a.0, b.0), ng)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        same_shape("mul", self.value(a), self.value(b));
        let out = self.value(a) * self.value(b);
        let ng = self.ng(a.0) || self.ng(b.0);
        self.push(out, Op::Mul(a.0, b.0), ng)
    }

    /// `a + r` with the `1 x c` row `r` broadcast over rows.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let (x, y) = (self.value(a), self.value(r));
        assert_eq!(y.dim(), (1, x.ncols()), "add_row: {:?} + {:?}", x.dim(), y.dim());
        let out = x + y;
        let ng = self.ng(a.0) || self.ng(r.0);
        self.push(out, Op::AddRow(a.0, r.0), ng)
    }

    /// `a * r` with the `1 x c` row `r` broadcast over rows.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Var {
        let (x, y) = (self.value(a), self.value(r));
        assert_eq!(y.dim(), (1, x.ncols()), "mul_row: {:?} * {:?}", x.dim(), y.dim());
        let out = x * y;
        let ng = self.ng(a.0) || self.ng(r.0);
        self.push(out, Op::MulRow(a.0, r.0), ng)
    }

    /// `a * c` with the `n x 1` column `c` broadcast over columns.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let (x, y) = (self.value(a), self.value(c));
        assert_eq!(y.dim(), (x.nrows(), 1), "mul_col: {:?} * {:?}", x.dim(), y.dim());
        let out = x * y;
        let ng = self.ng(a.0) || self.ng(c.0);
        self.push(out, Op::MulCol(a.0, c.0), ng)
    }

    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a) * s;
        let ng = self.ng(a.0);
        self.push(out, Op::Scale(a.0, s), ng)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a) + s;
        let ng = self.ng(a.0);
        self.push(out, Op::AddScalar(a.0), ng)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scalar_mul(a, -1.0)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).mapv(f);
        let ng = self.ng(a.0);
        self.push(out, op, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a.0))
    }

    /// ELU with `alpha = 1`.
    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { x.exp_m1() }, Op::Elu(a.0))
    }

    /// Leaky ReLU with a learnable `1 x 1` slope.
    pub fn prelu(&mut self, a: Var, slope: Var) -> Var {
        assert_eq!(self.shape(slope), (1, 1), "prelu: slope must be 1x1");
        let s = self.scalar(slope);
        let out = self.value(a).mapv(|x| if x > 0.0 { x } else { s * x });
        let ng = self.ng(a.0) || self.ng(slope.0);
        self.push(out, Op::Prelu(a.0, slope.0), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a.0))
    }

    /// Numerically stable `ln(sigmoid(x))`.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, log_sigmoid, Op::LogSigmoid(a.0))
    }

    /// `ln(max(x, 1e-12))`.
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(EPS).ln(), Op::Log(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a.0))
    }

    /// Divide each row by `max(||row||_2, 1e-12)`.
    pub fn row_l2_normalize(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(EPS));
        let norms = column(norms);
        let out = x / &norms;
        let ng = self.ng(a.0);
        let raw = column(x.map_axis(Axis(1), |r| r.dot(&r).sqrt()));
        self.push_aux(out, Op::RowL2Normalize(a.0), ng, Some((norms, raw)))
    }

    /// `n x 1` column of row sums.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let out = column(self.value(a).sum_axis(Axis(1)));
        let ng = self.ng(a.0);
        self.push(out, Op::RowSum(a.0), ng)
    }

    /// `n x 1` column of `ln sum_j exp(x_ij)`.
    pub fn logsumexp_rows(&mut self, a: Var) -> Var {
        let out = column(self.value(a).map_axis(Axis(1), |r| {
            let m = r.fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + r.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
        }));
        let ng = self.ng(a.0);
        self.push(out, Op::LogSumExpRows(a.0), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Mat::from_elem((1, 1), self.value(a).sum());
        let ng = self.ng(a.0);
        self.push(out, Op::Sum(a.0), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        assert!(!x.is_empty(), "mean of an empty matrix");
        let out = Mat::from_elem((1, 1), x.sum() / x.len() as f64);
        let ng = self.ng(a.0);
        self.push(out, Op::Mean(a.0), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows: no inputs");
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views)
            .unwrap_or_else(|e| panic!("concat_rows: {e}"));
        let ng = parts.iter().any(|p| self.ng(p.0));
        self.push(out, Op::ConcatRows(parts.iter().map(|p| p.0).collect()), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views)
            .unwrap_or_else(|e| panic!("concat_cols: {e}"));
        let ng = parts.iter().any(|p| self.ng(p.0));
        self.push(out, Op::ConcatCols(parts.iter().map(|p| p.0).collect()), ng)
    }

    /// Rows `idx[0], idx[1], ...` of `a`; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &Arc<Vec<usize>>) -> Var {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.nrows()) {
            panic!("gather_rows: row {bad} out of range for {:?}", x.dim());
        }
        let out = x.select(Axis(0), idx);
        let ng = self.ng(a.0);
        self.push(out, Op::GatherRows(a.0, Arc::clone(idx)), ng)
    }

    /// Per-column standardization with batch statistics (the normalizing
    /// half of batch norm, and weight standardization on `in x out` weights).
    pub fn standardize_cols(&mut self, a: Var, eps: f64) -> Var {
        let (out, mean, inv_std) = standardize(self.value(a), Axis(0), eps);
        let ng = self.ng(a.0);
        self.push_aux(out, Op::StandardizeCols(a.0, eps), ng, Some((mean, inv_std)))
    }

    /// Per-row standardization (the normalizing half of layer norm).
    pub fn standardize_rows(&mut self, a: Var, eps: f64) -> Var {
        let (out, mean, inv_std) = standardize(self.value(a), Axis(1), eps);
        let ng = self.ng(a.0);
        self.push_aux(out, Op::StandardizeRows(a.0), ng, Some((mean, inv_std)))
    }

    /// Column mean and population variance saved by [`Tape::standardize_cols`].
    pub fn column_stats(&self, v: Var) -> Option<(Mat, Mat)> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.aux) {
            (Op::StandardizeCols(_, eps), Some((mean, inv_std))) => {
                Some((mean.clone(), inv_std.mapv(|s| 1.0 / (s * s) - eps)))
            }
            _ => None,
        }
    }

    /// Batch norm in training mode: `standardize_cols(a) * gamma + beta`.
    /// Returns the output and the batch-statistics node for running-stat
    /// updates.
    pub fn batch_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: f64) -> (Var, Var) {
        let z = self.standardize_cols(a, eps);
        let scaled = self.mul_row(z, gamma);
        (self.add_row(scaled, beta), z)
    }

    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let z = self.standardize_rows(a, eps);
        let scaled = self.mul_row(z, gamma);
        self.add_row(scaled, beta)
    }

    /// `n x 1` cosine similarity between matching rows of `a` and `b`.
    pub fn row_cosine_similarity(&mut self, a: Var, b: Var) -> Var {
        let na = self.row_l2_normalize(a);
        let nb = self.row_l2_normalize(b);
        let prod = self.mul(na, nb);
        self.row_sum(prod)
    }

    /// Accumulate `d loss / d p` into `store` for every parameter reachable
    /// from `loss`. Gradients add up across calls until
    /// [`ParamStore::zero_grad`].
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (i, g) in grads.into_iter().enumerate() {
            if let (Some(g), Op::Param(id)) = (g, &self.nodes[i].op) {
                let target = &mut store.get_mut(*id).grad;
                same_shape("backward", target, &g);
                *target += &g;
            }
        }
        Ok(())
    }

    /// Gradient of `loss` with respect to every recorded value that
    /// requires gradients. Each node is visited once, in reverse order.
    pub fn gradients(&self, loss: Var) -> Result<Vec<Option<Mat>>> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss(r, c));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Mat::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    fn backprop(&self, i: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let node = &self.nodes[i];
        let val = |j: usize| &self.nodes[j].value;
        let mut acc = |j: usize, d: Mat| {
            if !self.nodes[j].needs_grad {
                return;
            }
            match &mut grads[j] {
                Some(existing) => *existing += &d,
                slot => *slot = Some(d),
            }
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.dot(&val(*b).t()));
                }
                if self.ng(*b) {
                    acc(*b, val(*a).t().dot(g));
                }
            }
            Op::MatMulNT(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.dot(val(*b)));
                }
                if self.ng(*b) {
                    acc(*b, g.t().dot(val(*a)));
                }
            }
            Op::SpMM(s, b) => {
                let width = g.ncols();
                let dense = g.as_standard_layout();
                let d = s.transpose_mul_dense(dense.as_slice().expect("standard layout"), width);
                acc(*b, Mat::from_shape_vec((s.cols(), width), d).expect("shape"));
            }
            Op::ScaleRows(d, b) => {
                let dcol = column(ndarray::Array1::from(d.as_ref().clone()));
                acc(*b, g * &dcol);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g * val(*b));
                }
                if self.ng(*b) {
                    acc(*b, g * val(*a));
                }
            }
            Op::AddRow(a, r) => {
                acc(*a, g.clone());
                if self.ng(*r) {
                    acc(*r, row(g.sum_axis(Axis(0))));
                }
            }
            Op::MulRow(a, r) => {
                if self.ng(*a) {
                    acc(*a, g * val(*r));
                }
                if self.ng(*r) {
                    acc(*r, row((g * val(*a)).sum_axis(Axis(0))));
                }
            }
            Op::MulCol(a, c) => {
                if self.ng(*a) {
                    acc(*a, g * val(*c));
                }
                if self.ng(*c) {
                    acc(*c, column((g * val(*a)).sum_axis(Axis(1))));
                }
            }
            Op::Scale(a, s) => acc(*a, g * *s),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                acc(*a, d);
            }
            Op::Elu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d *= x.exp()
                    }
                });
                acc(*a, d);
            }
            Op::Prelu(a, s) => {
                let slope = val(*s)[[0, 0]];
                let x = val(*a);
                if self.ng(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(x).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d *= slope
                        }
                    });
                    acc(*a, d);
                }
                if self.ng(*s) {
                    let mut total = 0.0;
                    Zip::from(g).and(x).for_each(|&g, &x| {
                        if x <= 0.0 {
                            total += g * x
                        }
                    });
                    acc(*s, Mat::from_elem((1, 1), total));
                }
            }
            Op::Sigmoid(a) => acc(*a, g * &node.value.mapv(|y| y * (1.0 - y))),
            Op::LogSigmoid(a) => acc(*a, g * &val(*a).mapv(|x| sigmoid(-x))),
            Op::Log(a) => acc(*a, g * &val(*a).mapv(|x| if x > EPS { 1.0 / x } else { 0.0 })),
            Op::Exp(a) => acc(*a, g * &node.value),
            Op::RowL2Normalize(a) => {
                let (norms, raw) = node.aux.as_ref().expect("saved norms");
                let y = &node.value;
                let gy = column((g * y).sum_axis(Axis(1)));
                let mut d = (g - &(y * &gy)) / norms;
                // Rows at the guard are a plain scaling by 1/eps.
                for (k, &r) in raw.iter().enumerate() {
                    if r <= EPS {
                        d.row_mut(k).assign(&(&g.row(k) / EPS));
                    }
                }
                acc(*a, d);
            }
            Op::RowSum(a) => {
                let cols = val(*a).ncols();
                acc(*a, g.broadcast((g.nrows(), cols)).expect("broadcast").to_owned());
            }
            Op::LogSumExpRows(a) => {
                let x = val(*a);
                let soft = (x - &node.value).mapv(|v| if v.is_nan() { 0.0 } else { v.exp() });
                acc(*a, soft * g);
            }
            Op::Sum(a) => acc(*a, Mat::from_elem(val(*a).raw_dim(), g[[0, 0]])),
            Op::Mean(a) => {
                let x = val(*a);
                acc(*a, Mat::from_elem(x.raw_dim(), g[[0, 0]] / x.len() as f64));
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let rows = val(p).nrows();
                    if self.ng(p) {
                        acc(p, g.slice(ndarray::s![start..start + rows, ..]).to_owned());
                    }
                    start += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let cols = val(p).ncols();
                    if self.ng(p) {
                        acc(p, g.slice(ndarray::s![.., start..start + cols]).to_owned());
                    }
                    start += cols;
                }
            }
            Op::GatherRows(a, idx) => {
                let mut d = Mat::zeros(val(*a).raw_dim());
                for (k, &r) in idx.iter().enumerate() {
                    let mut dst = d.row_mut(r);
                    dst += &g.row(k);
                }
                acc(*a, d);
            }
            Op::StandardizeCols(a, _) => {
                let (_, inv_std) = node.aux.as_ref().expect("saved stats");
                acc(*a, standardize_backward(g, &node.value, inv_std, Axis(0)));
            }
            Op::StandardizeRows(a) => {
                let (_, inv_std) = node.aux.as_ref().expect("saved stats");
                acc(*a, standardize_backward(g, &node.value, inv_std, Axis(1)));
            }
        }
    }
}
