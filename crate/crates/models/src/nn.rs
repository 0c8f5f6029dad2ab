//! Network modules. Modules hold parameter ids; values live in a
//! [`ParamStore`] (online weights) or an [`EmaShadow`] (target weights).

use std::sync::Arc;

use lpssl_autodiff::{glorot_uniform, EmaShadow, Mat, ParamId, ParamStore, Tape, Var};
use lpssl_core::sparse::{normalized_adjacency, CsrMatrix};
use lpssl_core::Graph;
use rand::Rng;

use crate::config::{EncoderConfig, Norm};

const NORM_EPS: f64 = 1e-5;
const PRELU_INIT: f64 = 0.25;

/// Where parameter values come from during a forward pass.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    /// Trainable: gradients flow into the store.
    Online(&'a ParamStore),
    /// EMA shadow: recorded as constants, no gradient path.
    Target(&'a EmaShadow),
}

impl Source<'_> {
    pub fn var(&self, tape: &mut Tape, id: ParamId) -> Var {
        match self {
            Source::Online(s) => tape.param(s, id),
            Source::Target(sh) => tape.constant(sh.value(id).clone()),
        }
    }
}

/// Node features of a view, in the cheapest representation available.
#[derive(Debug, Clone)]
pub enum Input {
    /// `diag(d)`, covers identity features and their column-masked variants.
    Diagonal(Arc<Vec<f64>>),
    Dense(Mat),
}

/// A graph view ready for message passing.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub adjacency: Arc<CsrMatrix>,
    pub input: Input,
}

impl PreparedGraph {
    pub fn new(g: &Graph) -> Self {
        let x = g.features();
        let input = match x.diagonal() {
            Some(d) => Input::Diagonal(Arc::new(d.to_vec())),
            None => Input::Dense(
                Mat::from_shape_vec((x.rows(), x.cols()), x.to_dense_vec()).expect("feature shape"),
            ),
        };
        Self {
            adjacency: Arc::new(normalized_adjacency(g)),
            input,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn in_dim(&self) -> usize {
        match &self.input {
            Input::Diagonal(d) => d.len(),
            Input::Dense(x) => x.ncols(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics in batch norm.
    Eval,
}

#[derive(Debug, Clone)]
struct GcnLayer {
    weight: ParamId,
    gamma: ParamId,
    beta: ParamId,
    slope: ParamId,
}

/// Stack of `PReLU(Norm(A_hat H W))` layers.
#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: EncoderConfig,
    in_dim: usize,
    layers: Vec<GcnLayer>,
    /// Batch-norm running mean and variance per layer.
    running: Vec<(Mat, Mat)>,
}

/// Forward result; `stats` holds the batch-norm standardization nodes.
pub struct EncoderOutput {
    pub h: Var,
    pub stats: Vec<Var>,
}

impl Encoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        cfg: &EncoderConfig,
        rng: &mut R,
    ) -> Self {
        let d = cfg.layer_size;
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let fan_in = if l == 0 { in_dim } else { d };
                GcnLayer {
                    weight: store.add(format!("{prefix}.{l}.weight"), glorot_uniform(rng, fan_in, d)),
                    gamma: store.add(format!("{prefix}.{l}.gamma"), Mat::ones((1, d))),
                    beta: store.add(format!("{prefix}.{l}.beta"), Mat::zeros((1, d))),
                    slope: store.add(format!("{prefix}.{l}.prelu"), Mat::from_elem((1, 1), PRELU_INIT)),
                }
            })
            .collect();
        Self {
            cfg: cfg.clone(),
            in_dim,
            layers,
            running: vec![(Mat::zeros((1, d)), Mat::ones((1, d))); cfg.n_layers],
        }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.cfg.layer_size
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight, l.gamma, l.beta, l.slope])
            .collect()
    }

    pub fn weight_ids(&self) -> Vec<ParamId> {
        self.layers.iter().map(|l| l.weight).collect()
    }

    pub fn forward(&self, tape: &mut Tape, src: Source, g: &PreparedGraph, mode: Mode) -> EncoderOutput {
        assert_eq!(g.in_dim(), self.in_dim, "encoder expects {} input columns", self.in_dim);
        let mut h: Option<Var> = None;
        let mut stats = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut w = src.var(tape, layer.weight);
            if self.cfg.weight_standardization {
                w = tape.standardize_cols(w, NORM_EPS);
            }
            let hw = match (h, &g.input) {
                (Some(prev), _) => tape.matmul(prev, w),
                (None, Input::Diagonal(d)) => tape.scale_rows(d, w),
                (None, Input::Dense(x)) => {
                    let xc = tape.constant(x.clone());
                    tape.matmul(xc, w)
                }
            };
            let z = tape.sparse_matmul(&g.adjacency, hw);
            let gamma = src.var(tape, layer.gamma);
            let beta = src.var(tape, layer.beta);
            let normed = match (self.cfg.norm, mode) {
                (Norm::Layer, _) => tape.layer_norm(z, gamma, beta, NORM_EPS),
                (Norm::Batch, Mode::Train) => {
                    let (out, stat) = tape.batch_norm(z, gamma, beta, NORM_EPS);
                    stats.push(stat);
                    out
                }
                (Norm::Batch, Mode::Eval) => {
                    let (mean, var) = &self.running[l];
                    let shift = tape.constant(-mean);
                    let scale = tape.constant(var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt()));
                    let centered = tape.add_row(z, shift);
                    let standardized = tape.mul_row(centered, scale);
                    let scaled = tape.mul_row(standardized, gamma);
                    tape.add_row(scaled, beta)
                }
            };
            let slope = src.var(tape, layer.slope);
            h = Some(tape.prelu(normed, slope));
        }
        EncoderOutput {
            h: h.expect("at least one layer"),
            stats,
        }
    }

    /// Fold the batch statistics of a training forward pass into the running
    /// estimates: `running = (1 - m) running + m batch`, unbiased variance.
    pub fn update_running_stats(&mut self, tape: &Tape, out: &EncoderOutput) {
        let m = self.cfg.batchnorm_momentum;
        for ((mean, var), &stat) in self.running.iter_mut().zip(&out.stats) {
            let Some((bm, bv)) = tape.column_stats(stat) else { continue };
            let rows = tape.shape(stat).0 as f64;
            let unbiased = if rows > 1.0 { bv * (rows / (rows - 1.0)) } else { bv };
            *mean = &*mean * (1.0 - m) + bm * m;
            *var = &*var * (1.0 - m) + unbiased * m;
        }
    }

    pub fn running_stats(&self) -> &[(Mat, Mat)] {
        &self.running
    }

    /// Replace the running statistics, one `(mean, var)` pair per layer.
    pub fn set_running_stats(&mut self, stats: Vec<(Mat, Mat)>) -> Result<(), String> {
        let d = self.cfg.layer_size;
        if stats.len() != self.running.len()
            || stats.iter().any(|(m, v)| m.dim() != (1, d) || v.dim() != (1, d))
        {
            return Err(format!(
                "expected {} running (1, {d}) pairs",
                self.running.len()
            ));
        }
        self.running = stats;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Elu,
    Prelu,
}

/// `Linear -> activation -> Linear`, with biases.
#[derive(Debug, Clone)]
pub struct Mlp2 {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    slope: Option<ParamId>,
    activation: Activation,
    dims: (usize, usize, usize),
}

impl Mlp2 {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        dims: (usize, usize, usize),
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let (i, h, o) = dims;
        Self {
            w1: store.add(format!("{prefix}.w1"), glorot_uniform(rng, i, h)),
            b1: store.add(format!("{prefix}.b1"), Mat::zeros((1, h))),
            w2: store.add(format!("{prefix}.w2"), glorot_uniform(rng, h, o)),
            b2: store.add(format!("{prefix}.b2"), Mat::zeros((1, o))),
            slope: (activation == Activation::Prelu)
                .then(|| store.add(format!("{prefix}.prelu"), Mat::from_elem((1, 1), PRELU_INIT))),
            activation,
            dims,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w1, self.b1, self.w2, self.b2];
        ids.extend(self.slope);
        ids
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let z = tape.matmul(x, w1);
        let z = tape.add_row(z, b1);
        let a = match self.activation {
            Activation::Relu => tape.relu(z),
            Activation::Elu => tape.elu(z),
            Activation::Prelu => {
                let s = tape.param(store, self.slope.expect("prelu slope"));
                tape.prelu(z, s)
            }
        };
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let out = tape.matmul(a, w2);
        tape.add_row(out, b2)
    }
}

/// Link decoder: a two-layer ReLU MLP on `h_u * h_v` producing one logit;
/// scores are `sigmoid(logit)`.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub mlp: Mlp2,
}

impl Decoder {
    pub fn new<R: Rng>(store: &mut ParamStore, dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp2::new(store, "decoder", (dim, hidden, 1), Activation::Relu, rng),
        }
    }

    /// `k x 1` logits for the Hadamard inputs `x` (`k x dim`).
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        self.mlp.forward(tape, store, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lpssl_core::seed;

    fn small_cfg(norm: Norm) -> EncoderConfig {
        EncoderConfig {
            n_layers: 2,
            layer_size: 8,
            norm,
            batchnorm_momentum: 0.9,
            weight_standardization: false,
        }
    }

    fn random_graph(n: usize, s: u64) -> Graph {
        let mut rng = seed::rng(s);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.3) {
                    edges.push((u, v));
                }
            }
        }
        Graph::new(n, edges).unwrap()
    }

    #[test]
    fn output_shape() {
        for norm in [Norm::Batch, Norm::Layer] {
            for layers in 1..=3 {
                let g = random_graph(10, 1);
                let mut cfg = small_cfg(norm);
                cfg.n_layers = layers;
                let mut store = ParamStore::new();
                let enc = Encoder::new(&mut store, "enc", 10, &cfg, &mut seed::rng(0));
                let mut tape = Tape::new();
                let out = enc.forward(&mut tape, Source::Online(&store), &PreparedGraph::new(&g), Mode::Train);
                assert_eq!(tape.shape(out.h), (10, 8));
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        for norm in [Norm::Batch, Norm::Layer] {
            let g = random_graph(10, 2);
            let mut store = ParamStore::new();
            let enc = Encoder::new(&mut store, "enc", 10, &small_cfg(norm), &mut seed::rng(0));
            for id in enc.weight_ids() {
                store.get_mut(id).value.fill(0.0);
            }
            let mut tape = Tape::new();
            let out = enc.forward(&mut tape, Source::Online(&store), &PreparedGraph::new(&g), Mode::Train);
            assert!(tape.value(out.h).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn node_permutation_equivariance() {
        let g = random_graph(10, 3);
        let perm = [3, 7, 0, 9, 1, 5, 2, 8, 6, 4];
        let pg = g.permute(&perm).unwrap();
        for norm in [Norm::Batch, Norm::Layer] {
            let mut store = ParamStore::new();
            let enc = Encoder::new(&mut store, "enc", 10, &small_cfg(norm), &mut seed::rng(5));
            // Identity features permute as rows of X, so X' = P X is no
            // longer the identity: use the dense permuted features.
            let mut t1 = Tape::new();
            let h = enc.forward(&mut t1, Source::Online(&store), &PreparedGraph::new(&g), Mode::Train).h;
            let mut t2 = Tape::new();
            let hp = enc.forward(&mut t2, Source::Online(&store), &PreparedGraph::new(&pg), Mode::Train).h;
            let (a, b) = (t1.value(h), t2.value(hp));
            for (old, &new) in perm.iter().enumerate() {
                for c in 0..8 {
                    assert!((a[[old, c]] - b[[new, c]]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn target_source_has_no_gradient_path() {
        let g = random_graph(8, 4);
        let mut store = ParamStore::new();
        let enc = Encoder::new(&mut store, "enc", 8, &small_cfg(Norm::Batch), &mut seed::rng(1));
        let shadow = EmaShadow::new(&store, &enc.param_ids(), 0.99);
        let mut tape = Tape::new();
        let out = enc.forward(&mut tape, Source::Target(&shadow), &PreparedGraph::new(&g), Mode::Train);
        assert!(!tape.requires_grad(out.h));
    }

    #[test]
    fn running_stats_follow_momentum() {
        let g = random_graph(12, 6);
        let mut store = ParamStore::new();
        let mut cfg = small_cfg(Norm::Batch);
        cfg.batchnorm_momentum = 1.0;
        let mut enc = Encoder::new(&mut store, "enc", 12, &cfg, &mut seed::rng(2));
        let pg = PreparedGraph::new(&g);
        let mut tape = Tape::new();
        let out = enc.forward(&mut tape, Source::Online(&store), &pg, Mode::Train);
        enc.update_running_stats(&tape, &out);
        let (bm, _) = tape.column_stats(out.stats[0]).unwrap();
        assert_eq!(enc.running_stats()[0].0, bm);
    }

    #[test]
    fn decoder_is_symmetric_in_endpoints() {
        let mut store = ParamStore::new();
        let dec = Decoder::new(&mut store, 4, 6, &mut seed::rng(3));
        let hu = ndarray::array![[1.0, -2.0, 0.5, 3.0]];
        let hv = ndarray::array![[0.3, 0.1, -1.0, 2.0]];
        let mut t = Tape::new();
        let a = t.constant(&hu * &hv);
        let b = t.constant(&hv * &hu);
        let la = dec.logits(&mut t, &store, a);
        let lb = dec.logits(&mut t, &store, b);
        assert_eq!(t.value(la), t.value(lb));
    }
}
