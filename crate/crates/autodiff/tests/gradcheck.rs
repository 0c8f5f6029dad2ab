//! Every differentiable op against central finite differences on random
//! small inputs.

use std::sync::Arc;

use lpssl_autodiff::{grad_check, Mat, ParamId, ParamStore, Tape, Var};
use lpssl_core::sparse::normalized_adjacency;
use lpssl_core::Graph;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const TOL: f64 = 1e-6;
const SEEDS: u64 = 20;

fn random(rng: &mut StdRng, shape: (usize, usize), lo: f64, hi: f64) -> Mat {
    Mat::from_shape_simple_fn(shape, || rng.random_range(lo..hi))
}

/// Max relative error of `sum(build(inputs) * R)` for a random weighting `R`.
fn check_with<F>(seed: u64, inputs: &[((usize, usize), f64, f64)], build: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut rng = StdRng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (k, &(shape, lo, hi)) in inputs.iter().enumerate() {
        store.add(format!("x{k}"), random(&mut rng, shape, lo, hi));
    }
    // Output shape from a dry run.
    let out_shape = {
        let mut t = Tape::new();
        let vars: Vec<Var> = store.ids().map(|id| t.param(&store, id)).collect();
        let out = build(&mut t, &vars);
        t.shape(out)
    };
    let weights = random(&mut rng, out_shape, 0.5, 1.5);
    let report = grad_check(
        &mut store,
        |t, s| {
            let vars: Vec<Var> = s.ids().map(|id| t.param(s, id)).collect();
            let out = build(t, &vars);
            let w = t.constant(weights.clone());
            let prod = t.mul(out, w);
            t.sum(prod)
        },
        1e-5,
    )
    .unwrap();
    report.max_rel_error
}

fn check<F>(name: &str, inputs: &[((usize, usize), f64, f64)], build: F)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    for seed in 0..SEEDS {
        let err = check_with(seed, inputs, &build);
        assert!(err < TOL, "{name}: seed {seed} rel err {err:e}");
    }
}

const M: ((usize, usize), f64, f64) = ((4, 3), -1.0, 1.0);

#[test]
fn matmul() {
    check("matmul", &[M, ((3, 5), -1.0, 1.0)], |t, v| t.matmul(v[0], v[1]));
    check("matmul_nt", &[M, ((6, 3), -1.0, 1.0)], |t, v| t.matmul_nt(v[0], v[1]));
}

#[test]
fn sparse_and_diagonal_products() {
    let g = Graph::new(6, [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (1, 4)]).unwrap();
    let a = Arc::new(normalized_adjacency(&g));
    check("sparse_matmul", &[((6, 3), -1.0, 1.0)], |t, v| t.sparse_matmul(&a, v[0]));
    let d = Arc::new(vec![1.0, 0.0, 2.0, -0.5, 1.0, 3.0]);
    check("scale_rows", &[((6, 2), -1.0, 1.0)], |t, v| t.scale_rows(&d, v[0]));
}

#[test]
fn elementwise_binary() {
    check("add", &[M, M], |t, v| t.add(v[0], v[1]));
    check("sub", &[M, M], |t, v| t.sub(v[0], v[1]));
    check("mul", &[M, M], |t, v| t.mul(v[0], v[1]));
    check("mul_self", &[M], |t, v| t.mul(v[0], v[0]));
    check("add_row", &[M, ((1, 3), -1.0, 1.0)], |t, v| t.add_row(v[0], v[1]));
    check("mul_row", &[M, ((1, 3), -1.0, 1.0)], |t, v| t.mul_row(v[0], v[1]));
    check("mul_col", &[M, ((4, 1), -1.0, 1.0)], |t, v| t.mul_col(v[0], v[1]));
    check("scalar_mul", &[M], |t, v| t.scalar_mul(v[0], -2.5));
    check("add_scalar", &[M], |t, v| t.add_scalar(v[0], 0.7));
}

#[test]
fn activations() {
    check("relu", &[M], |t, v| t.relu(v[0]));
    check("elu", &[M], |t, v| t.elu(v[0]));
    check("prelu", &[M, ((1, 1), 0.1, 0.4)], |t, v| t.prelu(v[0], v[1]));
    check("sigmoid", &[M], |t, v| t.sigmoid(v[0]));
    check("log_sigmoid", &[((4, 3), -4.0, 4.0)], |t, v| t.log_sigmoid(v[0]));
    check("log", &[((4, 3), 0.2, 3.0)], |t, v| t.log(v[0]));
    check("exp", &[M], |t, v| t.exp(v[0]));
}

#[test]
fn reductions() {
    check("row_sum", &[M], |t, v| t.row_sum(v[0]));
    check("logsumexp_rows", &[((4, 5), -3.0, 3.0)], |t, v| t.logsumexp_rows(v[0]));
    check("sum", &[M], |t, v| t.sum(v[0]));
    check("mean", &[M], |t, v| t.mean(v[0]));
}

#[test]
fn normalization() {
    check("row_l2_normalize", &[M], |t, v| t.row_l2_normalize(v[0]));
    check("row_cosine_similarity", &[M, M], |t, v| t.row_cosine_similarity(v[0], v[1]));
    check("standardize_cols", &[((5, 3), -1.0, 1.0)], |t, v| t.standardize_cols(v[0], 1e-5));
    check("standardize_rows", &[((3, 5), -1.0, 1.0)], |t, v| t.standardize_rows(v[0], 1e-5));
    check(
        "batch_norm",
        &[((5, 3), -1.0, 1.0), ((1, 3), 0.5, 1.5), ((1, 3), -1.0, 1.0)],
        |t, v| t.batch_norm(v[0], v[1], v[2], 1e-5).0,
    );
    check(
        "layer_norm",
        &[((5, 3), -1.0, 1.0), ((1, 3), 0.5, 1.5), ((1, 3), -1.0, 1.0)],
        |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5),
    );
}

#[test]
fn structural() {
    check("concat_rows", &[M, ((2, 3), -1.0, 1.0)], |t, v| t.concat_rows(&[v[0], v[1], v[0]]));
    check("concat_cols", &[M, ((4, 2), -1.0, 1.0)], |t, v| t.concat_cols(&[v[1], v[0]]));
    let idx = Arc::new(vec![3, 0, 3, 1, 2, 2]);
    check("gather_rows", &[M], |t, v| t.gather_rows(v[0], &idx));
}

#[test]
fn composite_chain() {
    // A two-layer GCN-like chain with a contrastive-looking head.
    let g = Graph::new(6, [(0, 1), (1, 2), (2, 3), (4, 5), (0, 5)]).unwrap();
    let a = Arc::new(normalized_adjacency(&g));
    check(
        "chain",
        &[((6, 4), -1.0, 1.0), ((4, 3), -1.0, 1.0), ((1, 1), 0.1, 0.4)],
        |t, v| {
            let h = t.matmul(v[0], v[1]);
            let h = t.sparse_matmul(&a, h);
            let h = t.prelu(h, v[2]);
            let z = t.row_l2_normalize(h);
            let s = t.matmul_nt(z, z);
            let s = t.scalar_mul(s, 2.0);
            t.logsumexp_rows(s)
        },
    );
}

#[test]
fn unreachable_parameter_has_zero_gradient() {
    let mut store = ParamStore::new();
    store.add("used", Mat::ones((2, 2)));
    store.add("unused", Mat::ones((2, 2)));
    let mut t = Tape::new();
    let v = t.param(&store, store.ids().next().unwrap());
    let y = t.sum(v);
    t.backward(y, &mut store).unwrap();
    let ids: Vec<ParamId> = store.ids().collect();
    assert!(store.grad(ids[0]).iter().all(|&g| g == 1.0));
    assert!(store.grad(ids[1]).iter().all(|&g| g == 0.0));
}
