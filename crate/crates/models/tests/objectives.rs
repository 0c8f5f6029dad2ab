use lpssl_autodiff::{grad_check, AdamW, EmaShadow, Mat, ParamStore, Tape};
use lpssl_core::augment::{AugKind, AugmentationSpec};
use lpssl_core::graph::{EdgeSplit, Graph};
use lpssl_core::seed;
use lpssl_models::config::{Anchor, EncoderConfig, Norm};
use lpssl_models::loss::{bgrl_loss, grace_loss, lgrace_loss, lbgrl_loss, symmetric_bgrl_loss, LinkContrast};
use lpssl_models::nn::{Encoder, Mode, PreparedGraph, Source};
use lpssl_models::{train_encoder, ModelKind, TrainConfig};
use rand::Rng;

const TOL: f64 = 1e-4;

fn random(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = seed::rng(seed);
    Mat::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn store_of(mats: &[Mat]) -> ParamStore {
    let mut s = ParamStore::new();
    for (k, m) in mats.iter().enumerate() {
        s.add(format!("x{k}"), m.clone());
    }
    s
}

#[test]
fn grace_gradients_match_finite_differences() {
    for seed in 0..5 {
        let mut s = store_of(&[random(5, 3, seed), random(5, 3, seed + 100)]);
        let ids: Vec<_> = s.ids().collect();
        let r = grad_check(
            &mut s,
            |t, st| {
                let (u, v) = (t.param(st, ids[0]), t.param(st, ids[1]));
                grace_loss(t, u, v, 0.5).unwrap()
            },
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error < TOL, "seed {seed}: {r:?}");
    }
}

#[test]
fn lgrace_gradients_match_finite_differences() {
    for anchor in [Anchor::Positive, Anchor::Negative] {
        for include_positive in [false, true] {
            let opts = LinkContrast { anchor, include_positive };
            for seed in 0..3 {
                let mut s = store_of(&[
                    random(4, 3, seed),
                    random(4, 3, seed + 10),
                    random(4, 3, seed + 20),
                    random(4, 3, seed + 30),
                ]);
                let ids: Vec<_> = s.ids().collect();
                let r = grad_check(
                    &mut s,
                    |t, st| {
                        let v: Vec<_> = ids.iter().map(|&id| t.param(st, id)).collect();
                        lgrace_loss(t, v[0], v[1], v[2], v[3], 0.7, opts).unwrap()
                    },
                    1e-5,
                )
                .unwrap();
                assert!(r.max_rel_error < TOL, "{opts:?} seed {seed}: {r:?}");
            }
        }
    }
}

#[test]
fn bgrl_and_lbgrl_gradients_match_finite_differences() {
    for seed in 0..5 {
        let target = random(6, 4, seed + 50);
        let mut s = store_of(&[random(6, 4, seed)]);
        let id = s.ids().next().unwrap();
        for link_level in [false, true] {
            let r = grad_check(
                &mut s,
                |t, st| {
                    let p = t.param(st, id);
                    let h = t.constant(target.clone());
                    if link_level {
                        lbgrl_loss(t, p, h).unwrap()
                    } else {
                        bgrl_loss(t, p, h).unwrap()
                    }
                },
                1e-5,
            )
            .unwrap();
            assert!(r.max_rel_error < TOL, "seed {seed}: {r:?}");
        }
    }
}

fn scalar(f: impl FnOnce(&mut Tape) -> lpssl_autodiff::Var) -> f64 {
    let mut t = Tape::new();
    let v = f(&mut t);
    t.scalar(v)
}

#[test]
fn objectives_are_symmetric_in_the_views() {
    for seed in 0..10 {
        let (u, v) = (random(7, 5, seed), random(7, 5, seed + 1));
        let a = scalar(|t| {
            let (x, y) = (t.constant(u.clone()), t.constant(v.clone()));
            grace_loss(t, x, y, 0.4).unwrap()
        });
        let b = scalar(|t| {
            let (x, y) = (t.constant(v.clone()), t.constant(u.clone()));
            grace_loss(t, x, y, 0.4).unwrap()
        });
        assert!((a - b).abs() <= 1e-12, "grace {a} vs {b}");

        let m: Vec<Mat> = (0..4).map(|k| random(6, 5, seed * 10 + k)).collect();
        let lg = |order: [usize; 4]| {
            scalar(|t| {
                let v: Vec<_> = order.iter().map(|&k| t.constant(m[k].clone())).collect();
                lgrace_loss(t, v[0], v[1], v[2], v[3], 0.3, LinkContrast::default()).unwrap()
            })
        };
        let (a, b) = (lg([0, 1, 2, 3]), lg([1, 0, 3, 2]));
        assert!((a - b).abs() <= 1e-12, "lgrace {a} vs {b}");

        let bg = |order: [usize; 4]| {
            scalar(|t| {
                let v: Vec<_> = order.iter().map(|&k| t.constant(m[k].clone())).collect();
                symmetric_bgrl_loss(t, v[0], v[1], v[2], v[3]).unwrap()
            })
        };
        let (a, b) = (bg([0, 1, 2, 3]), bg([2, 3, 0, 1]));
        assert!((a - b).abs() <= 1e-12, "bgrl {a} vs {b}");
    }
}

fn ring(n: usize) -> Graph {
    Graph::new(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 7) % n)])).unwrap()
}

fn enc_cfg(size: usize) -> EncoderConfig {
    EncoderConfig {
        n_layers: 2,
        layer_size: size,
        norm: Norm::Batch,
        batchnorm_momentum: 0.9,
        weight_standardization: false,
    }
}

#[test]
fn target_branch_receives_no_gradient_and_moves_only_by_ema() {
    let g = ring(30);
    let pg = PreparedGraph::new(&g);
    let mut store = ParamStore::new();
    let enc = Encoder::new(&mut store, "encoder", 30, &enc_cfg(8), &mut seed::rng(1));
    let mut target = EmaShadow::new(&store, &enc.param_ids(), 0.9);
    // Perturb the online weights so the branches differ.
    for id in enc.param_ids() {
        let v = store.value(id) + &random(store.value(id).nrows(), store.value(id).ncols(), 9);
        store.get_mut(id).value = v;
    }
    let before = target.values().to_vec();

    let mut tape = Tape::new();
    let online = enc.forward(&mut tape, Source::Online(&store), &pg, Mode::Train).h;
    let tgt = enc.forward(&mut tape, Source::Target(&target), &pg, Mode::Train).h;
    let loss = bgrl_loss(&mut tape, online, tgt).unwrap();
    assert!(!tape.requires_grad(tgt));
    store.zero_grad();
    tape.backward(loss, &mut store).unwrap();
    AdamW::new(1e-2, 0.0).step(&mut store);
    assert_eq!(target.values(), &before[..], "optimizer must not touch the target");

    // Three EMA steps replayed by hand.
    let mut expected = before.clone();
    for step in 0..3 {
        AdamW::new(1e-2, 0.0).step(&mut store);
        target.update(&store);
        for (e, &id) in expected.iter_mut().zip(target.ids()) {
            *e = &*e * 0.9 + store.value(id) * 0.1;
        }
        for (t, e) in target.values().iter().zip(&expected) {
            let diff = (t - e).mapv(f64::abs).iter().cloned().fold(0.0, f64::max);
            assert!(diff <= 1e-15, "step {step}: {diff}");
        }
    }
}

#[test]
fn link_level_objective_never_materializes_node_pair_matrices() {
    let n = 2000;
    let g = ring(n);
    let split = EdgeSplit {
        train_pos: g.edges().to_vec(),
        train_graph: g,
        val_pos: Vec::new(),
        test_pos: Vec::new(),
        seed: 0,
    };
    let cfg = TrainConfig {
        encoder: enc_cfg(64),
        ct_epochs: 1,
        batch_size: 256,
        proj_hidden: 64,
        ..TrainConfig::default()
    };
    let spec = AugmentationSpec::new(AugKind::Random).with_rates((0.2, 0.2), (0.1, 0.1));
    let t = train_encoder(&split, &spec, ModelKind::Lgrace, &cfg, 0, 0, None).unwrap();
    let peak = t.peak_tape;
    assert!(peak.nodes > 0);
    let (r, c) = peak.largest_shape;
    assert!(r < n || c < n, "node-pair matrix {r}x{c} recorded");
    // Largest value: n x 64 embeddings, or the |pos| x 2|neg| similarity block.
    let b = cfg.batch_size;
    assert!(peak.largest_elements <= (n * 64).max(2 * b * b), "{peak:?}");
}
