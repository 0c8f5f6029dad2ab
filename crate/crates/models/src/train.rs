//! Training procedures.
//!
//! Self-supervised models pre-train an encoder on pairs of augmented views of
//! the training graph; a link decoder is then fitted on the frozen
//! embeddings. The supervised baseline trains encoder and decoder jointly on
//! the training links.

use std::path::Path;

use lpssl_autodiff::{AdamW, EmaShadow, Mat, ParamId, ParamStore, Tape, TapeStats, Var};
use lpssl_core::augment::{AugmentationSpec, ViewGenerator};
use lpssl_core::community::BlockState;
use lpssl_core::graph::{sample_negative_pairs_with, Edge, EdgeSet, EdgeSplit};
use lpssl_core::{seed, Graph};
use lpssl_eval::PairScorer;
use rand::seq::{index, SliceRandom};

use crate::config::{ModelKind, TrainConfig};
use crate::error::{ModelError, Result};
use crate::links::{hadamard, select_link_sets};
use crate::loss::{decoder_loss, grace_loss, lgrace_loss, symmetric_bgrl_loss, LinkContrast};
use crate::nn::{Activation, Decoder, Encoder, EncoderOutput, Mlp2, Mode, PreparedGraph, Source};

/// Projector or predictor on top of the encoder.
#[derive(Debug, Clone)]
pub enum Head {
    /// Symmetric models: maps embeddings to the contrastive space.
    Projector(Mlp2),
    /// Asymmetric models: online-branch predictor.
    Predictor(Mlp2),
}

impl Head {
    pub fn mlp(&self) -> &Mlp2 {
        match self {
            Head::Projector(m) | Head::Predictor(m) => m,
        }
    }
}

/// Encoder and head parameters in construction order, for a given model.
fn build(
    store: &mut ParamStore,
    model: ModelKind,
    in_dim: usize,
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<(Encoder, Head)> {
    cfg.check().map_err(ModelError::Config)?;
    if !model.is_self_supervised() {
        return Err(ModelError::Config(format!(
            "{} has no self-supervised stage",
            model.as_str()
        )));
    }
    let mut rng = seed::rng(init_seed);
    let encoder = Encoder::new(store, "encoder", in_dim, &cfg.encoder, &mut rng);
    let d = encoder.out_dim();
    let dims = (d, cfg.proj_hidden, d);
    let head = if model.is_asymmetric() {
        Head::Predictor(Mlp2::new(store, "predictor", dims, Activation::Prelu, &mut rng))
    } else {
        Head::Projector(Mlp2::new(store, "projector", dims, Activation::Elu, &mut rng))
    };
    Ok((encoder, head))
}

/// Overwrite `dst` with `src`, requiring identical names and shapes.
fn copy_values(dst: &mut ParamStore, src: &ParamStore) -> Result<()> {
    if dst.len() != src.len() {
        return Err(ModelError::Checkpoint(format!(
            "expected {} tensors, found {}",
            dst.len(),
            src.len()
        )));
    }
    let ids: Vec<ParamId> = dst.ids().collect();
    for (id, (_, p)) in ids.into_iter().zip(src.iter()) {
        let slot = dst.get_mut(id);
        if slot.name != p.name || slot.value.dim() != p.value.dim() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} {:?}, found {} {:?}",
                slot.name,
                slot.value.dim(),
                p.name,
                p.value.dim()
            )));
        }
        slot.value = p.value.clone();
    }
    Ok(())
}

/// A pre-trained encoder with its head and per-epoch losses.
#[derive(Debug, Clone)]
pub struct TrainedEncoder {
    pub model: ModelKind,
    pub encoder: Encoder,
    pub head: Head,
    pub store: ParamStore,
    /// Loss of every epoch that ran.
    pub losses: Vec<f64>,
    /// Epochs skipped because the views shared no link.
    pub skipped_epochs: usize,
    /// Tape statistics of the epoch with the most recorded elements.
    pub peak_tape: TapeStats,
}

const PARAMS_FILE: &str = "encoder.params";
const RUNNING_FILE: &str = "running.params";

impl TrainedEncoder {
    /// Node embeddings of `g` with batch norm in inference mode.
    pub fn embed(&self, g: &Graph) -> Mat {
        let mut tape = Tape::new();
        let pg = PreparedGraph::new(g);
        let out = self.encoder.forward(&mut tape, Source::Online(&self.store), &pg, Mode::Eval);
        tape.value(out.h).clone()
    }

    /// Write `encoder.params` (every trainable tensor) and `running.params`
    /// (batch-norm running mean and variance per layer) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| lpssl_autodiff::Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        self.store.save(&dir.join(PARAMS_FILE))?;
        let mut running = ParamStore::new();
        for (l, (m, v)) in self.encoder.running_stats().iter().enumerate() {
            running.add(format!("running.{l}.mean"), m.clone());
            running.add(format!("running.{l}.var"), v.clone());
        }
        running.save(&dir.join(RUNNING_FILE))?;
        Ok(())
    }

    /// Rebuild an encoder saved by [`TrainedEncoder::save`].
    pub fn load(dir: &Path, model: ModelKind, cfg: &TrainConfig, in_dim: usize) -> Result<Self> {
        let mut store = ParamStore::new();
        let (mut encoder, head) = build(&mut store, model, in_dim, cfg, 0)?;
        copy_values(&mut store, &ParamStore::load(&dir.join(PARAMS_FILE))?)?;
        let running = ParamStore::load(&dir.join(RUNNING_FILE))?;
        let values: Vec<Mat> = running.iter().map(|(_, p)| p.value.clone()).collect();
        if values.len() != 2 * cfg.encoder.n_layers {
            return Err(ModelError::Checkpoint(format!(
                "expected {} running tensors, found {}",
                2 * cfg.encoder.n_layers,
                values.len()
            )));
        }
        let pairs = values.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
        encoder.set_running_stats(pairs).map_err(ModelError::Checkpoint)?;
        Ok(Self {
            model,
            encoder,
            head,
            store,
            losses: Vec::new(),
            skipped_epochs: 0,
            peak_tape: TapeStats::default(),
        })
    }
}

/// Nodes entering the node-level objectives of one epoch.
fn node_batch(n: usize, batch: usize, seed: u64) -> std::sync::Arc<Vec<usize>> {
    let mut idx = if batch >= n {
        (0..n).collect()
    } else {
        index::sample(&mut seed::rng(seed), n, batch).into_vec()
    };
    idx.sort_unstable();
    std::sync::Arc::new(idx)
}

struct EpochViews {
    g1: PreparedGraph,
    g2: PreparedGraph,
    a1: Graph,
    a2: Graph,
}

/// The objective of one epoch on a tape. `None` when the views share no link.
#[allow(clippy::too_many_arguments)]
fn epoch_loss(
    tape: &mut Tape,
    model: ModelKind,
    encoder: &Encoder,
    head: &Head,
    store: &ParamStore,
    target: Option<&EmaShadow>,
    views: &EpochViews,
    cfg: &TrainConfig,
    epoch_seed: u64,
) -> Result<Option<(Var, EncoderOutput, EncoderOutput)>> {
    let o1 = encoder.forward(tape, Source::Online(store), &views.g1, Mode::Train);
    let o2 = encoder.forward(tape, Source::Online(store), &views.g2, Mode::Train);
    let mlp = head.mlp();
    let loss = match model {
        ModelKind::Grace => {
            let idx = node_batch(views.g1.n(), cfg.batch_size, seed::derive(epoch_seed, "nodes"));
            let h1 = tape.gather_rows(o1.h, &idx);
            let h2 = tape.gather_rows(o2.h, &idx);
            let z1 = mlp.forward(tape, store, h1);
            let z2 = mlp.forward(tape, store, h2);
            grace_loss(tape, z1, z2, cfg.tau)?
        }
        ModelKind::Bgrl => {
            let target = target.expect("asymmetric model has a target");
            let t1 = encoder.forward(tape, Source::Target(target), &views.g1, Mode::Train).h;
            let t2 = encoder.forward(tape, Source::Target(target), &views.g2, Mode::Train).h;
            let p1 = mlp.forward(tape, store, o1.h);
            let p2 = mlp.forward(tape, store, o2.h);
            symmetric_bgrl_loss(tape, p1, t2, p2, t1)?
        }
        ModelKind::Lgrace => {
            let Some(links) = select_link_sets(&views.a1, &views.a2, cfg.batch_size, epoch_seed)? else {
                return Ok(None);
            };
            let reps = [(o1.h, &links.positives), (o2.h, &links.positives), (o1.h, &links.negatives), (o2.h, &links.negatives)]
                .map(|(h, pairs)| {
                    let x = hadamard(tape, h, pairs);
                    mlp.forward(tape, store, x)
                });
            let opts = LinkContrast {
                anchor: cfg.lgrace_anchor,
                include_positive: cfg.include_positive_in_denominator,
            };
            lgrace_loss(tape, reps[0], reps[1], reps[2], reps[3], cfg.tau, opts)?
        }
        ModelKind::Lbgrl => {
            let Some(links) = select_link_sets(&views.a1, &views.a2, cfg.batch_size, epoch_seed)? else {
                return Ok(None);
            };
            let target = target.expect("asymmetric model has a target");
            let t1 = encoder.forward(tape, Source::Target(target), &views.g1, Mode::Train).h;
            let t2 = encoder.forward(tape, Source::Target(target), &views.g2, Mode::Train).h;
            let pos = &links.positives;
            let l1 = hadamard(tape, o1.h, pos);
            let l2 = hadamard(tape, o2.h, pos);
            let p1 = mlp.forward(tape, store, l1);
            let p2 = mlp.forward(tape, store, l2);
            let h1 = hadamard(tape, t1, pos);
            let h2 = hadamard(tape, t2, pos);
            symmetric_bgrl_loss(tape, p1, h2, p2, h1)?
        }
        ModelKind::GcnSupervised => unreachable!("rejected by build"),
    };
    Ok(Some((loss, o1, o2)))
}

/// Pre-train an encoder on `split.train_graph` with views drawn from `spec`.
///
/// `init_seed` fixes the parameter initialization and `aug_seed` the
/// per-epoch views and link samples. `blocks` is required by the
/// community-based augmentations.
pub fn train_encoder(
    split: &EdgeSplit,
    spec: &AugmentationSpec,
    model: ModelKind,
    cfg: &TrainConfig,
    init_seed: u64,
    aug_seed: u64,
    blocks: Option<&BlockState>,
) -> Result<TrainedEncoder> {
    let g = &split.train_graph;
    if g.num_edges() == 0 {
        return Err(ModelError::NoTrainingEdges);
    }
    spec.validate().map_err(ModelError::Config)?;
    let mut store = ParamStore::new();
    let (mut encoder, head) = build(&mut store, model, g.features().cols(), cfg, init_seed)?;
    let mut target = model
        .is_asymmetric()
        .then(|| EmaShadow::new(&store, &encoder.param_ids(), cfg.ema_decay));
    let generator = ViewGenerator::new(g, spec, blocks)?;
    let opt = AdamW::new(cfg.gnn_lr, cfg.weight_decay);

    let mut losses = Vec::with_capacity(cfg.ct_epochs);
    let mut skipped = 0;
    let mut peak_tape = TapeStats::default();
    for epoch in 0..cfg.ct_epochs {
        let epoch_seed = seed::derive_indexed(aug_seed, "epoch", epoch as u64);
        let (a1, a2) = generator.views(seed::derive(epoch_seed, "views"))?;
        let views = EpochViews {
            g1: PreparedGraph::new(&a1),
            g2: PreparedGraph::new(&a2),
            a1,
            a2,
        };
        let mut tape = Tape::new();
        let Some((loss, o1, o2)) = epoch_loss(
            &mut tape,
            model,
            &encoder,
            &head,
            &store,
            target.as_ref(),
            &views,
            cfg,
            epoch_seed,
        )?
        else {
            skipped += 1;
            log::debug!("epoch {epoch}: views share no link, skipped");
            continue;
        };
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(ModelError::Divergence { epoch, loss: value });
        }
        store.zero_grad();
        tape.backward(loss, &mut store)?;
        opt.step(&mut store);
        if store.has_non_finite() {
            return Err(ModelError::Divergence { epoch, loss: value });
        }
        encoder.update_running_stats(&tape, &o1);
        encoder.update_running_stats(&tape, &o2);
        if let Some(t) = target.as_mut() {
            t.update(&store);
        }
        let stats = tape.stats();
        if stats.live_elements > peak_tape.live_elements {
            peak_tape = stats;
        }
        log::trace!("epoch {epoch}: loss {value:.6}");
        losses.push(value);
    }
    Ok(TrainedEncoder {
        model,
        encoder,
        head,
        store,
        losses,
        skipped_epochs: skipped,
        peak_tape,
    })
}

/// Frozen embeddings plus a link decoder; scores are `sigmoid(logit)`.
#[derive(Debug, Clone)]
pub struct LinkPredictor {
    pub embeddings: Mat,
    pub decoder: Decoder,
    pub store: ParamStore,
    /// Mean decoder loss of every decoder epoch.
    pub losses: Vec<f64>,
}

const EMBEDDINGS_FILE: &str = "embeddings.params";
const DECODER_FILE: &str = "decoder.params";

/// `h_u * h_v` rows for `pairs`, computed outside any tape.
fn hadamard_rows(h: &Mat, pairs: &[Edge]) -> Mat {
    let d = h.ncols();
    let mut out = Mat::zeros((pairs.len(), d));
    for (k, &(u, v)) in pairs.iter().enumerate() {
        let mut row = out.row_mut(k);
        row.assign(&(&h.row(u) * &h.row(v)));
    }
    out
}

impl LinkPredictor {
    fn from_parts(embeddings: Mat, decoder: &Decoder, store: &ParamStore, losses: Vec<f64>) -> Self {
        let (d, hidden, _) = decoder.mlp.dims();
        let mut own = ParamStore::new();
        let fresh = Decoder::new(&mut own, d, hidden, &mut seed::rng(0));
        for (dst, src) in fresh.mlp.param_ids().into_iter().zip(decoder.mlp.param_ids()) {
            own.get_mut(dst).value = store.value(src).clone();
        }
        Self {
            embeddings,
            decoder: fresh,
            store: own,
            losses,
        }
    }

    /// Write `embeddings.params` and `decoder.params` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| lpssl_autodiff::Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut emb = ParamStore::new();
        emb.add("embeddings", self.embeddings.clone());
        emb.save(&dir.join(EMBEDDINGS_FILE))?;
        self.store.save(&dir.join(DECODER_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let emb = ParamStore::load(&dir.join(EMBEDDINGS_FILE))?;
        let embeddings = emb
            .iter()
            .find(|(_, p)| p.name == "embeddings")
            .map(|(_, p)| p.value.clone())
            .ok_or_else(|| ModelError::Checkpoint("no embeddings tensor".into()))?;
        let saved = ParamStore::load(&dir.join(DECODER_FILE))?;
        let hidden = saved
            .iter()
            .find(|(_, p)| p.name == "decoder.w1")
            .map(|(_, p)| p.value.ncols())
            .ok_or_else(|| ModelError::Checkpoint("no decoder.w1 tensor".into()))?;
        let mut store = ParamStore::new();
        let decoder = Decoder::new(&mut store, embeddings.ncols(), hidden, &mut seed::rng(0));
        copy_values(&mut store, &saved)?;
        Ok(Self {
            embeddings,
            decoder,
            store,
            losses: Vec::new(),
        })
    }
}

impl PairScorer for LinkPredictor {
    fn score_pairs(&self, pairs: &[Edge]) -> Vec<f64> {
        if pairs.is_empty() {
            return Vec::new();
        }
        let mut tape = Tape::new();
        let x = tape.constant(hadamard_rows(&self.embeddings, pairs));
        let logits = self.decoder.logits(&mut tape, &self.store, x);
        let s = tape.sigmoid(logits);
        tape.value(s).iter().copied().collect()
    }
}

/// Zero `round(rate * d)` random columns; `None` when nothing is masked.
fn column_mask(d: usize, rate: f64, rng: &mut seed::Rng) -> Option<Mat> {
    let k = (rate * d as f64).round() as usize;
    if k == 0 {
        return None;
    }
    let mut m = Mat::ones((1, d));
    for j in index::sample(rng, d, k.min(d)) {
        m[[0, j]] = 0.0;
    }
    Some(m)
}

/// Decoder loss of one batch of training positives and fresh negatives.
fn batch_loss(
    tape: &mut Tape,
    h: Var,
    decoder: &Decoder,
    store: &ParamStore,
    batch: &[Edge],
    g: &Graph,
    cfg: &TrainConfig,
    rng: &mut seed::Rng,
) -> Result<Var> {
    let negatives = sample_negative_pairs_with(rng, g, batch.len(), &EdgeSet::new())?;
    if negatives.is_empty() {
        return Err(ModelError::NoNegatives);
    }
    let h = match cfg.mask_input.then(|| column_mask(tape.shape(h).1, cfg.mask_input_rate, rng)).flatten() {
        Some(m) => {
            let m = tape.constant(m);
            tape.mul_row(h, m)
        }
        None => h,
    };
    let xp = hadamard(tape, h, batch);
    let xn = hadamard(tape, h, &negatives);
    let zp = decoder.logits(tape, store, xp);
    let zn = decoder.logits(tape, store, xn);
    Ok(decoder_loss(tape, zp, zn, cfg.loss_func))
}

fn check_loss(epoch: usize, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Divergence { epoch, loss: value })
    }
}

fn shuffled_batches(edges: &[Edge], batch_size: usize, rng: &mut seed::Rng) -> Vec<Vec<Edge>> {
    let mut order = edges.to_vec();
    order.shuffle(rng);
    order.chunks(batch_size.min(order.len()).max(1)).map(<[Edge]>::to_vec).collect()
}

/// Fit a link decoder on frozen `embeddings` using the training links of
/// `split`: `decoder_epochs` passes over shuffled batches of positives, each
/// paired with as many fresh negatives drawn from non-edges of the training
/// graph.
pub fn train_decoder(embeddings: &Mat, split: &EdgeSplit, cfg: &TrainConfig, seed: u64) -> Result<LinkPredictor> {
    cfg.check().map_err(ModelError::Config)?;
    if split.train_pos.is_empty() {
        return Err(ModelError::NoTrainingEdges);
    }
    let mut rng = seed::rng(seed);
    let mut store = ParamStore::new();
    let decoder = Decoder::new(&mut store, embeddings.ncols(), cfg.proj_hidden, &mut rng);
    let opt = AdamW::new(cfg.pred_lr, cfg.weight_decay);
    let mut losses = Vec::with_capacity(cfg.decoder_epochs);
    for epoch in 0..cfg.decoder_epochs {
        let mut total = 0.0;
        let batches = shuffled_batches(&split.train_pos, cfg.batch_size, &mut rng);
        for batch in &batches {
            let mut tape = Tape::new();
            let h = tape.constant(embeddings.clone());
            let loss = batch_loss(&mut tape, h, &decoder, &store, batch, &split.train_graph, cfg, &mut rng)?;
            let value = tape.scalar(loss);
            check_loss(epoch, value)?;
            store.zero_grad();
            tape.backward(loss, &mut store)?;
            opt.step(&mut store);
            total += value;
        }
        losses.push(total / batches.len() as f64);
    }
    Ok(LinkPredictor {
        embeddings: embeddings.clone(),
        decoder,
        store,
        losses,
    })
}

/// Supervised baseline: GCN encoder and decoder trained jointly on the
/// training links, one full encoder pass per batch.
pub fn train_supervised_gcn(split: &EdgeSplit, cfg: &TrainConfig, init_seed: u64, seed: u64) -> Result<LinkPredictor> {
    cfg.check().map_err(ModelError::Config)?;
    let g = &split.train_graph;
    if split.train_pos.is_empty() || g.num_edges() == 0 {
        return Err(ModelError::NoTrainingEdges);
    }
    let mut init = seed::rng(init_seed);
    let mut store = ParamStore::new();
    let mut encoder = Encoder::new(&mut store, "encoder", g.features().cols(), &cfg.encoder, &mut init);
    let decoder = Decoder::new(&mut store, encoder.out_dim(), cfg.proj_hidden, &mut init);
    let enc_ids = encoder.param_ids();
    let dec_ids = decoder.mlp.param_ids();
    let enc_opt = AdamW::new(cfg.gnn_lr, cfg.weight_decay);
    let dec_opt = AdamW::new(cfg.pred_lr, cfg.weight_decay);
    let pg = PreparedGraph::new(g);
    let mut rng = seed::rng(seed);
    let mut losses = Vec::with_capacity(cfg.decoder_epochs);
    for epoch in 0..cfg.decoder_epochs {
        let mut total = 0.0;
        let batches = shuffled_batches(&split.train_pos, cfg.batch_size, &mut rng);
        for batch in &batches {
            let mut tape = Tape::new();
            let out = encoder.forward(&mut tape, Source::Online(&store), &pg, Mode::Train);
            let loss = batch_loss(&mut tape, out.h, &decoder, &store, batch, g, cfg, &mut rng)?;
            let value = tape.scalar(loss);
            check_loss(epoch, value)?;
            store.zero_grad();
            tape.backward(loss, &mut store)?;
            enc_opt.step_params(&mut store, &enc_ids);
            dec_opt.step_params(&mut store, &dec_ids);
            if store.has_non_finite() {
                return Err(ModelError::Divergence { epoch, loss: value });
            }
            encoder.update_running_stats(&tape, &out);
            total += value;
        }
        losses.push(total / batches.len() as f64);
    }
    let mut tape = Tape::new();
    let h = encoder.forward(&mut tape, Source::Online(&store), &pg, Mode::Eval).h;
    Ok(LinkPredictor::from_parts(tape.value(h).clone(), &decoder, &store, losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EncoderConfig;
    use crate::config::Norm;
    use lpssl_core::augment::AugKind;
    use lpssl_core::graph::{random_link_split, SplitFractions};

    fn two_triangles() -> EdgeSplit {
        let g = Graph::new(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap();
        EdgeSplit {
            train_pos: g.edges().to_vec(),
            train_graph: g,
            val_pos: Vec::new(),
            test_pos: Vec::new(),
            seed: 0,
        }
    }

    fn tiny_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            encoder: EncoderConfig {
                n_layers: 2,
                layer_size: 8,
                norm: Norm::Batch,
                batchnorm_momentum: 0.9,
                weight_standardization: false,
            },
            ct_epochs: epochs,
            batch_size: 64,
            gnn_lr: 1e-2,
            pred_lr: 1e-2,
            proj_hidden: 8,
            decoder_epochs: 30,
            ..TrainConfig::default()
        }
    }

    fn spec() -> AugmentationSpec {
        AugmentationSpec::new(AugKind::Random).with_rates((0.2, 0.2), (0.1, 0.1))
    }

    #[test]
    fn grace_loss_decreases() {
        let t = train_encoder(&two_triangles(), &spec(), ModelKind::Grace, &tiny_cfg(60), 1, 2, None).unwrap();
        let head: f64 = t.losses[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 = t.losses[t.losses.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(tail < head, "first {head}, last {tail}");
    }

    #[test]
    fn training_is_deterministic() {
        for model in [ModelKind::Grace, ModelKind::Bgrl, ModelKind::Lgrace, ModelKind::Lbgrl] {
            let a = train_encoder(&two_triangles(), &spec(), model, &tiny_cfg(5), 3, 4, None).unwrap();
            let b = train_encoder(&two_triangles(), &spec(), model, &tiny_cfg(5), 3, 4, None).unwrap();
            assert_eq!(a.losses, b.losses, "{}", model.as_str());
            let g = &two_triangles().train_graph;
            assert_eq!(a.embed(g), b.embed(g));
        }
    }

    #[test]
    fn supervised_model_has_no_pretraining() {
        let r = train_encoder(&two_triangles(), &spec(), ModelKind::GcnSupervised, &tiny_cfg(1), 0, 0, None);
        assert!(matches!(r, Err(ModelError::Config(_))));
    }

    #[test]
    fn encoder_checkpoint_round_trip() {
        let split = two_triangles();
        let cfg = tiny_cfg(3);
        let t = train_encoder(&split, &spec(), ModelKind::Bgrl, &cfg, 5, 6, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        t.save(dir.path()).unwrap();
        let back = TrainedEncoder::load(dir.path(), ModelKind::Bgrl, &cfg, 6).unwrap();
        assert_eq!(t.embed(&split.train_graph), back.embed(&split.train_graph));
        assert!(TrainedEncoder::load(dir.path(), ModelKind::Grace, &cfg, 6).is_err());
    }

    /// Two dense communities joined by one edge; held-out links inside them.
    fn communities() -> EdgeSplit {
        let mut edges = Vec::new();
        for base in [0, 10] {
            for i in 0..10 {
                for j in i + 1..10 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((0, 10));
        let g = Graph::new(20, edges).unwrap();
        random_link_split(&g, SplitFractions::default(), 9).unwrap()
    }

    #[test]
    fn decoder_separates_communities() {
        let split = communities();
        let mut h = Mat::zeros((20, 4));
        for i in 0..20 {
            h[[i, if i < 10 { 0 } else { 1 }]] = 1.0;
            h[[i, 2]] = 0.1 * i as f64;
        }
        let mut cfg = tiny_cfg(1);
        cfg.decoder_epochs = 200;
        let p = train_decoder(&h, &split, &cfg, 1).unwrap();
        let m = lpssl_eval::evaluate_split(&p, &split, 20, 3).unwrap();
        assert!(m.auc > 0.9, "{m:?}");
        let dir = tempfile::tempdir().unwrap();
        p.save(dir.path()).unwrap();
        let back = LinkPredictor::load(dir.path()).unwrap();
        let pairs = [(0, 1), (3, 17)];
        assert_eq!(p.score_pairs(&pairs), back.score_pairs(&pairs));
    }

    #[test]
    fn supervised_gcn_learns() {
        let split = communities();
        let mut cfg = tiny_cfg(1);
        cfg.decoder_epochs = 60;
        cfg.mask_input = true;
        let p = train_supervised_gcn(&split, &cfg, 1, 2).unwrap();
        assert!(p.losses.last().unwrap() < p.losses.first().unwrap(), "{:?}", p.losses);
        let m = lpssl_eval::evaluate_split(&p, &split, 20, 3).unwrap();
        assert!(m.auc > 0.7, "{m:?}");
    }

    #[test]
    fn column_mask_zeroes_expected_count() {
        let m = column_mask(20, 0.1, &mut seed::rng(1)).unwrap();
        assert_eq!(m.iter().filter(|&&v| v == 0.0).count(), 2);
        assert!(column_mask(4, 0.1, &mut seed::rng(1)).is_none());
    }
}
