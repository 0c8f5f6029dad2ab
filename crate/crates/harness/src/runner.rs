//! Seeded experiment execution.
//!
//! One run seed fixes the split, community detection, augmentation draws,
//! initialization, decoder negatives and evaluation negatives through its
//! [`SeedLineage`]. Seeds run as independent jobs on a bounded worker pool.
//!
//! Per-seed outputs go to `<out>/<dataset>/<model>_<aug>/<seed>/`:
//! `config.toml`, `lineage.json`, `metrics.csv`, `val_metrics.csv`,
//! `losses.csv`, `decoder_losses.csv` and `checkpoint/`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lpssl_core::community::{detector_for, BlockState};
use lpssl_core::dataset::{builtin_manifest, load_dataset, DatasetManifest, ManifestFile};
use lpssl_core::graph::{random_link_split, EdgeSplit};
use lpssl_core::seed::{self, SeedLineage};
use lpssl_core::Graph;
use lpssl_eval::protocol::metrics;
use lpssl_eval::{evaluate_split, score_part, Metrics, Part};
use lpssl_models::{train_decoder, train_encoder, train_supervised_gcn, LinkPredictor, TrainedEncoder};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Environment variable holding the dataset root directory.
pub const DATA_ROOT_ENV: &str = "LPSSL_DATA_ROOT";

/// Optional manifest under the data root describing extra datasets.
pub const MANIFEST_FILE: &str = "datasets.toml";

pub fn data_root() -> PathBuf {
    std::env::var_os(DATA_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Manifest for `name`: `<root>/datasets.toml` first, then the built-ins.
pub fn manifest_for(name: &str, root: &Path) -> Result<DatasetManifest> {
    let file = root.join(MANIFEST_FILE);
    if file.exists() {
        let m = ManifestFile::load(&file)?;
        if let Some(d) = m.datasets.into_iter().find(|d| d.name.eq_ignore_ascii_case(name)) {
            return Ok(d);
        }
    }
    Ok(builtin_manifest(name)?)
}

/// Load and validate a dataset from `root`.
pub fn load_graph(name: &str, root: &Path) -> Result<Graph> {
    let manifest = manifest_for(name, root)?;
    let path = if manifest.path.is_absolute() {
        manifest.path.clone()
    } else {
        root.join(&manifest.path)
    };
    if !path.exists() {
        return Err(HarnessError::DatasetNotFound {
            name: name.to_string(),
            root: root.to_path_buf(),
        });
    }
    Ok(load_dataset(&manifest, root)?)
}

pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub lineage: SeedLineage,
    pub validation: Metrics,
    pub test: Metrics,
    /// Edge count of the graph handed to the community detector.
    pub detector_edges: Option<usize>,
    pub encoder_losses: Vec<f64>,
    pub decoder_losses: Vec<f64>,
    pub encoder: Option<TrainedEncoder>,
    pub predictor: LinkPredictor,
}

/// The split of run `seed`, reproducible from the seed alone.
pub fn split_for(g: &Graph, cfg: &ExperimentConfig, seed: u64) -> Result<EdgeSplit> {
    let lineage = SeedLineage::new(seed);
    Ok(random_link_split(g, cfg.split, lineage.split)?)
}

/// Block state for community-based augmentations. Oracle kinds detect on the
/// full graph, the others on the training graph only.
fn detect_blocks(
    g: &Graph,
    split: &EdgeSplit,
    cfg: &ExperimentConfig,
    lineage: &SeedLineage,
) -> Result<Option<(BlockState, usize)>> {
    let kind = cfg.augmentation.kind;
    if !cfg.model.is_self_supervised() || !kind.needs_blocks() {
        return Ok(None);
    }
    let detector = detector_for(cfg.augmentation.detector, cfg.partition_dir.as_deref(), &cfg.dataset)?;
    let input = if kind.is_oracle() { g } else { &split.train_graph };
    log::info!(
        "{} seed {}: {} on {} graph, detector input edges = {}",
        cfg.dataset,
        lineage.run,
        detector.name(),
        if kind.is_oracle() { "full" } else { "training" },
        input.num_edges()
    );
    let blocks = detector.detect(input, lineage.detection)?;
    Ok(Some((blocks, input.num_edges())))
}

/// Train and evaluate one seed.
pub fn run_seed(g: &Graph, cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    cfg.check()?;
    let lineage = SeedLineage::new(seed);
    log::info!("{} {} seed lineage {:?}", cfg.dataset, cfg.run_name(), lineage);
    let split = random_link_split(g, cfg.split, lineage.split)?;
    let blocks = detect_blocks(g, &split, cfg, &lineage)?;
    let (encoder, predictor) = if cfg.model.is_self_supervised() {
        let enc = train_encoder(
            &split,
            &cfg.augmentation,
            cfg.model,
            &cfg.train,
            lineage.init,
            lineage.augmentation,
            blocks.as_ref().map(|(b, _)| b),
        )?;
        if enc.skipped_epochs > 0 {
            log::warn!("seed {seed}: {} epochs skipped (views shared no link)", enc.skipped_epochs);
        }
        let h = enc.embed(&split.train_graph);
        let predictor = train_decoder(&h, &split, &cfg.train, lineage.decoder)?;
        (Some(enc), predictor)
    } else {
        let predictor = train_supervised_gcn(&split, &cfg.train, lineage.init, lineage.decoder)?;
        (None, predictor)
    };
    let val_set = score_part(&predictor, &split, Part::Validation, seed::derive(lineage.evaluation, "validation"))?;
    let validation = metrics(&val_set, cfg.hits_k).map_err(lpssl_eval::EvalError::from)?;
    let test = evaluate_split(&predictor, &split, cfg.hits_k, lineage.evaluation)?;
    Ok(SeedOutcome {
        seed,
        lineage,
        validation,
        test,
        detector_edges: blocks.map(|(_, m)| m),
        encoder_losses: encoder.as_ref().map(|e| e.losses.clone()).unwrap_or_default(),
        decoder_losses: predictor.losses.clone(),
        encoder,
        predictor,
    })
}

/// Outcome of one seed inside an experiment; failures keep their message.
#[derive(Debug)]
pub struct SeedRecord {
    pub seed: u64,
    pub outcome: std::result::Result<SeedOutcome, String>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<SeedRecord>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    (m, v.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub hits: (f64, f64),
    pub ap: (f64, f64),
    pub auc: (f64, f64),
    pub seeds: usize,
}

impl ExperimentReport {
    pub fn successes(&self) -> impl Iterator<Item = &SeedOutcome> {
        self.records.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &str)> {
        self.records
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.seed, e.as_str())))
    }

    /// Test-metric mean and std over successful seeds.
    pub fn summary(&self) -> Summary {
        let col = |f: fn(&Metrics) -> f64| mean_std(&self.successes().map(|o| f(&o.test)).collect::<Vec<_>>());
        Summary {
            hits: col(|m| m.hits),
            ap: col(|m| m.ap),
            auc: col(|m| m.auc),
            seeds: self.successes().count(),
        }
    }

    /// One row per successful seed:
    /// `dataset,model,augmentation,seed,hits_at_<k>,ap,auc`.
    pub fn metrics_csv(&self) -> String {
        let mut out = metrics_header(self.config.hits_k);
        for o in self.successes() {
            push_metrics_row(&mut out, &self.config, o.seed, &o.test);
        }
        out
    }

    /// One aggregate row per metric: `metric,mean,std,seeds`.
    pub fn summary_csv(&self) -> String {
        let s = self.summary();
        let mut out = String::from("metric,mean,std,seeds\n");
        for (name, (m, sd)) in [(format!("hits_at_{}", self.config.hits_k), s.hits), ("ap".into(), s.ap), ("auc".into(), s.auc)] {
            let _ = writeln!(out, "{name},{m},{sd},{}", s.seeds);
        }
        out
    }
}

pub fn metrics_header(k: usize) -> String {
    format!("dataset,model,augmentation,seed,hits_at_{k},ap,auc\n")
}

fn push_metrics_row(out: &mut String, cfg: &ExperimentConfig, seed: u64, m: &Metrics) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        cfg.dataset,
        cfg.model.as_str(),
        cfg.augmentation_label(),
        seed,
        m.hits,
        m.ap,
        m.auc
    );
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{e},{l}");
    }
    out
}

/// `<out>/<dataset>/<model>_<aug>`.
pub fn run_dir(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(&cfg.dataset).join(cfg.run_name())
}

/// Write the per-seed directory of `o`.
pub fn write_seed(out: &Path, cfg: &ExperimentConfig, o: &SeedOutcome) -> Result<()> {
    let dir = run_dir(out, cfg).join(o.seed.to_string());
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut snapshot = cfg.clone();
    snapshot.seeds = vec![o.seed];
    snapshot.save(&dir.join("config.toml"))?;
    let lineage = serde_json::to_string_pretty(&o.lineage).map_err(|e| HarnessError::Results(e.to_string()))?;
    write(&dir.join("lineage.json"), &lineage)?;
    let mut m = metrics_header(cfg.hits_k);
    push_metrics_row(&mut m, cfg, o.seed, &o.test);
    write(&dir.join("metrics.csv"), &m)?;
    let mut v = metrics_header(cfg.hits_k);
    push_metrics_row(&mut v, cfg, o.seed, &o.validation);
    write(&dir.join("val_metrics.csv"), &v)?;
    write(&dir.join("losses.csv"), &loss_csv(&o.encoder_losses))?;
    write(&dir.join("decoder_losses.csv"), &loss_csv(&o.decoder_losses))?;
    let ckpt = dir.join("checkpoint");
    if let Some(enc) = &o.encoder {
        enc.save(&ckpt.join("encoder"))?;
    }
    o.predictor.save(&ckpt.join("predictor"))?;
    Ok(())
}

/// Run every seed of `cfg` on `workers` threads. Seed failures are recorded
/// and do not stop the other seeds. With `out`, per-seed directories and the
/// experiment-level `metrics.csv`, `summary.csv` and `errors.csv` are written.
pub fn run_experiment(g: &Graph, cfg: &ExperimentConfig, out: Option<&Path>, workers: usize) -> Result<ExperimentReport> {
    cfg.check()?;
    let pool = worker_pool(workers)?;
    let records: Vec<SeedRecord> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let outcome = run_seed(g, cfg, seed).and_then(|o| {
                    if let Some(out) = out {
                        write_seed(out, cfg, &o)?;
                    }
                    Ok(o)
                });
                if let Err(e) = &outcome {
                    log::error!("{} {} seed {seed} failed: {e}", cfg.dataset, cfg.run_name());
                }
                SeedRecord {
                    seed,
                    outcome: outcome.map_err(|e| e.to_string()),
                }
            })
            .collect()
    });
    let report = ExperimentReport {
        config: cfg.clone(),
        records,
    };
    if let Some(out) = out {
        let dir = run_dir(out, cfg);
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        cfg.save(&dir.join("config.toml"))?;
        write(&dir.join("metrics.csv"), &report.metrics_csv())?;
        write(&dir.join("summary.csv"), &report.summary_csv())?;
        let mut errors = String::from("seed,error\n");
        for (seed, e) in report.failures() {
            let _ = writeln!(errors, "{seed},\"{}\"", e.replace('"', "'"));
        }
        write(&dir.join("errors.csv"), &errors)?;
    }
    Ok(report)
}

/// Re-evaluate a saved seed directory on its regenerated split.
pub fn evaluate_checkpoint(g: &Graph, seed_dir: &Path) -> Result<(ExperimentConfig, Metrics)> {
    let cfg = ExperimentConfig::load(&seed_dir.join("config.toml"))?;
    let seed = *cfg
        .seeds
        .first()
        .ok_or_else(|| HarnessError::Config("config snapshot lists no seed".into()))?;
    let split = split_for(g, &cfg, seed)?;
    let predictor = LinkPredictor::load(&seed_dir.join("checkpoint").join("predictor"))?;
    let m = evaluate_split(&predictor, &split, cfg.hits_k, SeedLineage::new(seed).evaluation)?;
    Ok((cfg, m))
}
