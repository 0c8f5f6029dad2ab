//! View generation for contrastive training.
//!
//! Every augmentation keeps the node set and produces two views `(G', G'')`
//! from a graph, an [`AugmentationSpec`] and a seed:
//!
//! * `random`: independent edge dropping and feature-column masking.
//! * `deg` / `evc` / `pr`: centrality-adaptive dropping and masking. Edge
//!   importance is `(ln(1 + c_u) + ln(1 + c_v)) / 2`; every importance-driven
//!   probability is `min((s_max - s) / (s_max - s_mean) * rate, cutoff)`.
//! * `scom`: community-strength variant; edge importance is the mean block
//!   strength of its endpoints plus the global mean strength when both
//!   endpoints share a block.
//! * `sbm` / `sbm2` (and their `_oracle` twins): one or both views resampled
//!   from the microcanonical SBM fitted on the input graph.
//!
//! The adaptive formulas are reconstructions and sit behind
//! [`CentralityWeights`], so they can be swapped without touching callers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::community::{BlockState, DetectorKind};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::sbm::{fit_block_counts, sample_sbm, BlockEdgeCounts};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    Random,
    Deg,
    Evc,
    Pr,
    Scom,
    Sbm,
    Sbm2,
    SbmOracle,
    Sbm2Oracle,
}

impl AugKind {
    pub const ALL: [AugKind; 9] = [
        Self::Random,
        Self::Deg,
        Self::Evc,
        Self::Pr,
        Self::Scom,
        Self::Sbm,
        Self::Sbm2,
        Self::SbmOracle,
        Self::Sbm2Oracle,
    ];

    /// Augmentations that enter the per-model "optim" maximum.
    pub const ADAPTIVE: [AugKind; 6] = [
        Self::Deg,
        Self::Evc,
        Self::Pr,
        Self::Scom,
        Self::Sbm,
        Self::Sbm2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Deg => "deg",
            Self::Evc => "evc",
            Self::Pr => "pr",
            Self::Scom => "scom",
            Self::Sbm => "sbm",
            Self::Sbm2 => "sbm2",
            Self::SbmOracle => "sbm_oracle",
            Self::Sbm2Oracle => "sbm2_oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn needs_blocks(self) -> bool {
        matches!(
            self,
            Self::Scom | Self::Sbm | Self::Sbm2 | Self::SbmOracle | Self::Sbm2Oracle
        )
    }

    /// Block state detected on the full graph before splitting.
    pub fn is_oracle(self) -> bool {
        matches!(self, Self::SbmOracle | Self::Sbm2Oracle)
    }

    pub fn is_sbm(self) -> bool {
        matches!(
            self,
            Self::Sbm | Self::Sbm2 | Self::SbmOracle | Self::Sbm2Oracle
        )
    }

    pub fn is_adaptive(self) -> bool {
        Self::ADAPTIVE.contains(&self)
    }
}

fn default_cutoff() -> f64 {
    0.9
}

fn default_detector() -> DetectorKind {
    DetectorKind::Louvain
}

/// Augmentation settings; field names follow the tuning-table keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub kind: AugKind,
    #[serde(default)]
    pub drop_edge_rate_1: f64,
    #[serde(default)]
    pub drop_edge_rate_2: f64,
    #[serde(default)]
    pub drop_feature_rate_1: f64,
    #[serde(default)]
    pub drop_feature_rate_2: f64,
    #[serde(rename = "commu_detect", default = "default_detector")]
    pub detector: DetectorKind,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

impl AugmentationSpec {
    pub fn new(kind: AugKind) -> Self {
        Self {
            kind,
            drop_edge_rate_1: 0.0,
            drop_edge_rate_2: 0.0,
            drop_feature_rate_1: 0.0,
            drop_feature_rate_2: 0.0,
            detector: DetectorKind::Louvain,
            cutoff: default_cutoff(),
        }
    }

    pub fn with_rates(mut self, edge: (f64, f64), feature: (f64, f64)) -> Self {
        self.drop_edge_rate_1 = edge.0;
        self.drop_edge_rate_2 = edge.1;
        self.drop_feature_rate_1 = feature.0;
        self.drop_feature_rate_2 = feature.1;
        self
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, r) in [
            ("drop_edge_rate_1", self.drop_edge_rate_1),
            ("drop_edge_rate_2", self.drop_edge_rate_2),
            ("drop_feature_rate_1", self.drop_feature_rate_1),
            ("drop_feature_rate_2", self.drop_feature_rate_2),
        ] {
            if !(0.0..=0.9).contains(&r) {
                return Err(format!("{name} = {r} outside [0, 0.9]"));
            }
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 0.95) {
            return Err(format!("cutoff = {} outside (0, 0.95]", self.cutoff));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityKind {
    Degree,
    Eigenvector,
    Pagerank,
    CommunityStrength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityWeights {
    pub node_scores: Vec<f64>,
    pub kind: CentralityKind,
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 1000;
const DAMPING: f64 = 0.85;

/// Degree, eigenvector (L2-normalized) or PageRank (sums to 1) centrality.
///
/// Both iterative measures stop once the L1 change between iterates falls
/// below `n * 1e-8`. Eigenvector centrality iterates on `A + I`, which has the
/// same eigenvectors as `A` and avoids oscillation on bipartite graphs.
pub fn centrality(g: &Graph, kind: CentralityKind) -> Result<CentralityWeights> {
    let n = g.n();
    let node_scores = match kind {
        CentralityKind::Degree => g.degrees().into_iter().map(|d| d as f64).collect(),
        CentralityKind::Eigenvector => {
            let mut x = vec![1.0 / (n as f64).sqrt(); n];
            let mut converged = false;
            for _ in 0..POWER_MAX_ITERS {
                let mut y: Vec<f64> = (0..n)
                    .map(|u| x[u] + g.neighbors(u).iter().map(|&v| x[v]).sum::<f64>())
                    .collect();
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                y.iter_mut().for_each(|v| *v /= norm);
                let delta: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
                x = y;
                if delta < n as f64 * POWER_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence("eigenvector centrality", POWER_MAX_ITERS));
            }
            x
        }
        CentralityKind::Pagerank => {
            let deg = g.degrees();
            let mut p = vec![1.0 / n as f64; n];
            let mut converged = false;
            for _ in 0..POWER_MAX_ITERS {
                let dangling: f64 = (0..n).filter(|&u| deg[u] == 0).map(|u| p[u]).sum();
                let base = (1.0 - DAMPING) / n as f64 + DAMPING * dangling / n as f64;
                let next: Vec<f64> = (0..n)
                    .map(|u| {
                        base + DAMPING
                            * g.neighbors(u)
                                .iter()
                                .map(|&v| p[v] / deg[v] as f64)
                                .sum::<f64>()
                    })
                    .collect();
                let delta: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                p = next;
                if delta < n as f64 * POWER_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence("pagerank", POWER_MAX_ITERS));
            }
            p
        }
        CentralityKind::CommunityStrength => {
            return Err(Error::MissingBlockState("community_strength".into()))
        }
    };
    Ok(CentralityWeights { node_scores, kind })
}

/// Block density `e_c / C(size_c, 2)` broadcast to the block's nodes;
/// singleton blocks get 0.
pub fn community_strength(g: &Graph, b: &BlockState) -> Result<CentralityWeights> {
    let strengths = block_strengths(g, b)?;
    Ok(CentralityWeights {
        node_scores: b.assignment().iter().map(|&c| strengths[c]).collect(),
        kind: CentralityKind::CommunityStrength,
    })
}

fn block_strengths(g: &Graph, b: &BlockState) -> Result<Vec<f64>> {
    if b.num_nodes() != g.n() {
        return Err(Error::PartitionMismatch {
            blocks: b.num_nodes(),
            nodes: g.n(),
        });
    }
    let mut internal = vec![0usize; b.num_blocks()];
    for &(u, v) in g.edges() {
        if b.block_of(u) == b.block_of(v) {
            internal[b.block_of(u)] += 1;
        }
    }
    Ok(b.sizes()
        .iter()
        .zip(&internal)
        .map(|(&size, &e)| {
            if size < 2 {
                0.0
            } else {
                e as f64 / (size * (size - 1) / 2) as f64
            }
        })
        .collect())
}

/// `min((s_max - s) / (s_max - s_mean) * rate, cutoff)` per importance score,
/// or `None` when all scores coincide with their mean.
pub fn drop_probabilities(importance: &[f64], rate: f64, cutoff: f64) -> Option<Vec<f64>> {
    if importance.is_empty() {
        return None;
    }
    let max = importance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = importance.iter().sum::<f64>() / importance.len() as f64;
    let spread = max - mean;
    if spread <= 1e-12 * max.abs().max(1.0) {
        return None;
    }
    Some(
        importance
            .iter()
            .map(|&s| ((max - s) / spread * rate).clamp(0.0, cutoff))
            .collect(),
    )
}

fn check_rate(rate: f64) {
    assert!((0.0..1.0).contains(&rate), "rate {rate} outside [0, 1)");
}

fn keep_edges_with<R: Rng>(g: &Graph, rng: &mut R, mut p: impl FnMut(usize) -> f64) -> Graph {
    let kept = g
        .edges()
        .iter()
        .enumerate()
        .filter(|&(i, _)| rng.random::<f64>() >= p(i))
        .map(|(_, &e)| e)
        .collect();
    g.with_sorted_edges(kept)
}

fn keep_columns_with<R: Rng>(x: &FeatureMatrix, rng: &mut R, mut p: impl FnMut(usize) -> f64) -> FeatureMatrix {
    let keep: Vec<bool> = (0..x.cols()).map(|j| rng.random::<f64>() >= p(j)).collect();
    x.mask_columns(&keep)
}

/// Remove each edge independently with probability `rate`.
pub fn drop_edges_random(g: &Graph, rate: f64, seed: u64) -> Graph {
    check_rate(rate);
    keep_edges_with(g, &mut seed::rng(seed), |_| rate)
}

/// Zero whole feature columns, each independently with probability `rate`.
pub fn mask_features_random(x: &FeatureMatrix, rate: f64, seed: u64) -> FeatureMatrix {
    check_rate(rate);
    keep_columns_with(x, &mut seed::rng(seed), |_| rate)
}

/// Per-edge removal probabilities of the centrality-adaptive scheme.
pub fn edge_drop_probabilities(
    g: &Graph,
    w: &CentralityWeights,
    rate: f64,
    cutoff: f64,
) -> Option<Vec<f64>> {
    let importance: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(u, v)| ((1.0 + w.node_scores[u]).ln() + (1.0 + w.node_scores[v]).ln()) / 2.0)
        .collect();
    drop_probabilities(&importance, rate, cutoff)
}

/// Drop edges between unimportant nodes more often than edges between
/// central ones. Falls back to [`drop_edges_random`] when every edge has the
/// same importance.
pub fn adaptive_drop_edges(
    g: &Graph,
    w: &CentralityWeights,
    rate: f64,
    cutoff: f64,
    seed: u64,
) -> Graph {
    check_rate(rate);
    assert!(cutoff <= 0.95, "cutoff {cutoff} above 0.95");
    match edge_drop_probabilities(g, w, rate, cutoff) {
        Some(p) => keep_edges_with(g, &mut seed::rng(seed), |i| p[i]),
        None => {
            if g.num_edges() > 0 {
                log::warn!("degenerate edge importance, using uniform drop rate {rate}");
            }
            drop_edges_random(g, rate, seed)
        }
    }
}

/// Importance of every feature dimension: centrality-weighted count of
/// nonzero entries.
pub fn feature_importance(x: &FeatureMatrix, w: &CentralityWeights) -> Vec<f64> {
    x.weighted_column_support(&w.node_scores)
}

/// Mask feature columns used mostly by unimportant nodes more often.
pub fn adaptive_mask_features(
    x: &FeatureMatrix,
    w: &CentralityWeights,
    rate: f64,
    cutoff: f64,
    seed: u64,
) -> FeatureMatrix {
    check_rate(rate);
    match drop_probabilities(&feature_importance(x, w), rate, cutoff) {
        Some(p) => keep_columns_with(x, &mut seed::rng(seed), |j| p[j]),
        None => {
            log::warn!("degenerate feature importance, using uniform mask rate {rate}");
            mask_features_random(x, rate, seed)
        }
    }
}

/// Edge importances of the community-strength scheme.
pub fn scom_edge_importance(g: &Graph, b: &BlockState) -> Result<Vec<f64>> {
    let strengths = block_strengths(g, b)?;
    let bonus = strengths.iter().sum::<f64>() / strengths.len().max(1) as f64;
    Ok(g.edges()
        .iter()
        .map(|&(u, v)| {
            let (bu, bv) = (b.block_of(u), b.block_of(v));
            let base = (strengths[bu] + strengths[bv]) / 2.0;
            if bu == bv {
                base + bonus
            } else {
                base
            }
        })
        .collect())
}

/// Community-aware edge dropping: intra-block edges of dense blocks survive
/// more often than inter-block edges.
pub fn scom_drop_edges(
    g: &Graph,
    b: &BlockState,
    rate: f64,
    cutoff: f64,
    seed: u64,
) -> Result<Graph> {
    check_rate(rate);
    let importance = scom_edge_importance(g, b)?;
    Ok(match drop_probabilities(&importance, rate, cutoff) {
        Some(p) => keep_edges_with(g, &mut seed::rng(seed), |i| p[i]),
        None => {
            log::warn!("degenerate community importance, using uniform drop rate {rate}");
            drop_edges_random(g, rate, seed)
        }
    })
}

enum Mode {
    Random,
    Weighted(CentralityWeights),
    Scom(BlockState, CentralityWeights),
    Sbm { counts: BlockEdgeCounts, both: bool },
}

/// Precomputes everything a spec needs (centralities, block counts) so that
/// each epoch only pays for the random draws.
pub struct ViewGenerator<'a> {
    graph: &'a Graph,
    spec: AugmentationSpec,
    mode: Mode,
}

impl<'a> ViewGenerator<'a> {
    pub fn new(g: &'a Graph, spec: &AugmentationSpec, blocks: Option<&BlockState>) -> Result<Self> {
        let need_blocks = || blocks.ok_or_else(|| Error::MissingBlockState(spec.kind.as_str().into()));
        let mode = match spec.kind {
            AugKind::Random => Mode::Random,
            AugKind::Deg => Mode::Weighted(centrality(g, CentralityKind::Degree)?),
            AugKind::Evc => Mode::Weighted(centrality(g, CentralityKind::Eigenvector)?),
            AugKind::Pr => Mode::Weighted(centrality(g, CentralityKind::Pagerank)?),
            AugKind::Scom => {
                let b = need_blocks()?;
                Mode::Scom(b.clone(), community_strength(g, b)?)
            }
            AugKind::Sbm | AugKind::SbmOracle | AugKind::Sbm2 | AugKind::Sbm2Oracle => Mode::Sbm {
                counts: fit_block_counts(g, need_blocks()?)?,
                both: matches!(spec.kind, AugKind::Sbm2 | AugKind::Sbm2Oracle),
            },
        };
        Ok(Self {
            graph: g,
            spec: spec.clone(),
            mode,
        })
    }

    /// Block-pair counts driving the SBM views, when applicable.
    pub fn block_counts(&self) -> Option<&BlockEdgeCounts> {
        match &self.mode {
            Mode::Sbm { counts, .. } => Some(counts),
            _ => None,
        }
    }

    fn one_view(&self, edge_rate: f64, feature_rate: f64, seed: u64) -> Result<Graph> {
        let g = self.graph;
        let (es, fs) = (seed::derive(seed, "edges"), seed::derive(seed, "features"));
        let cutoff = self.spec.cutoff;
        Ok(match &self.mode {
            Mode::Random => drop_edges_random(g, edge_rate, es)
                .replace_features(mask_features_random(g.features(), feature_rate, fs)),
            Mode::Weighted(w) => adaptive_drop_edges(g, w, edge_rate, cutoff, es)
                .replace_features(adaptive_mask_features(g.features(), w, feature_rate, cutoff, fs)),
            Mode::Scom(b, w) => scom_drop_edges(g, b, edge_rate, cutoff, es)?
                .replace_features(adaptive_mask_features(g.features(), w, feature_rate, cutoff, fs)),
            Mode::Sbm { counts, .. } => {
                sample_sbm(counts, seed)?.replace_features(g.features().clone())
            }
        })
    }

    /// The two views for one epoch.
    pub fn views(&self, seed: u64) -> Result<(Graph, Graph)> {
        let (s1, s2) = (seed::derive(seed, "view1"), seed::derive(seed, "view2"));
        let s = &self.spec;
        if let Mode::Sbm { both: false, .. } = self.mode {
            return Ok((self.graph.clone(), self.one_view(0.0, 0.0, s2)?));
        }
        Ok((
            self.one_view(s.drop_edge_rate_1, s.drop_feature_rate_1, s1)?,
            self.one_view(s.drop_edge_rate_2, s.drop_feature_rate_2, s2)?,
        ))
    }
}

/// Two views of `g` for `spec`. Pure in `(g, spec, blocks, seed)`.
pub fn make_views(
    g: &Graph,
    spec: &AugmentationSpec,
    blocks: Option<&BlockState>,
    seed: u64,
) -> Result<(Graph, Graph)> {
    ViewGenerator::new(g, spec, blocks)?.views(seed)
}
