//! Microcanonical stochastic block model.
//!
//! [`fit_block_counts`] tallies the edges between every pair of blocks;
//! [`sample_sbm`] draws a new simple graph with exactly those counts, each
//! block pair's edge set uniform among the admissible node pairs. Node degrees
//! are free (no degree correction).

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::community::{BlockState, CommunityDetector};
use crate::error::{Error, Result};
use crate::graph::{undirected, Edge, Graph};
use crate::seed;

/// Per block-pair edge counts together with the partition they were fitted on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockEdgeCounts {
    assignment: Vec<usize>,
    block_sizes: Vec<usize>,
    /// `counts[r][s]`: edges between blocks `r` and `s`; intra-block edges
    /// counted once on the diagonal.
    counts: Vec<Vec<u64>>,
}

impl BlockEdgeCounts {
    /// Build from an explicit symmetric matrix over `blocks`.
    pub fn new(blocks: &BlockState, counts: Vec<Vec<u64>>) -> Result<Self> {
        let b = blocks.num_blocks();
        if counts.len() != b || counts.iter().any(|row| row.len() != b) {
            return Err(Error::InfeasibleCounts(format!("count matrix is not {b}x{b}")));
        }
        let out = Self {
            assignment: blocks.assignment().to_vec(),
            block_sizes: blocks.sizes(),
            counts,
        };
        out.check_feasible()?;
        Ok(out)
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Sum over `r <= s`, which equals the edge count of the fitted graph.
    pub fn total_edges(&self) -> u64 {
        (0..self.num_blocks())
            .flat_map(|r| (r..self.num_blocks()).map(move |s| (r, s)))
            .map(|(r, s)| self.counts[r][s])
            .sum()
    }

    /// Number of node pairs available between blocks `r` and `s`.
    pub fn slots(&self, r: usize, s: usize) -> u64 {
        let (a, b) = (self.block_sizes[r] as u64, self.block_sizes[s] as u64);
        if r == s {
            a * a.saturating_sub(1) / 2
        } else {
            a * b
        }
    }

    fn check_feasible(&self) -> Result<()> {
        for r in 0..self.num_blocks() {
            for s in 0..self.num_blocks() {
                if self.counts[r][s] != self.counts[s][r] {
                    return Err(Error::InfeasibleCounts(format!("asymmetric at ({r}, {s})")));
                }
                if self.counts[r][s] > self.slots(r, s) {
                    return Err(Error::InfeasibleCounts(format!(
                        "{} edges between blocks {r} and {s} exceed {} slots",
                        self.counts[r][s],
                        self.slots(r, s)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whitespace-separated symmetric matrix, one row per line.
    pub fn to_matrix_string(&self) -> String {
        self.counts
            .iter()
            .map(|row| {
                row.iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Tally edges of `g` by the blocks of their endpoints.
pub fn fit_block_counts(g: &Graph, b: &BlockState) -> Result<BlockEdgeCounts> {
    if b.num_nodes() != g.n() {
        return Err(Error::PartitionMismatch {
            blocks: b.num_nodes(),
            nodes: g.n(),
        });
    }
    let k = b.num_blocks();
    let mut counts = vec![vec![0u64; k]; k];
    for &(u, v) in g.edges() {
        let (r, s) = (b.block_of(u), b.block_of(v));
        counts[r][s] += 1;
        if r != s {
            counts[s][r] += 1;
        }
    }
    Ok(BlockEdgeCounts {
        assignment: b.assignment().to_vec(),
        block_sizes: b.sizes(),
        counts,
    })
}

/// Pluggable generator, so a degree-corrected sampler can replace the default.
pub trait BlockSampler: Send + Sync {
    fn sample(&self, counts: &BlockEdgeCounts, seed: u64) -> Result<Graph>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Microcanonical;

impl BlockSampler for Microcanonical {
    fn sample(&self, counts: &BlockEdgeCounts, seed: u64) -> Result<Graph> {
        sample_sbm(counts, seed)
    }
}

/// Map a slot index to the `index`-th pair `(i, j)`, `i < j`, in the order
/// (0,1), (0,2), (1,2), (0,3), ...
fn unrank_pair(index: u64) -> (usize, usize) {
    let mut j = ((1.0 + (1.0 + 8.0 * index as f64).sqrt()) / 2.0).floor() as u64;
    while j * (j - 1) / 2 > index {
        j -= 1;
    }
    while (j + 1) * j / 2 <= index {
        j += 1;
    }
    let i = index - j * (j - 1) / 2;
    (i as usize, j as usize)
}

/// `k` distinct slot indices from `0..slots`, uniformly.
///
/// Rejection when `k <= slots / 2`, otherwise a partial shuffle of the full
/// slot enumeration.
fn choose_slots<R: Rng + ?Sized>(rng: &mut R, slots: u64, k: u64) -> Vec<u64> {
    if 2 * k <= slots {
        let mut seen = HashSet::with_capacity(k as usize);
        let mut out = Vec::with_capacity(k as usize);
        while (out.len() as u64) < k {
            let x = rng.random_range(0..slots);
            if seen.insert(x) {
                out.push(x);
            }
        }
        out
    } else {
        let mut all: Vec<u64> = (0..slots).collect();
        let (picked, _) = all.partial_shuffle(rng, k as usize);
        picked.to_vec()
    }
}

/// Sample a simple graph reproducing `counts` exactly. Features are the identity.
pub fn sample_sbm(counts: &BlockEdgeCounts, seed: u64) -> Result<Graph> {
    counts.check_feasible()?;
    let mut rng = seed::rng(seed);
    let mut members = vec![Vec::new(); counts.num_blocks()];
    for (node, &b) in counts.assignment.iter().enumerate() {
        members[b].push(node);
    }
    let mut edges: Vec<Edge> = Vec::with_capacity(counts.total_edges() as usize);
    for r in 0..counts.num_blocks() {
        for s in r..counts.num_blocks() {
            let k = counts.counts[r][s];
            if k == 0 {
                continue;
            }
            let slots = counts.slots(r, s);
            for idx in choose_slots(&mut rng, slots, k) {
                let e = if r == s {
                    let (i, j) = unrank_pair(idx);
                    (members[r][i], members[r][j])
                } else {
                    let width = members[s].len() as u64;
                    (
                        members[r][(idx / width) as usize],
                        members[s][(idx % width) as usize],
                    )
                };
                edges.push(undirected(e.0, e.1));
            }
        }
    }
    Graph::new(counts.num_nodes(), edges)
}

/// Detect blocks on `g`, fit counts, and draw one sample. Features carry over.
pub fn sbm_augment(g: &Graph, detector: &dyn CommunityDetector, seed: u64) -> Result<Graph> {
    let blocks = detector.detect(g, seed::derive(seed, "detect"))?;
    let counts = fit_block_counts(g, &blocks)?;
    let sample = sample_sbm(&counts, seed::derive(seed, "sample"))?;
    Ok(sample.replace_features(g.features().clone()))
}
