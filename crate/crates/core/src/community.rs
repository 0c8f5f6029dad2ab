//! Block states and community detection.
//!
//! Louvain is built in. Other detectors plug in through
//! [`CommunityDetector`]; [`PartitionFile`] reads partitions produced by an
//! external tool (`node_id block_id` per line).

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::parse_pairs;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockSource {
    Louvain,
    External,
}

/// Node to block assignment with dense block ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockState {
    assignment: Vec<usize>,
    num_blocks: usize,
    source: BlockSource,
}

impl BlockState {
    /// Relabels block ids densely in order of first appearance.
    pub fn new(assignment: Vec<usize>, source: BlockSource) -> Self {
        let mut relabel = std::collections::HashMap::new();
        let assignment: Vec<usize> = assignment
            .into_iter()
            .map(|b| {
                let next = relabel.len();
                *relabel.entry(b).or_insert(next)
            })
            .collect();
        Self {
            num_blocks: relabel.len(),
            assignment,
            source,
        }
    }

    pub fn singletons(n: usize, source: BlockSource) -> Self {
        Self::new((0..n).collect(), source)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn block_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn source(&self) -> BlockSource {
        self.source
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks];
        for &b in &self.assignment {
            sizes[b] += 1;
        }
        sizes
    }

    /// Nodes of each block, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_blocks];
        for (node, &b) in self.assignment.iter().enumerate() {
            members[b].push(node);
        }
        members
    }

    fn check_covers(&self, g: &Graph) -> Result<()> {
        if self.assignment.len() != g.n() {
            return Err(Error::PartitionMismatch {
                blocks: self.assignment.len(),
                nodes: g.n(),
            });
        }
        Ok(())
    }

    /// Reads `node_id block_id` lines; every node in `0..n` must appear once.
    pub fn load(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        let path = path.as_ref();
        let mut assignment = vec![None; n];
        for (node, block) in parse_pairs(path)? {
            let node = node as usize;
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg,
            };
            if node >= n {
                return Err(bad(format!("node {node} out of range for {n} nodes")));
            }
            if assignment[node].replace(block as usize).is_some() {
                return Err(bad(format!("node {node} assigned twice")));
            }
        }
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(node, b)| {
                b.ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    msg: format!("node {node} has no block"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(assignment, BlockSource::External))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body: String = self
            .assignment
            .iter()
            .enumerate()
            .map(|(node, b)| format!("{node} {b}\n"))
            .collect();
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

/// Newman modularity at resolution 1.
pub fn modularity(g: &Graph, b: &BlockState) -> Result<f64> {
    b.check_covers(g)?;
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut internal = vec![0.0; b.num_blocks()];
    let mut degree = vec![0.0; b.num_blocks()];
    for &(u, v) in g.edges() {
        let (bu, bv) = (b.block_of(u), b.block_of(v));
        if bu == bv {
            internal[bu] += 1.0;
        }
        degree[bu] += 1.0;
        degree[bv] += 1.0;
    }
    Ok(internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e / m - (d / (2.0 * m)).powi(2))
        .sum())
}

/// Anything that turns a graph into a block state.
pub trait CommunityDetector: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, g: &Graph, seed: u64) -> Result<BlockState>;
}

/// Detector choice as written in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Louvain,
    Leiden,
    Infomap,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [Self::Louvain, Self::Leiden, Self::Infomap];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Louvain => "louvain",
            Self::Leiden => "leiden",
            Self::Infomap => "infomap",
        }
    }
}

/// Resolve a detector. Leiden and Infomap are read from
/// `<partition_dir>/<dataset>.<kind>.part` when such a file exists.
pub fn detector_for(
    kind: DetectorKind,
    partition_dir: Option<&Path>,
    dataset: &str,
) -> Result<Box<dyn CommunityDetector>> {
    match kind {
        DetectorKind::Louvain => Ok(Box::new(Louvain)),
        other => {
            let file = partition_dir
                .map(|d| d.join(format!("{dataset}.{}.part", other.as_str())))
                .filter(|p| p.exists());
            match file {
                Some(path) => Ok(Box::new(PartitionFile {
                    name: other.as_str().to_string(),
                    path,
                })),
                None => Err(Error::DetectorUnavailable(
                    other.as_str().to_string(),
                    format!("no partition file for `{dataset}`"),
                )),
            }
        }
    }
}

/// Partition computed by an external tool.
#[derive(Debug, Clone)]
pub struct PartitionFile {
    pub name: String,
    pub path: PathBuf,
}

impl CommunityDetector for PartitionFile {
    fn name(&self) -> &str {
        &self.name
    }

    fn detect(&self, g: &Graph, _seed: u64) -> Result<BlockState> {
        BlockState::load(&self.path, g.n())
    }
}

/// Louvain modularity optimization (resolution 1).
#[derive(Debug, Clone, Copy, Default)]
pub struct Louvain;

const MIN_GAIN: f64 = 1e-7;
const MAX_LEVELS: usize = 64;
const MAX_PASSES: usize = 1_000;

impl CommunityDetector for Louvain {
    fn name(&self) -> &str {
        "louvain"
    }

    fn detect(&self, g: &Graph, seed: u64) -> Result<BlockState> {
        Ok(louvain(g, seed))
    }
}

/// Weighted graph used across aggregation levels. `self_loop[i]` is the
/// internal weight of super-node `i`, counted once.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
}

impl Level {
    fn from_graph(g: &Graph) -> Self {
        Self {
            adj: (0..g.n())
                .map(|u| g.neighbors(u).iter().map(|&v| (v, 1.0)).collect())
                .collect(),
            self_loop: vec![0.0; g.n()],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degrees(&self) -> Vec<f64> {
        self.adj
            .iter()
            .zip(&self.self_loop)
            .map(|(row, &s)| row.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect()
    }

    fn modularity(&self, comm: &[usize], m2: f64) -> f64 {
        let k = self.degrees();
        let c = comm.iter().max().map_or(0, |&x| x + 1);
        let mut internal = vec![0.0; c];
        let mut tot = vec![0.0; c];
        for i in 0..self.len() {
            tot[comm[i]] += k[i];
            internal[comm[i]] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                if comm[j] == comm[i] && i < j {
                    internal[comm[i]] += w;
                }
            }
        }
        let m = m2 / 2.0;
        internal
            .iter()
            .zip(&tot)
            .map(|(&e, &d)| e / m - (d / m2).powi(2))
            .sum()
    }

    /// Repeated local-move passes. Returns the community of every node and
    /// whether any node moved.
    fn local_moves(&self, m2: f64, rng: &mut seed::Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let k = self.degrees();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = k.clone();
        let mut weight_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut order: Vec<usize> = (0..n).collect();
        let mut any_move = false;

        for _ in 0..MAX_PASSES {
            #[cfg(debug_assertions)]
            let q_before = self.modularity(&comm, m2);
            order.shuffle(rng);
            let mut moved = 0usize;
            for &i in &order {
                let own = comm[i];
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if weight_to[c] == 0.0 {
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                tot[own] -= k[i];
                let gain = |c: usize, w: f64| w - tot[c] * k[i] / m2;
                let mut best = own;
                let mut best_gain = gain(own, weight_to[own]);
                for &c in &touched {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + 1e-12 {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += k[i];
                if best != own {
                    comm[i] = best;
                    moved += 1;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                touched.clear();
            }
            #[cfg(debug_assertions)]
            {
                let q_after = self.modularity(&comm, m2);
                debug_assert!(
                    q_after >= q_before - 1e-10,
                    "local-move pass decreased modularity: {q_before} -> {q_after}"
                );
            }
            if moved == 0 {
                break;
            }
            any_move = true;
        }
        (comm, any_move)
    }

    /// Collapse communities (dense ids `0..c`) into super-nodes.
    fn aggregate(&self, comm: &[usize], c: usize) -> Level {
        let mut self_loop = vec![0.0; c];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); c];
        for i in 0..self.len() {
            let ci = comm[i];
            self_loop[ci] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    if i < j {
                        self_loop[ci] += w;
                    }
                } else {
                    *maps[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loop,
        }
    }
}

fn compact(labels: &mut [usize]) -> usize {
    let mut relabel = std::collections::HashMap::new();
    for l in labels.iter_mut() {
        let next = relabel.len();
        *l = *relabel.entry(*l).or_insert(next);
    }
    relabel.len()
}

/// Louvain: local moving plus aggregation until the modularity gain of a
/// level drops below `1e-7`. Node visit order is shuffled with `seed`.
///
/// An edgeless graph yields one block per node (with a warning).
pub fn louvain(g: &Graph, seed: u64) -> BlockState {
    if g.num_edges() == 0 {
        log::warn!("louvain on an edgeless graph: every node is its own block");
        return BlockState::singletons(g.n(), BlockSource::Louvain);
    }
    let mut rng = seed::rng(seed);
    let m2 = 2.0 * g.num_edges() as f64;
    let mut level = Level::from_graph(g);
    let mut node_comm: Vec<usize> = (0..g.n()).collect();
    let mut q = level.modularity(&(0..level.len()).collect::<Vec<_>>(), m2);

    for _ in 0..MAX_LEVELS {
        let (mut comm, moved) = level.local_moves(m2, &mut rng);
        if !moved {
            break;
        }
        let c = compact(&mut comm);
        let q_new = level.modularity(&comm, m2);
        for x in node_comm.iter_mut() {
            *x = comm[*x];
        }
        let gain = q_new - q;
        q = q_new;
        level = level.aggregate(&comm, c);
        if gain < MIN_GAIN || c == 1 {
            break;
        }
    }
    BlockState::new(node_comm, BlockSource::Louvain)
}
