//! Undirected simple graphs, node features, link splits and negative sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// An undirected edge, always stored with `u < v`.
pub type Edge = (usize, usize);
pub type EdgeSet = HashSet<Edge>;

#[inline]
pub fn undirected(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Identity,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Diagonal matrix; the identity when every entry is 1.
    Diagonal(Vec<f64>),
    /// Row-major values.
    Dense(Vec<f64>),
}

/// Node feature matrix `X` (rows = nodes).
///
/// Unattributed graphs use the identity. Masking columns of the identity keeps
/// the diagonal representation, so an `n x n` dense matrix is never built for
/// the identity case.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    storage: Storage,
}

impl FeatureMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            storage: Storage::Diagonal(vec![1.0; n]),
        }
    }

    pub fn dense(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidGraph(format!(
                "feature buffer has {} values, expected {rows}x{cols}",
                values.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            storage: Storage::Dense(values),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> FeatureKind {
        match &self.storage {
            Storage::Diagonal(d) if d.iter().all(|&x| x == 1.0) => FeatureKind::Identity,
            _ => FeatureKind::Dense,
        }
    }

    /// Diagonal entries when the matrix is (a column-masked) identity.
    pub fn diagonal(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Diagonal(d) => Some(d),
            Storage::Dense(_) => None,
        }
    }

    /// Row-major values when stored densely.
    pub fn dense_values(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(v) => Some(v),
            Storage::Diagonal(_) => None,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            Storage::Dense(v) => v[i * self.cols + j],
        }
    }

    pub fn to_dense_vec(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::Diagonal(d) => {
                let mut out = vec![0.0; self.rows * self.cols];
                for (i, &x) in d.iter().enumerate() {
                    out[i * self.cols + i] = x;
                }
                out
            }
        }
    }

    /// Zero every column `j` with `keep[j] == false`.
    pub fn mask_columns(&self, keep: &[bool]) -> Self {
        assert_eq!(keep.len(), self.cols, "column mask length");
        let storage = match &self.storage {
            Storage::Diagonal(d) => Storage::Diagonal(
                d.iter()
                    .zip(keep)
                    .map(|(&x, &k)| if k { x } else { 0.0 })
                    .collect(),
            ),
            Storage::Dense(v) => {
                let mut v = v.clone();
                for row in v.chunks_mut(self.cols) {
                    for (x, &k) in row.iter_mut().zip(keep) {
                        if !k {
                            *x = 0.0;
                        }
                    }
                }
                Storage::Dense(v)
            }
        };
        Self {
            rows: self.rows,
            cols: self.cols,
            storage,
        }
    }

    /// `sum_i 1[x_ij != 0] * w_i` for every column `j`.
    pub fn weighted_column_support(&self, row_weights: &[f64]) -> Vec<f64> {
        assert_eq!(row_weights.len(), self.rows);
        match &self.storage {
            Storage::Diagonal(d) => d
                .iter()
                .zip(row_weights)
                .map(|(&x, &w)| if x != 0.0 { w } else { 0.0 })
                .collect(),
            Storage::Dense(v) => {
                let mut out = vec![0.0; self.cols];
                for (row, &w) in v.chunks(self.cols).zip(row_weights) {
                    for (o, &x) in out.iter_mut().zip(row) {
                        if x != 0.0 {
                            *o += w;
                        }
                    }
                }
                out
            }
        }
    }

    /// Rows reordered so that new row `perm[i]` is old row `i`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rows);
        let src = self.to_dense_vec();
        let mut out = vec![0.0; src.len()];
        for (i, &p) in perm.iter().enumerate() {
            out[p * self.cols..(p + 1) * self.cols]
                .copy_from_slice(&src[i * self.cols..(i + 1) * self.cols]);
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            storage: Storage::Dense(out),
        }
    }
}

/// Immutable undirected simple graph `(V, E, A, X)`.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    edge_set: EdgeSet,
    features: FeatureMatrix,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges && self.features == other.features
    }
}

impl Graph {
    /// Build a graph on `n` nodes with identity features.
    ///
    /// Reversed and repeated pairs collapse into one undirected edge. Self-loops
    /// and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            list.push(undirected(u, v));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self::from_sorted(n, list, FeatureMatrix::identity(n)))
    }

    fn from_sorted(n: usize, edges: Vec<Edge>, features: FeatureMatrix) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let edge_set = edges.iter().copied().collect();
        Self {
            n,
            edges,
            neighbors,
            edge_set,
            features,
        }
    }

    pub fn with_features(self, features: FeatureMatrix) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.n
            )));
        }
        Ok(Self { features, ..self })
    }

    /// Same node set and features, different edges. `edges` must be a sorted
    /// list of valid undirected edges (typically a subset of `self.edges()`).
    pub(crate) fn with_sorted_edges(&self, edges: Vec<Edge>) -> Self {
        Self::from_sorted(self.n, edges, self.features.clone())
    }

    /// Same node set and edges, different features.
    pub fn replace_features(&self, features: FeatureMatrix) -> Self {
        assert_eq!(features.rows(), self.n);
        Self {
            features,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted undirected edge list, `u < v`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_set(&self) -> &EdgeSet {
        &self.edge_set
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edge_set.contains(&undirected(u, v))
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    /// Relabel nodes so that old node `i` becomes `perm[i]`; features follow.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let g = Graph::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))?;
        g.with_features(self.features.permute_rows(perm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidFractions(format!("negative fraction in {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidFractions(format!("fractions sum to {sum}")));
        }
        Ok(())
    }
}

/// Train/validation/test partition of a graph's edges.
///
/// `train_graph` carries only the training edges and is the message-passing
/// graph for every stage, including evaluation.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub seed: u64,
}

impl EdgeSplit {
    pub fn num_nodes(&self) -> usize {
        self.train_graph.n()
    }

    /// Every known positive across the three parts.
    pub fn all_positives(&self) -> EdgeSet {
        self.train_pos
            .iter()
            .chain(&self.val_pos)
            .chain(&self.test_pos)
            .copied()
            .collect()
    }
}

/// Shuffle the edges with `seed` and cut them into train/val/test.
///
/// Validation and test sizes are `floor(fraction * |E|)`; the remainder goes
/// to train.
pub fn random_link_split(g: &Graph, fractions: SplitFractions, seed: u64) -> Result<EdgeSplit> {
    fractions.validate()?;
    let m = g.num_edges();
    if m < 3 {
        return Err(Error::TooFewEdges { have: m, need: 3 });
    }
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    let n_val = (fractions.val * m as f64 + 1e-9).floor() as usize;
    let n_test = (fractions.test * m as f64 + 1e-9).floor() as usize;
    let n_val = n_val.min(m);
    let n_test = n_test.min(m - n_val);

    let mut shuffled = g.edges().to_vec();
    shuffled.shuffle(&mut seed::rng(seed));
    let test_pos = shuffled[..n_test].to_vec();
    let val_pos = shuffled[n_test..n_test + n_val].to_vec();
    let train_pos = shuffled[n_test + n_val..].to_vec();

    let mut sorted = train_pos.clone();
    sorted.sort_unstable();
    Ok(EdgeSplit {
        train_graph: g.with_sorted_edges(sorted),
        train_pos,
        val_pos,
        test_pos,
        seed,
    })
}

/// Number of node pairs that are neither edges of `g` nor in `exclude`.
pub fn admissible_pair_count(g: &Graph, exclude: &EdgeSet) -> usize {
    let n = g.n();
    let extra = exclude
        .iter()
        .filter(|&&(u, v)| u != v && u < n && v < n && !g.contains(u, v))
        .map(|&(u, v)| undirected(u, v))
        .collect::<HashSet<_>>()
        .len();
    n * n.saturating_sub(1) / 2 - g.num_edges() - extra
}

/// Sample `count` distinct node pairs that are not edges of `g`, not in
/// `exclude`, and not self-loops, uniformly at random.
pub fn sample_negative_pairs(
    g: &Graph,
    count: usize,
    exclude: &EdgeSet,
    seed: u64,
) -> Result<Vec<Edge>> {
    let mut rng = seed::rng(seed);
    sample_negative_pairs_with(&mut rng, g, count, exclude)
}

/// [`sample_negative_pairs`] drawing from a caller-owned generator.
pub fn sample_negative_pairs_with<R: Rng + ?Sized>(
    rng: &mut R,
    g: &Graph,
    count: usize,
    exclude: &EdgeSet,
) -> Result<Vec<Edge>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let available = admissible_pair_count(g, exclude);
    if count > available {
        return Err(Error::InfeasibleNegatives {
            requested: count,
            available,
        });
    }
    let n = g.n();
    let forbidden = |e: &Edge| g.contains(e.0, e.1) || exclude.contains(e);

    if 2 * count <= available {
        // Sparse regime: rejection, expected < 2 draws per accepted pair.
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            let e = undirected(u, v);
            if forbidden(&e) || !chosen.insert(e) {
                continue;
            }
            out.push(e);
        }
        Ok(out)
    } else {
        let mut pool: Vec<Edge> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|e| !forbidden(e))
            .collect();
        let (picked, _) = pool.partial_shuffle(rng, count);
        Ok(picked.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn ring(n: usize) -> Graph {
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn construction_dedupes_reversed_pairs() {
        let g = Graph::new(3, [(0, 1), (1, 0), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.contains(1, 0));
        assert!(!g.contains(0, 2));
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.features().kind(), FeatureKind::Identity);
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(path3().with_features(FeatureMatrix::identity(4)).is_err());
    }

    #[test]
    fn masked_identity_is_no_longer_identity() {
        let x = FeatureMatrix::identity(4).mask_columns(&[true, true, false, true]);
        assert_eq!(x.kind(), FeatureKind::Dense);
        for i in 0..4 {
            assert_eq!(x.get(i, 2), 0.0);
        }
        assert_eq!(x.get(3, 3), 1.0);
        assert_eq!(x.get(1, 1), 1.0);
    }

    #[test]
    fn split_sizes_ten_edges() {
        let split = random_link_split(&ring(10), SplitFractions::default(), 3).unwrap();
        assert_eq!(
            (split.train_pos.len(), split.val_pos.len(), split.test_pos.len()),
            (7, 1, 2)
        );
    }

    #[test]
    fn split_sizes_nine_edges_floor_rule() {
        let split = random_link_split(&ring(9), SplitFractions::default(), 3).unwrap();
        assert_eq!(
            (split.train_pos.len(), split.val_pos.len(), split.test_pos.len()),
            (8, 0, 1)
        );
    }

    #[test]
    fn split_is_deterministic_and_partitions_edges() {
        let g = ring(40);
        let a = random_link_split(&g, SplitFractions::default(), 11).unwrap();
        let b = random_link_split(&g, SplitFractions::default(), 11).unwrap();
        assert_eq!(a.train_pos, b.train_pos);
        assert_eq!(a.val_pos, b.val_pos);
        assert_eq!(a.test_pos, b.test_pos);
        let mut all: Vec<Edge> = a
            .train_pos
            .iter()
            .chain(&a.val_pos)
            .chain(&a.test_pos)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, g.edges());
        assert_eq!(a.train_graph.num_edges(), a.train_pos.len());
        for e in &a.train_pos {
            assert!(a.train_graph.contains(e.0, e.1));
        }
    }

    #[test]
    fn split_errors() {
        let bad = SplitFractions {
            train: 0.7,
            val: 0.2,
            test: 0.2,
        };
        assert!(matches!(
            random_link_split(&ring(10), bad, 0),
            Err(Error::InvalidFractions(_))
        ));
        let tiny = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(matches!(
            random_link_split(&tiny, SplitFractions::default(), 0),
            Err(Error::TooFewEdges { .. })
        ));
    }

    #[test]
    fn only_non_edge_of_k4_minus_one() {
        let g = Graph::new(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap();
        let neg = sample_negative_pairs(&g, 1, &EdgeSet::new(), 5).unwrap();
        assert_eq!(neg, vec![(0, 3)]);
        assert!(sample_negative_pairs(&g, 2, &EdgeSet::new(), 5).is_err());
    }

    #[test]
    fn zero_negatives() {
        assert!(sample_negative_pairs(&path3(), 0, &EdgeSet::new(), 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn negatives_respect_exclusion_exhaustively() {
        // Small graphs: every admissible pair requested at least once.
        for seed in 0..20u64 {
            let g = ring(12);
            let exclude: EdgeSet = [(0, 5), (2, 7), (3, 9)].into_iter().collect();
            let avail = admissible_pair_count(&g, &exclude);
            assert_eq!(avail, 66 - 12 - 3);
            for count in [1, avail / 3, avail] {
                let neg = sample_negative_pairs(&g, count, &exclude, seed).unwrap();
                let uniq: EdgeSet = neg.iter().copied().collect();
                assert_eq!(uniq.len(), count);
                for &(u, v) in &neg {
                    assert!(u < v);
                    assert!(!g.contains(u, v));
                    assert!(!exclude.contains(&(u, v)));
                }
            }
        }
    }

    #[test]
    fn negative_sampling_is_uniform() {
        // n = 100, empty graph, 10 pairs per draw; a fixed pair should appear
        // with probability 10/4950 per trial.
        let g = Graph::new(100, []).unwrap();
        let trials = 100_000u64;
        let target = (17, 42);
        let mut rng = seed::rng(99);
        let mut hits = 0u64;
        for _ in 0..trials {
            let neg = sample_negative_pairs_with(&mut rng, &g, 10, &EdgeSet::new()).unwrap();
            if neg.contains(&target) {
                hits += 1;
            }
        }
        let p = 10.0 / 4950.0;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (hits as f64 - mean).abs() <= 3.0 * sigma,
            "hits {hits}, expected {mean} +- {sigma}"
        );
    }

    #[test]
    fn permute_moves_edges_and_features() {
        let g = path3();
        let p = g.permute(&[2, 0, 1]).unwrap();
        assert!(p.contains(2, 0));
        assert!(p.contains(0, 1));
        assert_eq!(p.features().get(2, 0), 1.0);
    }
}
