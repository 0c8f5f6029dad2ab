//! Link sets shared by two views and Hadamard link representations.

use std::sync::Arc;

use lpssl_autodiff::{Tape, Var};
use lpssl_core::graph::{admissible_pair_count, sample_negative_pairs_with, Edge, EdgeSet};
use lpssl_core::{seed, Graph};
use rand::seq::SliceRandom;

use crate::error::Result;

/// Positive links present in both views and an equally sized set of
/// negative pairs absent from both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSets {
    pub positives: Vec<Edge>,
    pub negatives: Vec<Edge>,
}

/// Links of the two views for one epoch.
///
/// Positives are the edges kept by both views, subsampled to at most
/// `max_links`. Negatives are uniform node pairs that are edges of neither
/// view, `|negatives| = |positives|`. Returns `None` when the views share no
/// edge or no admissible negative exists.
pub fn select_link_sets(a1: &Graph, a2: &Graph, max_links: usize, seed: u64) -> Result<Option<LinkSets>> {
    let mut positives: Vec<Edge> = a1
        .edges()
        .iter()
        .filter(|&&(u, v)| a2.contains(u, v))
        .copied()
        .collect();
    if positives.is_empty() || max_links == 0 {
        return Ok(None);
    }
    let mut rng = seed::rng(seed::derive(seed, "links"));
    if positives.len() > max_links {
        positives.shuffle(&mut rng);
        positives.truncate(max_links);
        positives.sort_unstable();
    }
    let exclude: EdgeSet = a2.edge_set().clone();
    let count = positives.len().min(admissible_pair_count(a1, &exclude));
    if count == 0 {
        return Ok(None);
    }
    positives.truncate(count);
    let negatives = sample_negative_pairs_with(&mut rng, a1, count, &exclude)?;
    Ok(Some(LinkSets { positives, negatives }))
}

/// Endpoint index lists of `pairs`.
pub fn endpoints(pairs: &[Edge]) -> (Arc<Vec<usize>>, Arc<Vec<usize>>) {
    let (u, v): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    (Arc::new(u), Arc::new(v))
}

/// `h_u * h_v` for every pair, one row per pair.
pub fn hadamard(tape: &mut Tape, h: Var, pairs: &[Edge]) -> Var {
    let (u, v) = endpoints(pairs);
    let hu = tape.gather_rows(h, &u);
    let hv = tape.gather_rows(h, &v);
    tape.mul(hu, hv)
}
