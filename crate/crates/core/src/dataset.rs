//! Edge-list ingestion, id maps and dataset manifests.
//!
//! Edge lists hold one `u v` pair per line, whitespace separated; lines
//! starting with `#` and blank lines are skipped, extra columns are ignored.
//! Published edge counts for the benchmark graphs count each undirected edge
//! in both directions, so manifests store that convention and validation
//! compares against `2 * |E|`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{undirected, Edge, Graph};

pub(crate) fn parse_pairs(path: &Path) -> Result<Vec<(u64, u64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let mut next_id = |what: &str| -> Result<u64> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("missing {what} node id"),
            })?;
            let id: i64 = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("`{tok}` is not an integer node id"),
            })?;
            u64::try_from(id).map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("negative node id {id}"),
            })
        };
        let u = next_id("source")?;
        let v = next_id("target")?;
        pairs.push((u, v));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(pairs)
}

fn build(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Result<Graph> {
    Graph::new(n, pairs.filter(|(u, v)| u != v))
}

/// Load an edge list whose ids are already dense and 0-based.
///
/// Self-loops are dropped and reversed/duplicate pairs collapse. The node count
/// is `max id + 1`, or `n_hint` when larger. Features are the identity.
pub fn load_edge_list(path: impl AsRef<Path>, n_hint: Option<usize>) -> Result<Graph> {
    let path = path.as_ref();
    let pairs = parse_pairs(path)?;
    let max_id = pairs.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) as usize;
    let n = (max_id + 1).max(n_hint.unwrap_or(0));
    build(n, pairs.into_iter().map(|(u, v)| (u as usize, v as usize)))
}

/// Bijection between original node ids and dense internal ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    to_internal: HashMap<u64, usize>,
    to_original: Vec<u64>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.to_original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_original.is_empty()
    }

    fn intern(&mut self, id: u64) -> usize {
        let next = self.to_original.len();
        *self.to_internal.entry(id).or_insert_with(|| {
            self.to_original.push(id);
            next
        })
    }

    pub fn internal(&self, original: u64) -> Option<usize> {
        self.to_internal.get(&original).copied()
    }

    pub fn original(&self, internal: usize) -> Option<u64> {
        self.to_original.get(internal).copied()
    }

    /// Writes `original_id internal_id` per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for (internal, original) in self.to_original.iter().enumerate() {
            writeln!(out, "{original} {internal}").expect("write to Vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let pairs = parse_pairs(path)?;
        let mut to_original = vec![None; pairs.len()];
        let mut to_internal = HashMap::with_capacity(pairs.len());
        for (lineno, &(original, internal)) in pairs.iter().enumerate() {
            let internal = internal as usize;
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg,
            };
            if internal >= pairs.len() || to_original[internal].is_some() {
                return Err(bad(format!("internal id {internal} is not a dense unique id")));
            }
            if to_internal.insert(original, internal).is_some() {
                return Err(bad(format!("original id {original} mapped twice")));
            }
            to_original[internal] = Some(original);
        }
        Ok(Self {
            to_internal,
            to_original: to_original.into_iter().map(Option::unwrap).collect(),
        })
    }
}

/// Load an edge list with arbitrary non-negative ids, remapping them densely in
/// order of first appearance.
pub fn load_edge_list_remapped(path: impl AsRef<Path>) -> Result<(Graph, IdMap)> {
    let pairs = parse_pairs(path.as_ref())?;
    let mut map = IdMap::default();
    let mapped: Vec<Edge> = pairs
        .iter()
        .map(|&(u, v)| (map.intern(u), map.intern(v)))
        .collect();
    let g = build(map.len(), mapped.into_iter())?;
    Ok((g, map))
}

/// Load with an existing id map; ids missing from the map are an error.
pub fn load_edge_list_with_map(path: impl AsRef<Path>, map: &IdMap) -> Result<Graph> {
    let path = path.as_ref();
    let pairs = parse_pairs(path)?;
    let mut edges = Vec::with_capacity(pairs.len());
    for (u, v) in pairs {
        let lookup = |id: u64| {
            map.internal(id).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("node id {id} missing from id map"),
            })
        };
        edges.push(undirected(lookup(u)?, lookup(v)?));
    }
    build(map.len(), edges.into_iter())
}

/// One dataset entry: where the edge list lives and what it must contain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// Edge-list path, relative to the data root unless absolute.
    pub path: PathBuf,
    /// Whether the file lists directed arcs. The graph is symmetrized either way.
    #[serde(default)]
    pub directed: bool,
    pub expected_nodes: Option<usize>,
    /// Edge count in the directed-pair convention (each undirected edge twice).
    pub expected_edges: Option<usize>,
    /// Optional id-map sidecar; when set, ids are remapped through it (and the
    /// sidecar is created on first load if missing).
    #[serde(default)]
    pub id_map: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManifestFile {
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetManifest>,
}

impl ManifestFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))
    }
}

fn entry(name: &str, file: &str, nodes: usize, edges: usize) -> DatasetManifest {
    DatasetManifest {
        name: name.to_string(),
        path: PathBuf::from(file),
        directed: false,
        expected_nodes: Some(nodes),
        expected_edges: Some(edges),
        id_map: None,
    }
}

/// The eight unattributed benchmark graphs, with node and directed-pair edge
/// counts. Files are expected as `<Name>.txt` under the data root.
pub fn unattributed_benchmarks() -> Vec<DatasetManifest> {
    vec![
        entry("usair", "USAir.txt", 332, 4_252),
        entry("ns", "NS.txt", 1_589, 5_484),
        entry("pb", "PB.txt", 1_222, 33_428),
        entry("yeast", "Yeast.txt", 2_375, 23_386),
        entry("celegans", "Celegans.txt", 297, 4_296),
        entry("power", "Power.txt", 4_941, 13_188),
        entry("router", "Router.txt", 5_022, 12_516),
        entry("ecoli", "Ecoli.txt", 1_805, 29_320),
    ]
}

/// Built-in manifests: the unattributed graphs plus the two small citation
/// graphs (structure only).
pub fn builtin_manifests() -> Vec<DatasetManifest> {
    let mut all = unattributed_benchmarks();
    all.push(entry("cora", "cora.txt", 2_708, 10_556));
    all.push(entry("citeseer", "citeseer.txt", 3_327, 9_104));
    all
}

pub fn builtin_manifest(name: &str) -> Result<DatasetManifest> {
    let key = name.to_ascii_lowercase();
    builtin_manifests()
        .into_iter()
        .find(|m| m.name == key)
        .ok_or_else(|| Error::UnknownDataset(name.to_string()))
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Load a dataset and check it against the manifest's expected counts.
pub fn load_dataset(manifest: &DatasetManifest, root: impl AsRef<Path>) -> Result<Graph> {
    let root = root.as_ref();
    let path = resolve(root, &manifest.path);
    let g = match &manifest.id_map {
        None => load_edge_list(&path, manifest.expected_nodes)?,
        Some(map_path) => {
            let map_path = resolve(root, map_path);
            if map_path.exists() {
                let map = IdMap::load(&map_path)?;
                load_edge_list_with_map(&path, &map)?
            } else {
                let (g, map) = load_edge_list_remapped(&path)?;
                map.save(&map_path)?;
                g
            }
        }
    };
    validate_counts(manifest, &g)?;
    Ok(g)
}

pub fn validate_counts(manifest: &DatasetManifest, g: &Graph) -> Result<()> {
    let mismatch = |msg: String| Error::DatasetMismatch {
        name: manifest.name.clone(),
        msg,
    };
    if let Some(n) = manifest.expected_nodes {
        if g.n() != n {
            return Err(mismatch(format!("{} nodes, expected {n}", g.n())));
        }
    }
    if let Some(m) = manifest.expected_edges {
        if 2 * g.num_edges() != m {
            return Err(mismatch(format!(
                "{} undirected edges ({} directed pairs), expected {m} directed pairs",
                g.num_edges(),
                2 * g.num_edges()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn dedupes_and_drops_self_loops() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "0 1\n1 0\n2 2");
        let g = load_edge_list(&p, None).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn comments_hint_and_extra_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "# header\n\n0 1 0.5\n1\t2\n");
        let g = load_edge_list(&p, Some(10)).unwrap();
        assert_eq!(g.n(), 10);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write(dir.path(), "a.txt", "0 1\n1 x\n");
        assert!(matches!(load_edge_list(&bad, None), Err(Error::Parse { line: 2, .. })));
        let neg = write(dir.path(), "b.txt", "0 -1\n");
        assert!(matches!(load_edge_list(&neg, None), Err(Error::Parse { .. })));
        let short = write(dir.path(), "c.txt", "3\n");
        assert!(matches!(load_edge_list(&short, None), Err(Error::Parse { .. })));
        let empty = write(dir.path(), "d.txt", "# nothing\n");
        assert!(matches!(load_edge_list(&empty, None), Err(Error::EmptyFile(_))));
        assert!(matches!(
            load_edge_list(dir.path().join("missing.txt"), None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn remap_round_trips_through_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.txt", "100 7\n7 55\n55 100\n");
        let (g, map) = load_edge_list_remapped(&p).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(map.internal(100), Some(0));
        assert_eq!(map.original(2), Some(55));
        let sidecar = dir.path().join("g.idmap");
        map.save(&sidecar).unwrap();
        let back = IdMap::load(&sidecar).unwrap();
        assert_eq!(back, map);
        let g2 = load_edge_list_with_map(&p, &back).unwrap();
        assert_eq!(g2, g);
    }

    #[test]
    fn manifest_validation() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "tri.txt", "0 1\n1 2\n2 0\n");
        let mut m = entry("tri", "tri.txt", 3, 6);
        assert_eq!(load_dataset(&m, dir.path()).unwrap().num_edges(), 3);
        m.expected_edges = Some(3);
        assert!(matches!(
            load_dataset(&m, dir.path()),
            Err(Error::DatasetMismatch { .. })
        ));
    }

    #[test]
    fn manifest_file_parses() {
        let text = r#"
            [[dataset]]
            name = "usair"
            path = "USAir.txt"
            expected_nodes = 332
            expected_edges = 4252

            [[dataset]]
            name = "custom"
            path = "/abs/custom.txt"
            directed = true
            id_map = "custom.idmap"
        "#;
        let f: ManifestFile = toml::from_str(text).unwrap();
        assert_eq!(f.datasets.len(), 2);
        assert_eq!(f.datasets[0], builtin_manifest("USAir").unwrap());
        assert!(f.datasets[1].directed);
    }

    #[test]
    fn builtin_counts_are_directed_pairs() {
        let m = builtin_manifest("usair").unwrap();
        assert_eq!(m.expected_edges, Some(4252));
        assert_eq!(unattributed_benchmarks().len(), 8);
        assert!(builtin_manifest("nope").is_err());
    }
}
