//! Result collection, significance passes and table rendering over a
//! results directory laid out as `<dir>/<dataset>/<model>_<aug>/<seed>/`.

use std::path::Path;

use lpssl_core::augment::AugKind;
use lpssl_eval::{bonferroni_dunn_groups, ResultTable, Tail, OPTIM};
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// One per-seed test result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub augmentation: String,
    pub seed: u64,
    /// `k` of the Hits@k column.
    pub k: usize,
    pub hits: f64,
    pub ap: f64,
    pub auc: f64,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

fn parse_metrics(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let k = reader
        .headers()?
        .get(4)
        .and_then(|h| h.strip_prefix("hits_at_"))
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| HarnessError::Results(format!("{}: no hits_at_<k> column", path.display())))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| HarnessError::Results(format!("{}: bad number `{}`", path.display(), field(i))))
        };
        rows.push(ResultRow {
            dataset: field(0),
            model: field(1),
            augmentation: field(2),
            seed: field(3)
                .parse()
                .map_err(|_| HarnessError::Results(format!("{}: bad seed `{}`", path.display(), field(3))))?,
            k,
            hits: num(4)?,
            ap: num(5)?,
            auc: num(6)?,
        });
    }
    Ok(rows)
}

/// Every per-seed `metrics.csv` under `dir`, sorted by dataset, model,
/// augmentation and seed.
pub fn collect(dir: &Path) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for dataset in read_dir_sorted(dir)? {
        for run in read_dir_sorted(&dataset)? {
            for seed in read_dir_sorted(&run)? {
                let file = seed.join("metrics.csv");
                if file.exists() {
                    rows.extend(parse_metrics(&file)?);
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.dataset, &a.model, &a.augmentation, a.seed).cmp(&(&b.dataset, &b.model, &b.augmentation, b.seed))
    });
    Ok(rows)
}

/// The shared Hits@k `k` of `rows`.
pub fn common_k(rows: &[ResultRow]) -> Result<usize> {
    let k = rows.first().map_or(50, |r| r.k);
    match rows.iter().find(|r| r.k != k) {
        Some(r) => Err(HarnessError::Results(format!(
            "mixed hits@k columns: {k} and {} ({} {} {})",
            r.k, r.dataset, r.model, r.augmentation
        ))),
        None => Ok(k),
    }
}

/// Hits, AP and AUC tables.
pub fn tables(rows: &[ResultRow]) -> Result<[ResultTable; 3]> {
    let k = common_k(rows)?;
    let mut t = [
        ResultTable::new(format!("hits@{k}")),
        ResultTable::new("ap"),
        ResultTable::new("auc"),
    ];
    for r in rows {
        for (table, v) in t.iter_mut().zip([r.hits, r.ap, r.auc]) {
            table.push(&r.model, &r.augmentation, &r.dataset, v);
        }
    }
    Ok(t)
}

/// Significance outcome of one dataset column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub metric: String,
    pub dataset: String,
    pub rows: Vec<String>,
    pub runs: usize,
    pub chi_sq: f64,
    pub p_value: f64,
    pub mean_ranks: Vec<f64>,
    pub critical_difference: f64,
    pub best: Vec<String>,
    pub worst: Vec<String>,
}

/// Friedman and Bonferroni-Dunn per dataset column, over the non-derived
/// rows holding the largest seed count.
pub fn significance(table: &ResultTable, alpha: f64, tail: Tail) -> Result<Vec<ColumnStats>> {
    let mut out = Vec::new();
    for (j, dataset) in table.datasets.iter().enumerate() {
        let candidates: Vec<usize> = (0..table.rows.len())
            .filter(|&i| table.rows[i].augmentation != OPTIM && table.cells[i][j].is_some())
            .collect();
        let len = |i: usize| table.cells[i][j].as_ref().map_or(0, |c| c.scores.len());
        let runs = candidates.iter().map(|&i| len(i)).max().unwrap_or(0);
        let members: Vec<usize> = candidates.into_iter().filter(|&i| len(i) == runs).collect();
        if members.len() < 2 || runs < 2 {
            continue;
        }
        let matrix: Vec<Vec<f64>> = (0..runs)
            .map(|s| members.iter().map(|&i| table.cells[i][j].as_ref().unwrap().scores[s]).collect())
            .collect();
        let g = bonferroni_dunn_groups(&matrix, alpha, tail)?;
        let name = |k: usize| {
            let r = &table.rows[members[k]];
            format!("{} {}", r.model, r.augmentation)
        };
        out.push(ColumnStats {
            metric: table.metric.clone(),
            dataset: dataset.clone(),
            rows: (0..members.len()).map(name).collect(),
            runs,
            chi_sq: g.friedman.chi_sq,
            p_value: g.friedman.p_value,
            mean_ranks: g.friedman.mean_ranks.clone(),
            critical_difference: g.critical_difference,
            best: g.best.iter().map(|&k| name(k)).collect(),
            worst: g.worst.iter().map(|&k| name(k)).collect(),
        });
    }
    Ok(out)
}

/// Annotated tables with `optim` rows, rendered as text and CSV.
pub struct Rendered {
    pub metric: String,
    pub text: String,
    pub csv: String,
}

pub fn render(rows: &[ResultRow], alpha: f64, tail: Tail) -> Result<Vec<Rendered>> {
    let adaptive: Vec<&str> = AugKind::ADAPTIVE.iter().map(|a| a.as_str()).collect();
    tables(rows)?
        .into_iter()
        .map(|mut t| {
            t.annotate(alpha, tail)?;
            t.add_optim_rows(&adaptive);
            Ok(Rendered {
                metric: t.metric.clone(),
                text: t.render_text(),
                csv: t.render_csv(),
            })
        })
        .collect()
}

/// File stem of a metric name (`hits@50` becomes `hits_at_50`).
pub fn file_stem(metric: &str) -> String {
    metric.replace('@', "_at_")
}
