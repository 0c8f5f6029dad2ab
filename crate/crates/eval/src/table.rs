//! Result tables: one row per (model, augmentation), one column per dataset,
//! a list of per-seed scores in every cell.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::stats::{bonferroni_dunn_groups, StatsError, Tail};

/// Augmentation label of the derived per-model maximum row.
pub const OPTIM: &str = "optim";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// One score per seed, in seed order.
    pub scores: Vec<f64>,
    pub best: bool,
    pub worst: bool,
}

impl Cell {
    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.scores.iter().map(|s| (s - m).powi(2)).sum::<f64>() / self.scores.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub model: String,
    pub augmentation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metric: String,
    pub datasets: Vec<String>,
    pub rows: Vec<RowKey>,
    /// `cells[row][dataset]`.
    pub cells: Vec<Vec<Option<Cell>>>,
    pub annotated: bool,
}

impl ResultTable {
    pub fn new(metric: impl Into<String>) -> Self {
        Self {
            metric: metric.into(),
            ..Self::default()
        }
    }

    fn row_index(&mut self, model: &str, augmentation: &str) -> usize {
        let key = RowKey {
            model: model.to_string(),
            augmentation: augmentation.to_string(),
        };
        if let Some(i) = self.rows.iter().position(|r| *r == key) {
            return i;
        }
        self.rows.push(key);
        self.cells.push(vec![None; self.datasets.len()]);
        self.rows.len() - 1
    }

    fn dataset_index(&mut self, dataset: &str) -> usize {
        if let Some(j) = self.datasets.iter().position(|d| d == dataset) {
            return j;
        }
        self.datasets.push(dataset.to_string());
        for row in &mut self.cells {
            row.push(None);
        }
        self.datasets.len() - 1
    }

    /// Append one seed's score to a cell, creating row and column as needed.
    pub fn push(&mut self, model: &str, augmentation: &str, dataset: &str, score: f64) {
        let i = self.row_index(model, augmentation);
        let j = self.dataset_index(dataset);
        self.cells[i][j].get_or_insert_with(Cell::default).scores.push(score);
    }

    pub fn cell(&self, model: &str, augmentation: &str, dataset: &str) -> Option<&Cell> {
        let i = self
            .rows
            .iter()
            .position(|r| r.model == model && r.augmentation == augmentation)?;
        let j = self.datasets.iter().position(|d| d == dataset)?;
        self.cells[i][j].as_ref()
    }

    /// Mark significant best and worst cells per dataset.
    ///
    /// Per dataset, the non-derived rows holding the largest seed count take
    /// part; seed `s` of every row forms run `s` of the Friedman matrix.
    pub fn annotate(&mut self, alpha: f64, tail: Tail) -> Result<(), StatsError> {
        for j in 0..self.datasets.len() {
            let members: Vec<usize> = {
                let candidates: Vec<usize> = (0..self.rows.len())
                    .filter(|&i| self.rows[i].augmentation != OPTIM && self.cells[i][j].is_some())
                    .collect();
                let runs = candidates
                    .iter()
                    .map(|&i| self.cells[i][j].as_ref().map_or(0, |c| c.scores.len()))
                    .max()
                    .unwrap_or(0);
                candidates
                    .into_iter()
                    .filter(|&i| self.cells[i][j].as_ref().map_or(0, |c| c.scores.len()) == runs)
                    .collect()
            };
            for row in &mut self.cells {
                if let Some(c) = row[j].as_mut() {
                    c.best = false;
                    c.worst = false;
                }
            }
            if members.len() < 2 {
                continue;
            }
            let runs = self.cells[members[0]][j].as_ref().map_or(0, |c| c.scores.len());
            if runs < 2 {
                continue;
            }
            let matrix: Vec<Vec<f64>> = (0..runs)
                .map(|s| {
                    members
                        .iter()
                        .map(|&i| self.cells[i][j].as_ref().map_or(f64::NAN, |c| c.scores[s]))
                        .collect()
                })
                .collect();
            let groups = bonferroni_dunn_groups(&matrix, alpha, tail)?;
            for b in groups.best {
                if let Some(c) = self.cells[members[b]][j].as_mut() {
                    c.best = true;
                }
            }
            for w in groups.worst {
                if let Some(c) = self.cells[members[w]][j].as_mut() {
                    c.worst = true;
                }
            }
        }
        self.annotated = true;
        Ok(())
    }

    /// Add one `optim` row per model holding, per dataset, the cell of the
    /// adaptive augmentation with the highest mean. Existing `optim` rows are
    /// replaced.
    pub fn add_optim_rows(&mut self, adaptive: &[&str]) {
        let keep: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.rows[i].augmentation != OPTIM)
            .collect();
        self.rows = keep.iter().map(|&i| self.rows[i].clone()).collect();
        self.cells = keep.iter().map(|&i| self.cells[i].clone()).collect();

        let mut models: Vec<String> = Vec::new();
        for r in &self.rows {
            if !models.contains(&r.model) {
                models.push(r.model.clone());
            }
        }
        for model in models {
            let mut derived = vec![None; self.datasets.len()];
            for (j, slot) in derived.iter_mut().enumerate() {
                let best = (0..self.rows.len())
                    .filter(|&i| {
                        self.rows[i].model == model
                            && adaptive.contains(&self.rows[i].augmentation.as_str())
                    })
                    .filter_map(|i| self.cells[i][j].as_ref())
                    .max_by(|a, b| a.mean().total_cmp(&b.mean()));
                *slot = best.map(|c| Cell {
                    scores: c.scores.clone(),
                    best: false,
                    worst: false,
                });
            }
            if derived.iter().any(Option::is_some) {
                self.rows.push(RowKey {
                    model,
                    augmentation: OPTIM.to_string(),
                });
                self.cells.push(derived);
            }
        }
    }

    /// `mean` and `std` of a cell in percent with two decimals.
    fn formatted(c: &Cell) -> (String, String) {
        (format!("{:.2}", c.mean() * 100.0), format!("{:.2}", c.std() * 100.0))
    }

    /// Plain-text table: `mean±std`, `*` marks the best group, `X` the worst.
    pub fn render_text(&self) -> String {
        let mut header = vec![format!("{} (%)", self.metric)];
        header.extend(self.datasets.iter().cloned());
        let mut lines = vec![header];
        for (row, cells) in self.rows.iter().zip(&self.cells) {
            let mut line = vec![format!("{} {}", row.model, row.augmentation)];
            for cell in cells {
                line.push(match cell {
                    None => "-".to_string(),
                    Some(c) => {
                        let (m, s) = Self::formatted(c);
                        let mut text = format!("{m}±{s}");
                        if c.best {
                            text.push_str(" *");
                        }
                        if c.worst {
                            text.push_str(" X");
                        }
                        text
                    }
                });
            }
            lines.push(line);
        }
        let cols = lines[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|k| lines.iter().map(|l| l[k].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (n, line) in lines.iter().enumerate() {
            let padded: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
            if n == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                let _ = writeln!(out, "{}", rule.join("-+-"));
            }
        }
        out
    }

    /// CSV with one line per non-empty cell:
    /// `model,augmentation,dataset,mean,std,seeds,best,worst`.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("model,augmentation,dataset,mean,std,seeds,best,worst\n");
        for (row, cells) in self.rows.iter().zip(&self.cells) {
            for (dataset, cell) in self.datasets.iter().zip(cells) {
                if let Some(c) = cell {
                    let (m, s) = Self::formatted(c);
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        row.model,
                        row.augmentation,
                        dataset,
                        m,
                        s,
                        c.scores.len(),
                        c.best,
                        c.worst
                    );
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new("hits@50");
        for s in 0..10 {
            let bump = s as f64 * 0.001;
            t.push("grace", "random", "usair", 0.80 + bump);
            t.push("grace", "deg", "usair", 0.90 + bump);
            t.push("grace", "pr", "usair", 0.85 + bump);
            t.push("grace", "scom", "usair", 0.70 + bump);
        }
        t
    }

    #[test]
    fn cell_stats() {
        let c = Cell {
            scores: vec![0.5, 0.7],
            ..Cell::default()
        };
        assert!((c.mean() - 0.6).abs() < 1e-15);
        assert!((c.std() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn annotations_mark_extremes() {
        let mut t = table();
        t.annotate(0.05, Tail::OneSided).unwrap();
        assert!(t.cell("grace", "deg", "usair").unwrap().best);
        assert!(t.cell("grace", "scom", "usair").unwrap().worst);
        assert!(!t.cell("grace", "pr", "usair").unwrap().worst);
    }

    #[test]
    fn single_method_has_no_annotations() {
        let mut t = ResultTable::new("hits@50");
        for s in 0..10 {
            t.push("gcn", "supervised", "usair", 0.8 + s as f64 * 0.01);
        }
        t.annotate(0.05, Tail::OneSided).unwrap();
        let c = t.cell("gcn", "supervised", "usair").unwrap();
        assert!(!c.best && !c.worst);
    }

    #[test]
    fn optim_is_max_of_adaptive_means() {
        let mut t = table();
        t.add_optim_rows(&["deg", "evc", "pr", "scom", "sbm", "sbm2"]);
        let optim = t.cell("grace", OPTIM, "usair").unwrap();
        let deg = t.cell("grace", "deg", "usair").unwrap();
        assert_eq!(optim.mean(), deg.mean());
        // Random is not adaptive even when it would win.
        let mut t2 = ResultTable::new("hits@50");
        t2.push("bgrl", "random", "power", 0.9);
        t2.push("bgrl", "pr", "power", 0.3);
        t2.add_optim_rows(&["pr"]);
        assert_eq!(t2.cell("bgrl", OPTIM, "power").unwrap().mean(), 0.3);
        // Idempotent.
        t2.add_optim_rows(&["pr"]);
        assert_eq!(t2.rows.len(), 3);
    }

    #[test]
    fn csv_and_text_share_numbers() {
        let mut t = table();
        t.annotate(0.05, Tail::OneSided).unwrap();
        t.add_optim_rows(&["deg", "pr", "scom"]);
        let text = t.render_text();
        let csv = t.render_csv();
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert!(text.contains(&format!("{}±{}", f[3], f[4])), "{line}");
        }
        assert!(text.contains('*'));
        assert!(text.contains('X'));
    }
}
