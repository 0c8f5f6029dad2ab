//! Compressed sparse row matrices and the GCN propagation matrix.

use crate::graph::Graph;

/// Square or rectangular CSR matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(column, value)` lists. Columns within a row are
    /// sorted; duplicates are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let n_rows = rows.len();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < cols, "column {c} out of range");
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: n_rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `self * dense` for a row-major `dense` with `width` columns.
    pub fn mul_dense(&self, dense: &[f64], width: usize) -> Vec<f64> {
        assert_eq!(dense.len(), self.cols * width);
        let mut out = vec![0.0; self.rows * width];
        for i in 0..self.rows {
            let dst = &mut out[i * width..(i + 1) * width];
            for (j, a) in self.row(i) {
                let src = &dense[j * width..(j + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `self^T * dense` for a row-major `dense` with `width` columns.
    pub fn transpose_mul_dense(&self, dense: &[f64], width: usize) -> Vec<f64> {
        assert_eq!(dense.len(), self.rows * width);
        let mut out = vec![0.0; self.cols * width];
        for i in 0..self.rows {
            let src = &dense[i * width..(i + 1) * width];
            for (j, a) in self.row(i) {
                let dst = &mut out[j * width..(j + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> CsrMatrix {
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / ((d + 1) as f64).sqrt())
        .collect();
    let rows = (0..g.n())
        .map(|u| {
            let mut row = Vec::with_capacity(g.degree(u) + 1);
            row.push((u, inv_sqrt[u] * inv_sqrt[u]));
            row.extend(g.neighbors(u).iter().map(|&v| (v, inv_sqrt[u] * inv_sqrt[v])));
            row
        })
        .collect();
    CsrMatrix::from_rows(g.n(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_entries() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let a = normalized_adjacency(&g);
        assert!((a.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(0, 1) - 0.40825).abs() < 1e-5);
        assert_eq!(a.get(0, 2), 0.0);
        assert!(a.is_symmetric(0.0));
    }

    #[test]
    fn isolated_node() {
        let g = Graph::new(1, []).unwrap();
        let a = normalized_adjacency(&g);
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn entries_in_unit_interval() {
        let g = Graph::new(6, [(0, 1), (0, 2), (0, 3), (3, 4), (4, 5), (1, 2)]).unwrap();
        let a = normalized_adjacency(&g);
        assert!(a.is_symmetric(1e-15));
        for i in 0..6 {
            for (_, v) in a.row(i) {
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn transpose_product_matches_dense() {
        let a = CsrMatrix::from_rows(3, vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0)]]);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        // a^T (3x2) * x (2x2)
        let y = a.transpose_mul_dense(&x, 2);
        assert_eq!(y, vec![1.0, 2.0, 9.0, 12.0, 2.0, 4.0]);
        let z = a.mul_dense(&[1.0, 1.0, 1.0], 1);
        assert_eq!(z, vec![3.0, 3.0]);
    }
}
