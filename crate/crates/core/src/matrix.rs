//! Compressed sparse row feature matrix.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of one sparse row; indices are strictly increasing.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl SparseRow<'_> {
    pub fn get(&self, col: usize) -> f64 {
        match self.indices.binary_search(&col) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| dense[j] * v)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }
}

impl FeatureMatrix {
    pub fn empty(n_cols: usize) -> Self {
        FeatureMatrix {
            n_rows: 0,
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from per-row `(column, value)` pairs. Pairs are sorted, duplicate
    /// columns are summed and explicit zeros dropped.
    pub fn from_sparse_rows<I, R>(n_cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut m = FeatureMatrix::empty(n_cols);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = FeatureMatrix::empty(n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            m.push_row(r.iter().copied().enumerate())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let mut entries: Vec<(usize, f64)> = row.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let start = self.indices.len();
        for (j, v) in entries {
            if j >= self.n_cols {
                return Err(Error::DimensionMismatch {
                    expected: self.n_cols,
                    actual: j + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "row {} column {j} holds {v}",
                    self.n_rows
                )));
            }
            if self.indices.len() > start && self.indices.last() == Some(&j) {
                *self.values.last_mut().expect("non-empty") += v;
            } else {
                self.indices.push(j);
                self.values.push(v);
            }
        }
        // drop explicit zeros (including ones produced by summation)
        let mut w = start;
        for r in start..self.indices.len() {
            if self.values[r] != 0.0 {
                self.indices[w] = self.indices[r];
                self.values[w] = self.values[r];
                w += 1;
            }
        }
        self.indices.truncate(w);
        self.values.truncate(w);
        self.indptr.push(w);
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_>> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).get(j)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r.get(j)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|r| {
                let mut d = vec![0.0; self.n_cols];
                for (j, v) in r.iter() {
                    d[j] = v;
                }
                d
            })
            .collect()
    }

    /// Per-column lists of `(row, value)` for the non-zero entries.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for (i, r) in self.rows().enumerate() {
            for (j, v) in r.iter() {
                cols[j].push((i, v));
            }
        }
        cols
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut m = FeatureMatrix::empty(self.n_cols);
        for &i in rows {
            let r = self.row(i);
            m.indices.extend_from_slice(r.indices);
            m.values.extend_from_slice(r.values);
            m.indptr.push(m.indices.len());
            m.n_rows += 1;
        }
        m
    }

    /// Copy of the matrix where row `i` takes column `col` from row `perm[i]`.
    pub fn with_column_permuted(&self, col: usize, perm: &[usize]) -> FeatureMatrix {
        let source: Vec<f64> = perm.iter().map(|&p| self.get(p, col)).collect();
        let rows = self.rows().enumerate().map(|(i, r)| {
            r.iter()
                .filter(|&(j, _)| j != col)
                .chain(std::iter::once((col, source[i])))
                .collect::<Vec<_>>()
        });
        FeatureMatrix::from_sparse_rows(self.n_cols, rows).expect("values come from a valid matrix")
    }

    /// Scale each column by `factor[j]`.
    pub fn scale_columns(&self, factor: &[f64]) -> FeatureMatrix {
        let mut m = self.clone();
        for (v, &j) in m.values.iter_mut().zip(&m.indices) {
            *v *= factor[j];
        }
        m
    }

    /// `X^T v` for a dense vector over rows.
    pub fn transpose_dot(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (i, r) in self.rows().enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                for (j, x) in r.iter() {
                    out[j] += x * vi;
                }
            }
        }
        out
    }

    /// Write in MatrixMarket coordinate format (1-based triplets).
    pub fn write_matrix_market<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (i, r) in self.rows().enumerate() {
            for (j, v) in r.iter() {
                writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_matrix_market<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut shape: Option<(usize, usize)> = None;
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let bad = || Error::Row {
                line: n as u64 + 1,
                message: format!("malformed entry '{line}'"),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            match shape {
                None => {
                    let [r, c, _] = parts[..] else { return Err(bad()) };
                    let (r, c) = (r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
                    shape = Some((r, c));
                    rows = vec![Vec::new(); r];
                }
                Some((nr, nc)) => {
                    let [i, j, v] = parts[..] else { return Err(bad()) };
                    let i: usize = i.parse().map_err(|_| bad())?;
                    let j: usize = j.parse().map_err(|_| bad())?;
                    let v: f64 = v.parse().map_err(|_| bad())?;
                    if i == 0 || j == 0 || i > nr || j > nc {
                        return Err(bad());
                    }
                    rows[i - 1].push((j - 1, v));
                }
            }
        }
        let (_, nc) = shape.ok_or_else(|| Error::Schema("missing MatrixMarket size line".into()))?;
        FeatureMatrix::from_sparse_rows(nc, rows)
    }
}
