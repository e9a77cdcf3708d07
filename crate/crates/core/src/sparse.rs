//! Minimal compressed-sparse-row storage for the spatial operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Real square matrix in CSR layout. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                debug_assert!(j < n);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_rows(vec![Vec::new(); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| {
            let mut it = self.row(i);
            matches!((it.next(), it.next()), (Some((j, v)), None) if j == i && v == 1.0)
        })
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y += scale * A x`
    pub fn mul_vec_add(&self, scale: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += scale * s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = A x` for complex `x`.
    pub fn mul_complex_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| x[j] * v).sum();
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        assert_eq!(d.nrows(), d.ncols());
        let rows = (0..d.nrows())
            .map(|i| {
                (0..d.ncols())
                    .filter(|&j| d[(i, j)] != 0.0)
                    .map(|j| (j, d[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }
}
