//! Compressed sparse row matrices over `Complex64`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Entries with modulus at or below this are dropped during assembly.
const DROP_TOL: f64 = 0.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(diag.len(), diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut per_row: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); rows];
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            *per_row[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        Self::from_row_maps(rows, cols, per_row)
    }

    fn from_row_maps(rows: usize, cols: usize, per_row: Vec<BTreeMap<usize, C64>>) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in per_row {
            for (c, v) in row {
                if v.norm() > DROP_TOL {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { rows, cols, indptr, indices, values }
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in sparse apply");
        let row = |r: usize| -> C64 { self.row(r).map(|(c, v)| v * x[c]).sum() };
        if self.nnz() > 200_000 {
            (0..self.rows).into_par_iter().map(row).collect()
        } else {
            (0..self.rows).map(row).collect()
        }
    }

    /// `A^† x` without forming the adjoint.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows, "dimension mismatch in sparse adjoint apply");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (r, c, v) in self.iter() {
            out[c] += v.conj() * x[r];
        }
        out
    }

    pub fn apply_dvec(&self, x: &DVector<C64>) -> DVector<C64> {
        DVector::from_vec(self.apply(x.as_slice()))
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let mut per_row: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); self.cols];
        for (r, c, v) in self.iter() {
            per_row[c].insert(r, v.conj());
        }
        Self::from_row_maps(self.cols, self.rows, per_row)
    }

    pub fn scale(&self, s: C64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn scale_re(&self, s: f64) -> CsrMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add_scaled(&self, other: &CsrMatrix, s: C64) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in sparse add");
        let per_row: Vec<BTreeMap<usize, C64>> = (0..self.rows)
            .map(|r| {
                let mut m: BTreeMap<usize, C64> = self.row(r).collect();
                for (c, v) in other.row(r) {
                    *m.entry(c).or_insert(C64::new(0.0, 0.0)) += s * v;
                }
                m
            })
            .collect();
        Self::from_row_maps(self.rows, self.cols, per_row)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in sparse product");
        let per_row: Vec<BTreeMap<usize, C64>> = (0..self.rows)
            .into_par_iter()
            .map(|r| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_insert(C64::new(0.0, 0.0)) += a * b;
                    }
                }
                acc
            })
            .collect();
        Self::from_row_maps(self.rows, other.cols, per_row)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<C64>, tol: f64) -> CsrMatrix {
        let triplets = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = m[(r, c)];
                (v.norm() > tol).then_some((r, c, v))
            });
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.add_scaled(other, C64::new(-1.0, 0.0))
            .values
            .iter()
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |A - A^†|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }
}

impl Add for &CsrMatrix {
    type Output = CsrMatrix;
    fn add(self, rhs: &CsrMatrix) -> CsrMatrix {
        self.add_scaled(rhs, C64::new(1.0, 0.0))
    }
}

impl Sub for &CsrMatrix {
    type Output = CsrMatrix;
    fn sub(self, rhs: &CsrMatrix) -> CsrMatrix {
        self.add_scaled(rhs, C64::new(-1.0, 0.0))
    }
}

impl Mul for &CsrMatrix {
    type Output = CsrMatrix;
    fn mul(self, rhs: &CsrMatrix) -> CsrMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &CsrMatrix {
    type Output = CsrMatrix;
    fn neg(self) -> CsrMatrix {
        self.scale_re(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_lookup_works() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 1, c(1.0, 0.0)), (0, 1, c(0.5, 1.0)), (1, 2, c(2.0, 0.0))]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c(1.5, 1.0));
        assert_eq!(m.get(1, 0), c(0.0, 0.0));
        assert_eq!(m.apply(&[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]), vec![c(1.5, 1.0), c(0.0, 2.0)]);
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = DMatrix<C64>> {
        proptest::collection::vec((-2i32..3, -2i32..3), n * n).prop_map(move |v| {
            DMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| c(a as f64, b as f64)))
        })
    }

    proptest! {
        #[test]
        fn sparse_algebra_matches_dense(a in arb_matrix(5), b in arb_matrix(5)) {
            let sa = CsrMatrix::from_dense(&a, 0.0);
            let sb = CsrMatrix::from_dense(&b, 0.0);
            prop_assert_eq!((&sa * &sb).to_dense(), &a * &b);
            prop_assert_eq!((&sa + &sb).to_dense(), &a + &b);
            prop_assert_eq!(sa.adjoint().to_dense(), a.adjoint());
            let x: Vec<C64> = (0..5).map(|i| c(i as f64, 1.0)).collect();
            let dense = &a * DVector::from_vec(x.clone());
            prop_assert_eq!(sa.apply(&x), dense.as_slice().to_vec());
        }
    }
}
