//! Compressed-sparse-row complex matrices.
//!
//! Every operator in the lab is either diagonal in the position/level basis
//! or a nearest-neighbour stencil, so a plain CSR layout covers all of them.
//! Rows keep their column indices sorted and free of duplicates.

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        Self {
            dim: diag.len(),
            row_ptr: (0..=diag.len()).collect(),
            cols: (0..diag.len()).collect(),
            vals: diag.to_vec(),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// Builds a matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != ZERO {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// `<x| M |x>` without allocating.
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = ZERO;
        for r in 0..self.dim {
            let mut row = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += x[r].conj() * row;
        }
        acc
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, t)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.dim, t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale_real(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, t)
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    /// Largest entry modulus (elementwise max-norm).
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, v)| r == c || v == ZERO)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}
