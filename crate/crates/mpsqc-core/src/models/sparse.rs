use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::tensor::Matrix;

use super::ed::sector_basis;
use super::PauliTermSet;

/// Real symmetric Hamiltonian in CSR form, optionally restricted to a Σσᶻ sector.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    n_sites: usize,
    basis: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

pub const SPARSE_SITE_GUARD: usize = 26;

impl SparseHamiltonian {
    pub fn new(h: &PauliTermSet, sector: Option<i64>) -> Result<Self> {
        let n = h.n_sites();
        if n > SPARSE_SITE_GUARD {
            return Err(Error::SizeGuard(format!("{n} sites")));
        }
        let basis = sector_basis(n, sector);
        if basis.is_empty() {
            return invalid(format!("sector {sector:?} is empty for {n} sites"));
        }
        let mut index = vec![u32::MAX; 1usize << n];
        for (i, &b) in basis.iter().enumerate() {
            index[b] = i as u32;
        }
        let mut row_ptr = Vec::with_capacity(basis.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for &x in &basis {
            scratch.clear();
            for t in h.terms() {
                if let Some((y, a)) = t.act(x) {
                    if a.im.abs() > 1e-14 {
                        return invalid("Hamiltonian has imaginary matrix elements");
                    }
                    scratch.push((y, a.re));
                }
            }
            scratch.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let y = scratch[k].0;
                let mut v = 0.0;
                while k < scratch.len() && scratch[k].0 == y {
                    v += scratch[k].1;
                    k += 1;
                }
                let r = index[y];
                if r == u32::MAX {
                    // individual strings may leave the sector as long as their sum does not
                    if v.abs() > 1e-12 {
                        return invalid("the Hamiltonian does not conserve the requested charge");
                    }
                    continue;
                }
                cols.push(r);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        // H is symmetric, so the column lists built above double as rows.
        Ok(Self { n_sites: n, basis, row_ptr, cols, vals })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        }
    }

    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        for r in 0..d {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }

    /// Sector vector → full `2^n` vector.
    pub fn embed(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 1usize << self.n_sites];
        for (&b, &x) in self.basis.iter().zip(v) {
            out[b] = x;
        }
        out
    }

    /// ⟨v|H|v⟩ for a full-space complex vector (sector-restricted operators see only their block).
    pub fn expectation_full(&self, v: &[Complex64]) -> f64 {
        let x: Vec<Complex64> = self.basis.iter().map(|&b| v[b]).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.matvec_complex(&x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}
