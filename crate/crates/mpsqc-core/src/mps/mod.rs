//! Matrix product states on a chain or ring of qubits.
//!
//! A site tensor has dims `(D_left, 2, D_right)`. The amplitude of `σ₁…σ_N` is
//! `Tr(Λ·A₁^{σ₁}⋯A_N^{σ_N})`, where `Λ = diag(lambda)` sits on the bond closing the chain
//! (an implicit identity when `lambda` is absent). OBC is the special case of a 1×1
//! closing bond.

mod canonical;
mod compress;
mod contract;
mod entropy;

pub use canonical::{right_canonicalize, right_isometry_residual};
pub use compress::{compress_obc, compress_pbc, hosvd_init, CompressionReport};
pub use contract::{fidelity, from_statevector, mps_norm, overlap, to_statevector, STATEVECTOR_GUARD};
pub use entropy::{entanglement_entropy, entanglement_entropy_real};
pub(crate) use contract::{reversed, row_major, transfer_right};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{DenseTensor, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Obc,
    Pbc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState {
    tensors: Vec<DenseTensor>,
    boundary: Boundary,
    lambda: Option<Vec<f64>>,
}

impl MatrixProductState {
    pub fn new(tensors: Vec<DenseTensor>, boundary: Boundary, lambda: Option<Vec<f64>>) -> Result<Self> {
        let n = tensors.len();
        if n == 0 {
            return invalid("an MPS needs at least one site");
        }
        for (i, t) in tensors.iter().enumerate() {
            if t.rank() != 3 || t.dims()[1] != 2 {
                return Err(Error::DimensionMismatch(format!("site {i} has dims {:?}, want (Dl, 2, Dr)", t.dims())));
            }
        }
        for i in 0..n - 1 {
            if tensors[i].dims()[2] != tensors[i + 1].dims()[0] {
                return Err(Error::DimensionMismatch(format!("bond between sites {i} and {} does not chain", i + 1)));
            }
        }
        let d0 = tensors[0].dims()[0];
        let dn = tensors[n - 1].dims()[2];
        match boundary {
            Boundary::Obc if d0 != 1 || dn != 1 => {
                return Err(Error::DimensionMismatch(format!("OBC ends must be 1, got {d0} and {dn}")));
            }
            Boundary::Pbc if d0 != dn => {
                return Err(Error::DimensionMismatch(format!("PBC closing bond mismatch: {d0} vs {dn}")));
            }
            _ => {}
        }
        if let Some(l) = &lambda {
            if l.len() != d0 {
                return Err(Error::DimensionMismatch(format!("lambda has {} entries, bond is {d0}", l.len())));
            }
            if l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return invalid("lambda entries must be finite and non-negative");
            }
        }
        Ok(Self { tensors, boundary, lambda })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &DenseTensor {
        &self.tensors[i]
    }

    pub fn lambda(&self) -> Option<&[f64]> {
        self.lambda.as_deref()
    }

    /// Right bond dimension of every site; the last entry is the closing bond.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.dims()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.tensors.iter().map(|t| t.dims()[0].max(t.dims()[2])).max().unwrap_or(1)
    }

    /// Site tensors with `diag(lambda)` folded into the first one.
    pub fn absorbed_tensors(&self) -> Vec<DenseTensor> {
        let mut ts = self.tensors.clone();
        if let Some(l) = &self.lambda {
            let t = &mut ts[0];
            let row = 2 * t.dims()[2];
            for (a, chunk) in t.data_mut().chunks_mut(row).enumerate() {
                chunk.iter_mut().for_each(|x| *x *= l[a]);
            }
        }
        ts
    }

    /// Same state with `lambda` folded into the first tensor.
    pub fn without_lambda(&self) -> Self {
        Self { tensors: self.absorbed_tensors(), boundary: self.boundary, lambda: None }
    }

    /// Relabel as periodic. An open chain becomes a ring with a 1×1 closing bond.
    pub fn as_pbc(&self) -> Self {
        Self { tensors: self.tensors.clone(), boundary: Boundary::Pbc, lambda: self.lambda.clone() }
    }

    pub fn scale(&mut self, c: f64) {
        self.tensors[0].scale(c);
    }

    /// `A^σ` of site `i` as a `Dl × Dr` matrix.
    pub fn site_matrix(&self, i: usize, s: usize) -> Matrix {
        site_matrix(&self.tensors[i], s)
    }

    pub fn product_state(bits: &[u8]) -> Result<Self> {
        let ts = bits
            .iter()
            .map(|&b| {
                let mut d = vec![0.0, 0.0];
                d[(b & 1) as usize] = 1.0;
                DenseTensor::new(vec![1, 2, 1], d)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ts, Boundary::Obc, None)
    }

    /// Unnormalized GHZ state `|0…0⟩ + |1…1⟩`, bond dimension 2.
    pub fn ghz(n: usize, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return invalid("GHZ needs at least two sites");
        }
        let bulk = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let ts = (0..n)
            .map(|i| match boundary {
                Boundary::Pbc => DenseTensor::new(vec![2, 2, 2], bulk.clone()),
                Boundary::Obc if i == 0 => DenseTensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]),
                Boundary::Obc if i == n - 1 => DenseTensor::new(vec![2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]),
                Boundary::Obc => DenseTensor::new(vec![2, 2, 2], bulk.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ts, boundary, None)
    }

    /// Gaussian random tensors. OBC bonds are capped by the exact Schmidt-rank bound.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, boundary: Boundary, rng: &mut R) -> Result<Self> {
        if n == 0 || d == 0 {
            return invalid("random MPS needs n ≥ 1 and d ≥ 1");
        }
        let bond = |k: usize| -> usize {
            match boundary {
                Boundary::Pbc => d,
                Boundary::Obc => {
                    if k == 0 || k == n {
                        1
                    } else {
                        let cap = 1usize.checked_shl(k.min(n - k) as u32).unwrap_or(usize::MAX);
                        d.min(cap)
                    }
                }
            }
        };
        let ts = (0..n)
            .map(|i| {
                let (l, r) = (bond(i), bond(i + 1));
                let data = (0..l * 2 * r).map(|_| rng.sample(StandardNormal)).collect();
                DenseTensor::new(vec![l, 2, r], data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ts, boundary, None)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_canonical_string_pretty(&MpsFile::from(self))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MpsFile = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("MPS JSON: {e}")))?;
        f.try_into()
    }

    /// Amplitudes as complex numbers, for handing to the simulator.
    pub fn to_complex_statevector(&self) -> Result<Vec<Complex64>> {
        Ok(to_statevector(self)?.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
    }
}

pub(crate) fn site_matrix(t: &DenseTensor, s: usize) -> Matrix {
    let (l, r) = (t.dims()[0], t.dims()[2]);
    let d = t.data();
    Matrix::from_fn(l, r, |a, b| d[(a * 2 + s) * r + b])
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    dims: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MpsFile {
    n_sites: usize,
    boundary: Boundary,
    tensors: Vec<TensorFile>,
    lambda: Option<Vec<f64>>,
}

impl From<&MatrixProductState> for MpsFile {
    fn from(m: &MatrixProductState) -> Self {
        MpsFile {
            n_sites: m.n_sites(),
            boundary: m.boundary,
            tensors: m.tensors.iter().map(|t| TensorFile { dims: t.dims().to_vec(), data: t.data().to_vec() }).collect(),
            lambda: m.lambda.clone(),
        }
    }
}

impl TryFrom<MpsFile> for MatrixProductState {
    type Error = Error;

    fn try_from(f: MpsFile) -> Result<Self> {
        if f.n_sites != f.tensors.len() {
            return invalid(format!("n_sites = {} but {} tensors given", f.n_sites, f.tensors.len()));
        }
        let ts = f.tensors.into_iter().map(|t| DenseTensor::new(t.dims, t.data)).collect::<Result<Vec<_>>>()?;
        MatrixProductState::new(ts, f.boundary, f.lambda)
    }
}
