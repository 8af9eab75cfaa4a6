//! Spin Hamiltonians as weighted operator strings, plus the solvers that consume them:
//! exact diagonalization, MPO construction, excited-state DMRG, ring ground states, and
//! Trotter layers.

mod dmrg;
mod ed;
mod mpo;
mod pbc;
mod sparse;
mod trotter;

pub use dmrg::{dmrg_excited_obc, max_pairwise_overlap, DmrgConfig, SpectrumResult};
pub use ed::{exact_eigs, lanczos_ground, lowest_eigs, sector_basis};
pub use mpo::{mpo_expectation, mpo_sum, terms_to_mpo, MatrixProductOperator};
pub use pbc::{pbc_ground_mps, PbcFit, PbcFitConfig};
pub use sparse::SparseHamiltonian;
pub use trotter::{heisenberg_bond_propagator, trotter_layer, TrotterGate};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mps::Boundary;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
    /// |0⟩⟨1|
    Plus,
    /// |1⟩⟨0|
    Minus,
}

impl PauliOp {
    /// Image of basis bit `b`: new bit and amplitude, or `None` if annihilated.
    pub fn act(self, b: usize) -> Option<(usize, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        match (self, b) {
            (PauliOp::I, _) => Some((b, one)),
            (PauliOp::X, _) => Some((b ^ 1, one)),
            (PauliOp::Y, 0) => Some((1, Complex64::new(0.0, 1.0))),
            (PauliOp::Y, _) => Some((0, Complex64::new(0.0, -1.0))),
            (PauliOp::Z, 0) => Some((0, one)),
            (PauliOp::Z, _) => Some((1, -one)),
            (PauliOp::Plus, 1) => Some((0, one)),
            (PauliOp::Minus, 0) => Some((1, one)),
            _ => None,
        }
    }

    /// Real 2×2 matrix `⟨s|O|s'⟩`; `Y` is returned as `iY`, see [`PauliTerm::real_factor`].
    pub(crate) fn real_matrix(self) -> [[f64; 2]; 2] {
        match self {
            PauliOp::I => [[1.0, 0.0], [0.0, 1.0]],
            PauliOp::X => [[0.0, 1.0], [1.0, 0.0]],
            PauliOp::Y => [[0.0, 1.0], [-1.0, 0.0]],
            PauliOp::Z => [[1.0, 0.0], [0.0, -1.0]],
            PauliOp::Plus => [[0.0, 1.0], [0.0, 0.0]],
            PauliOp::Minus => [[0.0, 0.0], [1.0, 0.0]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub ops: Vec<PauliOp>,
}

impl PauliTerm {
    /// Coefficient once every `Y` is rewritten as `−i·(iY)`; errors if the result is imaginary.
    pub(crate) fn real_factor(&self) -> Result<f64> {
        let ny = self.ops.iter().filter(|&&o| o == PauliOp::Y).count();
        if ny % 2 == 1 {
            return invalid("term with an odd number of Y factors is not real");
        }
        Ok(if (ny / 2) % 2 == 0 { self.coeff } else { -self.coeff })
    }

    /// Image of basis state `x` (site 0 is the most significant bit).
    pub fn act(&self, x: usize) -> Option<(usize, Complex64)> {
        let n = self.ops.len();
        let mut y = x;
        let mut amp = Complex64::new(self.coeff, 0.0);
        for (k, op) in self.ops.iter().enumerate() {
            if *op == PauliOp::I {
                continue;
            }
            let sh = n - 1 - k;
            let (nb, a) = op.act((x >> sh) & 1)?;
            y = (y & !(1 << sh)) | (nb << sh);
            amp *= a;
        }
        Some((y, amp))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTermSet {
    n_sites: usize,
    terms: Vec<PauliTerm>,
}

impl PauliTermSet {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites, terms: Vec::new() }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// Add `coeff · Π op_site`; unlisted sites carry the identity.
    pub fn add(&mut self, coeff: f64, factors: &[(usize, PauliOp)]) -> Result<()> {
        let mut ops = vec![PauliOp::I; self.n_sites];
        for &(s, o) in factors {
            if s >= self.n_sites {
                return invalid(format!("site {s} out of range for {} sites", self.n_sites));
            }
            if ops[s] != PauliOp::I {
                return invalid(format!("site {s} listed twice in one term"));
            }
            ops[s] = o;
        }
        if coeff != 0.0 {
            self.terms.push(PauliTerm { coeff, ops });
        }
        Ok(())
    }

    pub fn push(&mut self, term: PauliTerm) -> Result<()> {
        if term.ops.len() != self.n_sites {
            return invalid("term length differs from n_sites");
        }
        self.terms.push(term);
        Ok(())
    }

    /// Σ|c|, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coeff *= c);
        out
    }

    pub fn extend(&mut self, other: &PauliTermSet) -> Result<()> {
        if other.n_sites != self.n_sites {
            return invalid("site count mismatch");
        }
        self.terms.extend(other.terms.iter().cloned());
        Ok(())
    }
}

/// `(Σσᶻ)²` expanded into Pauli strings.
pub fn total_sz_squared(n: usize) -> PauliTermSet {
    let mut h = PauliTermSet::new(n);
    h.add(n as f64, &[]).unwrap();
    for j in 0..n {
        for k in j + 1..n {
            h.add(2.0, &[(j, PauliOp::Z), (k, PauliOp::Z)]).unwrap();
        }
    }
    h
}

/// Σ_bonds (SˣSˣ + SʸSʸ + Δ·SᶻSᶻ) with S = σ/2; a ring adds the bond (N−1, 0).
pub fn heisenberg(n: usize, delta: f64, boundary: Boundary) -> Result<PauliTermSet> {
    match boundary {
        Boundary::Pbc if n < 3 => return invalid("a Heisenberg ring needs n ≥ 3"),
        Boundary::Obc if n < 2 => return invalid("a Heisenberg chain needs n ≥ 2"),
        _ => {}
    }
    let mut h = PauliTermSet::new(n);
    let nb = if boundary == Boundary::Pbc { n } else { n - 1 };
    for i in 0..nb {
        let j = (i + 1) % n;
        h.add(0.25, &[(i, PauliOp::X), (j, PauliOp::X)])?;
        h.add(0.25, &[(i, PauliOp::Y), (j, PauliOp::Y)])?;
        h.add(0.25 * delta, &[(i, PauliOp::Z), (j, PauliOp::Z)])?;
    }
    Ok(h)
}

/// Lattice Schwinger model in spin form: hopping `x`, staggered mass `μ`, background field `l`.
/// The squared electric field is expanded into constant, σᶻ and σᶻσᶻ terms.
pub fn schwinger(n: usize, x: f64, mu: f64, l: f64) -> Result<PauliTermSet> {
    if n < 2 || n % 2 == 1 {
        return invalid("the Schwinger chain needs an even number of sites");
    }
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut h = PauliTermSet::new(n);
    for i in 0..n - 1 {
        h.add(x, &[(i, PauliOp::Plus), (i + 1, PauliOp::Minus)])?;
        h.add(x, &[(i, PauliOp::Minus), (i + 1, PauliOp::Plus)])?;
    }
    // c_m = l + ½ Σ_{k≤m} (−1)^k
    let mut c = Vec::with_capacity(n - 1);
    let mut acc = l;
    for m in 0..n - 1 {
        acc += 0.5 * sign(m);
        c.push(acc);
    }
    let mut constant = 0.5 * mu * n as f64;
    for (m, cm) in c.iter().enumerate() {
        constant += cm * cm + 0.25 * (m + 1) as f64;
    }
    h.add(constant, &[])?;
    for k in 0..n {
        let lin: f64 = c[k.min(c.len())..].iter().sum();
        h.add(lin + 0.5 * mu * sign(k), &[(k, PauliOp::Z)])?;
    }
    for j in 0..n {
        for k in j + 1..n - 1 {
            h.add(0.5 * (n - 1 - k) as f64, &[(j, PauliOp::Z), (k, PauliOp::Z)])?;
        }
    }
    Ok(h)
}

pub const DENSE_SITE_GUARD: usize = 12;

/// Full `2^n × 2^n` matrix; σ₁ is the most significant bit.
pub fn terms_to_dense(h: &PauliTermSet) -> Result<Matrix> {
    let n = h.n_sites();
    if n > DENSE_SITE_GUARD {
        return Err(crate::Error::SizeGuard(format!("dense Hamiltonian on {n} sites (guard {DENSE_SITE_GUARD})")));
    }
    let dim = 1usize << n;
    let mut m = Matrix::zeros(dim, dim);
    for x in 0..dim {
        for t in h.terms() {
            if let Some((y, a)) = t.act(x) {
                if a.im.abs() > 1e-14 {
                    return invalid("Hamiltonian has imaginary matrix elements");
                }
                m[(y, x)] += a.re;
            }
        }
    }
    Ok(m)
}

/// Σσᶻ of a basis state.
pub fn total_sz(x: usize, n: usize) -> i64 {
    n as i64 - 2 * (x.count_ones() as i64)
}
