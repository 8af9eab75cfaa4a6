use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::mps::{right_isometry_residual, MatrixProductState};
use crate::tensor::{column_orthonormality_residual, gram_schmidt_complete, is_power_of_two, log2_exact, DenseTensor, Matrix};

/// Completes the isometry `q` (orthonormal columns, power-of-two rows) to an orthogonal
/// matrix whose leading columns are `q`.
pub fn embed_isometry(q: &Matrix, seed: u64) -> Result<Matrix> {
    let (rows, cols) = q.shape();
    if !is_power_of_two(rows) {
        return Err(Error::NotPowerOfTwo { what: "isometry rows", value: rows });
    }
    if cols == 0 || cols > rows {
        return Err(Error::DimensionMismatch(format!("{rows}×{cols} isometry")));
    }
    let res = column_orthonormality_residual(q);
    if res > 1e-10 {
        return Err(Error::NotOrthonormal(res));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gram_schmidt_complete(q, &mut rng)
}

/// One staircase gate. Column `prescribed[κ]` holds `A[κ, s, r]` at row `s·Dr + r`; every
/// other column came from the basis completion.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteGate {
    pub qubits: Vec<usize>,
    pub matrix: Matrix,
    pub prescribed: Vec<usize>,
    pub dl: usize,
    pub dr: usize,
}

impl SiteGate {
    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn has_extension(&self) -> bool {
        self.prescribed.len() < self.matrix.ncols()
    }

    /// Site tensor realized by the gate when its fresh qubits start in |0⟩.
    pub fn tensor(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(vec![self.dl, 2, self.dr]);
        for (k, &c) in self.prescribed.iter().enumerate() {
            for s in 0..2 {
                for r in 0..self.dr {
                    t.set(&[k, s, r], self.matrix[(s * self.dr + r, c)]);
                }
            }
        }
        t
    }
}

/// Staircase gates of a right-canonical MPS: site `i` acts on qubits `offset + i ..= offset + i + log₂Dr`.
pub fn site_gates(mps: &MatrixProductState, offset: usize, seed: u64) -> Result<Vec<SiteGate>> {
    let mut out = Vec::with_capacity(mps.n_sites());
    for (i, t) in mps.tensors().iter().enumerate() {
        let (dl, dr) = (t.dims()[0], t.dims()[2]);
        let k = log2_exact(dr, "right bond")?;
        let m = log2_exact(dl, "left bond")?;
        if m > k + 1 {
            return invalid(format!("site {i}: left bond {dl} exceeds twice the right bond {dr}"));
        }
        let res = right_isometry_residual(t);
        if res > 1e-10 {
            return Err(Error::NotOrthonormal(res));
        }
        let q = t.to_matrix(1).transpose();
        let u0 = embed_isometry(&q, seed.wrapping_add(i as u64))?;
        let f = k + 1 - m;
        let dim = 2 * dr;
        let prescribed: Vec<usize> = (0..dl).map(|kappa| kappa << f).collect();
        let mut order = vec![usize::MAX; dim];
        for (kappa, &c) in prescribed.iter().enumerate() {
            order[c] = kappa;
        }
        let mut next = dl;
        for slot in order.iter_mut().filter(|s| **s == usize::MAX) {
            *slot = next;
            next += 1;
        }
        let matrix = Matrix::from_fn(dim, dim, |r, c| u0[(r, order[c])]);
        out.push(SiteGate { qubits: (offset + i..=offset + i + k).collect(), matrix, prescribed, dl, dr });
    }
    Ok(out)
}

/// Makes every determinant +1, sweeping from the right. A gate with a completion column
/// absorbs the flip there; otherwise its input bond index 0 is negated together with the
/// matching output rows of the left neighbour. Returns the global sign picked up when the
/// leftmost gate has nothing to absorb the flip.
pub fn fix_determinants(gates: &mut [SiteGate]) -> Result<f64> {
    let mut sign = 1.0;
    for i in (0..gates.len()).rev() {
        let det = gates[i].matrix.determinant();
        if (det.abs() - 1.0).abs() > 1e-8 {
            return Err(Error::NotOrthogonal((det.abs() - 1.0).abs()));
        }
        if det > 0.0 {
            continue;
        }
        let g = &mut gates[i];
        let col = if g.has_extension() {
            (0..g.matrix.ncols()).rev().find(|c| !g.prescribed.contains(c)).expect("extension present")
        } else {
            g.prescribed[0]
        };
        g.matrix.column_mut(col).neg_mut();
        if g.has_extension() {
            continue;
        }
        if i == 0 {
            sign = -sign;
            continue;
        }
        let left = &mut gates[i - 1];
        let dr = left.dr;
        for s in 0..2 {
            left.matrix.row_mut(s * dr).neg_mut();
        }
    }
    Ok(sign)
}
