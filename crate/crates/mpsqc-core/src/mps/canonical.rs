use crate::error::{Error, Result};
use crate::tensor::{lq_decompose, svd, DenseTensor, Matrix};

use super::contract::{mps_norm, row_major};
use super::MatrixProductState;

/// ‖M·Mᵀ − I‖_F for the `Dl × 2Dr` reshape of a site tensor.
pub fn right_isometry_residual(t: &DenseTensor) -> f64 {
    let m = t.to_matrix(1);
    let dl = m.nrows();
    (&m * m.transpose() - Matrix::identity(dl, dl)).norm()
}

/// Right-isometric form via LQ sweeps from the last site. The leftover boundary matrix is
/// split by SVD: its singular values become `lambda`, the unitaries go into the first and
/// last tensors.
pub fn right_canonicalize(mps: &MatrixProductState) -> Result<MatrixProductState> {
    let nrm = mps_norm(mps);
    if !(nrm.is_finite() && nrm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut ts = mps.absorbed_tensors();
    let n = ts.len();
    let mut carry: Option<Matrix> = None;
    for i in (0..n).rev() {
        let t = &ts[i];
        let dl = t.dims()[0];
        let m = match &carry {
            None => t.to_matrix(1),
            Some(c) => {
                // fold the carried L into the right leg: (Dl·2, Dr)·(Dr, k)
                let k = c.ncols();
                let folded = t.to_matrix(2) * c;
                Matrix::from_row_slice(dl, 2 * k, &row_major(&folded))
            }
        };
        let k = m.ncols() / 2;
        let (l, q) = lq_decompose(&m);
        ts[i] = DenseTensor::from_matrix(&q, vec![q.nrows(), 2, k])?;
        carry = Some(l);
    }
    let l = carry.expect("at least one site");
    let d = svd(&l);
    let (u, s, vt) = (d.u, d.s, d.vt);
    if u.nrows() != u.ncols() {
        return Err(Error::RankDeficient(format!(
            "closing bond of size {} exceeds the rank {} reachable from the first site",
            u.nrows(),
            u.ncols()
        )));
    }
    if s.first().copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let first = vt * ts[0].to_matrix(1);
    let k0 = ts[0].dims()[2];
    ts[0] = DenseTensor::from_matrix(&first, vec![first.nrows(), 2, k0])?;
    let last = ts[n - 1].to_matrix(2) * &u;
    let dl = ts[n - 1].dims()[0];
    ts[n - 1] = DenseTensor::from_matrix(&last, vec![dl, 2, u.ncols()])?;
    MatrixProductState::new(ts, mps.boundary(), Some(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{fidelity, overlap, Boundary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_state_is_already_canonical() {
        let m = MatrixProductState::product_state(&[0, 0, 0]).unwrap();
        let c = right_canonicalize(&m).unwrap();
        assert_eq!(c.lambda().unwrap(), &[1.0]);
        for (a, b) in c.tensors().iter().zip(m.tensors()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x.abs() - y.abs()).abs() < 1e-15));
        }
    }

    #[test]
    fn ghz_ring_has_flat_lambda() {
        let m = MatrixProductState::ghz(4, Boundary::Pbc).unwrap();
        let c = right_canonicalize(&m).unwrap();
        let l = c.lambda().unwrap();
        assert!((l[0] - 1.0).abs() < 1e-14 && (l[1] - 1.0).abs() < 1e-14);
        for t in c.tensors() {
            assert!(right_isometry_residual(t) < 1e-12);
        }
        assert!((fidelity(&m, &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_chain_keeps_its_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = MatrixProductState::random(6, 4, Boundary::Obc, &mut rng).unwrap();
        let c = right_canonicalize(&m).unwrap();
        let f = overlap(&m, &c).unwrap().abs() / (crate::mps::mps_norm(&m) * crate::mps::mps_norm(&c)).sqrt();
        assert!((f - 1.0).abs() < 1e-10);
        assert_eq!(c.lambda().unwrap().len(), 1);
    }

    #[test]
    fn zero_state_is_rejected() {
        let t = DenseTensor::zeros(vec![1, 2, 1]);
        let m = MatrixProductState::new(vec![t.clone(), t], Boundary::Obc, None).unwrap();
        assert_eq!(right_canonicalize(&m), Err(Error::ZeroNorm));
    }
}
