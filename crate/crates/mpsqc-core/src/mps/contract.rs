use crate::error::{invalid, Error, Result};
use crate::tensor::{gemm_rowmajor, gemm_strided, svd, DenseTensor, Matrix};

use super::{Boundary, MatrixProductState};

pub const STATEVECTOR_GUARD: usize = 26;

/// One transfer step applied to a stack of `rows` environments:
/// `Y[r,(a',b')] = Σ_{a,b,s} X[r,(a,b)]·A[a,s,a']·B[b,s,b']`.
pub(crate) fn transfer_right(x: &[f64], rows: usize, a: &DenseTensor, b: &DenseTensor) -> Vec<f64> {
    let (da, dap) = (a.dims()[0], a.dims()[2]);
    let (db, dbp) = (b.dims()[0], b.dims()[2]);
    debug_assert_eq!(x.len(), rows * da * db);
    // T[r,a,(s,b')] = Σ_b X[r,a,b] B[b,(s,b')]
    let mut t = vec![0.0; rows * da * 2 * dbp];
    gemm_rowmajor(rows * da, db, 2 * dbp, x, b.data(), &mut t);
    // Y[r][a',b'] = Σ_{(a,s)} A[(a,s),a'] T[r][(a,s),b']
    let mut y = vec![0.0; rows * dap * dbp];
    let tb = da * 2 * dbp;
    let yb = dap * dbp;
    for r in 0..rows {
        gemm_strided(dap, 2 * da, dbp, a.data(), 1, dap, &t[r * tb..(r + 1) * tb], dbp, 1, &mut y[r * yb..(r + 1) * yb]);
    }
    y
}

/// `t[r,s,l] = t[l,s,r]`: the site seen from the other end of the chain.
pub(crate) fn reversed(t: &DenseTensor) -> DenseTensor {
    t.permute(&[2, 1, 0]).expect("rank-3 site tensor")
}

pub(crate) fn identity_env(da: usize, db: usize) -> Vec<f64> {
    let n = da * db;
    let mut x = vec![0.0; n * n];
    for i in 0..n {
        x[i * n + i] = 1.0;
    }
    x
}

/// Closes the ring: Σ_{a0,b0} X[(a0,b0),(a0,b0)].
pub(crate) fn close_trace(x: &[f64], n: usize) -> f64 {
    (0..n).map(|i| x[i * n + i]).sum()
}

fn overlap_tensors(a: &[DenseTensor], b: &[DenseTensor]) -> f64 {
    let (a0, b0) = (a[0].dims()[0], b[0].dims()[0]);
    let rows = a0 * b0;
    let mut x = identity_env(a0, b0);
    for (ta, tb) in a.iter().zip(b) {
        x = transfer_right(&x, rows, ta, tb);
    }
    close_trace(&x, rows)
}

/// ⟨a|b⟩. Mixed boundaries are fine: an open chain is a ring with a 1×1 closing bond.
pub fn overlap(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::DimensionMismatch(format!("{} vs {} sites", a.n_sites(), b.n_sites())));
    }
    Ok(overlap_tensors(&a.absorbed_tensors(), &b.absorbed_tensors()))
}

/// ⟨ψ|ψ⟩
pub fn mps_norm(m: &MatrixProductState) -> f64 {
    let t = m.absorbed_tensors();
    overlap_tensors(&t, &t)
}

/// ⟨a|b⟩² / (⟨a|a⟩⟨b|b⟩)
pub fn fidelity(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    let ab = overlap(a, b)?;
    let (na, nb) = (mps_norm(a), mps_norm(b));
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((ab * ab / (na * nb)).min(1.0))
}

/// Dense amplitudes, σ₁ most significant.
pub fn to_statevector(m: &MatrixProductState) -> Result<Vec<f64>> {
    let n = m.n_sites();
    if n > STATEVECTOR_GUARD {
        return Err(Error::SizeGuard(format!("{n} sites exceeds the statevector guard of {STATEVECTOR_GUARD}")));
    }
    let ts = m.absorbed_tensors();
    let d0 = ts[0].dims()[0];
    // T[(a0, σ…), a] with the open closing index a0 kept in front.
    let mut t = identity_env(d0, 1);
    let mut rows = d0;
    let mut cur = d0;
    for s in &ts {
        let dr = s.dims()[2];
        let mut next = vec![0.0; rows * 2 * dr];
        gemm_rowmajor(rows, cur, 2 * dr, &t, s.data(), &mut next);
        t = next;
        rows *= 2;
        cur = dr;
    }
    let block = rows / d0;
    let mut out = vec![0.0; block];
    for a0 in 0..d0 {
        for (i, o) in out.iter_mut().enumerate() {
            *o += t[(a0 * block + i) * cur + a0];
        }
    }
    Ok(out)
}

/// Left-to-right SVD sweep over a dense vector, keeping at most `d_max` singular values
/// per cut (exact zeros are dropped).
pub fn from_statevector(v: &[f64], d_max: usize) -> Result<MatrixProductState> {
    if v.len() < 2 || !v.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo { what: "statevector length", value: v.len() });
    }
    if d_max == 0 {
        return invalid("d_max must be positive");
    }
    let n = v.len().trailing_zeros() as usize;
    let mut tensors = Vec::with_capacity(n);
    let mut rem = Matrix::from_row_slice(1, v.len(), v);
    for _ in 0..n - 1 {
        let dl = rem.nrows();
        let rest = rem.ncols() / 2;
        let mat = Matrix::from_row_slice(dl * 2, rest, &row_major(&rem));
        let d = svd(&mat);
        let smax = d.s.first().copied().unwrap_or(0.0);
        let keep = d.s.iter().take(d_max).filter(|&&s| s > 1e-14 * smax).count().max(1);
        let d = d.truncate(keep);
        tensors.push(DenseTensor::from_matrix(&d.u, vec![dl, 2, keep])?);
        let mut sv = d.vt;
        for (i, s) in d.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(*s);
        }
        rem = sv;
    }
    let dl = rem.nrows();
    tensors.push(DenseTensor::new(vec![dl, 2, 1], row_major(&rem))?);
    MatrixProductState::new(tensors, Boundary::Obc, None)
}

pub(crate) fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn product_state_amplitudes() {
        let m = MatrixProductState::product_state(&[0, 1]).unwrap();
        assert_eq!(to_statevector(&m).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert!((mps_norm(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ghz_ring_amplitudes_and_norm() {
        let m = MatrixProductState::ghz(3, Boundary::Pbc).unwrap();
        assert_eq!(to_statevector(&m).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let m4 = MatrixProductState::ghz(4, Boundary::Pbc).unwrap();
        assert!((mps_norm(&m4) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn norm_is_quadratic_in_a_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = MatrixProductState::random(5, 3, Boundary::Pbc, &mut rng).unwrap();
        let n0 = mps_norm(&m);
        m.scale(1.7);
        assert!((mps_norm(&m) - 1.7 * 1.7 * n0).abs() < 1e-10 * n0.abs().max(1.0));
    }

    #[test]
    fn overlap_matches_statevector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (ba, bb) in [(Boundary::Obc, Boundary::Obc), (Boundary::Pbc, Boundary::Pbc), (Boundary::Obc, Boundary::Pbc)] {
            let a = MatrixProductState::random(8, 4, ba, &mut rng).unwrap();
            let b = MatrixProductState::random(8, 3, bb, &mut rng).unwrap();
            let (va, vb) = (to_statevector(&a).unwrap(), to_statevector(&b).unwrap());
            let want = dot(&va, &vb);
            assert!((overlap(&a, &b).unwrap() - want).abs() < 1e-10 * want.abs().max(1.0));
            assert!((mps_norm(&a) - dot(&va, &va)).abs() < 1e-10 * dot(&va, &va));
        }
    }

    #[test]
    fn orthogonal_products_have_zero_overlap() {
        let a = MatrixProductState::product_state(&[0, 0]).unwrap();
        let b = MatrixProductState::product_state(&[0, 1]).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), 0.0);
        assert!(overlap(&a, &MatrixProductState::product_state(&[0, 0, 0]).unwrap()).is_err());
    }

    #[test]
    fn statevector_round_trips() {
        let v = vec![1.0, 0.0, 0.0, 0.0];
        let m = from_statevector(&v, 4).unwrap();
        assert_eq!(m.max_bond(), 1);
        assert_eq!(to_statevector(&m).unwrap(), v);

        let mut ghz = vec![0.0; 16];
        ghz[0] = 1.0;
        ghz[15] = 1.0;
        let m = from_statevector(&ghz, 2).unwrap();
        let back = to_statevector(&m).unwrap();
        assert!(back.iter().zip(&ghz).all(|(a, b)| (a - b).abs() < 1e-14));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..256).map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal)).collect();
        let m = from_statevector(&v, 16).unwrap();
        let back = to_statevector(&m).unwrap();
        let f = dot(&v, &back).powi(2) / (dot(&v, &v) * dot(&back, &back));
        assert!((f - 1.0).abs() < 1e-10);
        assert!(from_statevector(&[1.0, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn statevector_guard() {
        let m = MatrixProductState::product_state(&[0; 27]).unwrap();
        assert!(matches!(to_statevector(&m), Err(Error::SizeGuard(_))));
    }
}
