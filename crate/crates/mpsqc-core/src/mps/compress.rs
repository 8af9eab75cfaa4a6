use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::tensor::{gemm_strided, pseudo_inverse, svd, DenseTensor, Matrix};

use super::canonical::right_canonicalize;
use super::contract::{close_trace, identity_env, mps_norm, overlap, reversed, row_major, transfer_right};
use super::{Boundary, MatrixProductState};

const PINV_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionReport {
    pub sweeps_run: usize,
    /// Squared distance ‖ψ₀ − ψ‖² after each sweep.
    pub dist_trace: Vec<f64>,
    pub fidelity_trace: Vec<f64>,
    pub final_fidelity: f64,
    /// Local solves whose environment had singular values cut by the pseudo-inverse.
    pub rank_deficient_solves: usize,
}

/// SVD truncation in canonical form. Returns the compressed chain and its fidelity with the input.
pub fn compress_obc(mps: &MatrixProductState, d_target: usize) -> Result<(MatrixProductState, f64)> {
    if mps.boundary() != Boundary::Obc {
        return invalid("compress_obc needs an open chain");
    }
    if d_target == 0 {
        return invalid("d_target must be positive");
    }
    let rc = right_canonicalize(mps)?;
    let ts = rc.tensors();
    let n = ts.len();
    let mut carry = Matrix::from_element(1, 1, rc.lambda().expect("set by canonicalization")[0]);
    let mut out = Vec::with_capacity(n);
    for (i, t) in ts.iter().enumerate() {
        let dr = t.dims()[2];
        // (k, 2·Dr) after absorbing the carry from the left
        let m = &carry * t.to_matrix(1);
        let dl = m.nrows();
        let m = Matrix::from_row_slice(dl * 2, dr, &row_major(&m));
        if i == n - 1 {
            out.push(DenseTensor::from_matrix(&m, vec![dl, 2, dr])?);
            break;
        }
        let d = svd(&m);
        let smax = d.s.first().copied().unwrap_or(0.0);
        let keep = d.s.iter().take(d_target).filter(|&&s| s > 1e-14 * smax).count().max(1);
        let d = d.truncate(keep);
        out.push(DenseTensor::from_matrix(&d.u, vec![dl, 2, keep])?);
        let mut sv = d.vt;
        for (r, s) in d.s.iter().enumerate() {
            sv.row_mut(r).scale_mut(*s);
        }
        carry = sv;
    }
    let c = MatrixProductState::new(out, Boundary::Obc, None)?;
    let f = super::fidelity(mps, &c)?;
    Ok((c, f))
}

/// Truncate every bond of a ring to `d_target` by inserting the projector pair built from
/// the SVD of the two neighbouring tensors. Bonds already at or below `d_target` are kept.
pub fn hosvd_init(mps: &MatrixProductState, d_target: usize) -> Result<MatrixProductState> {
    if mps.boundary() != Boundary::Pbc {
        return invalid("hosvd_init needs a periodic MPS");
    }
    if d_target == 0 {
        return invalid("d_target must be positive");
    }
    let ts = mps.absorbed_tensors();
    let n = ts.len();
    // projector pair (P, Q) on the bond to the right of each site
    let mut pq: Vec<Option<(Matrix, Matrix)>> = Vec::with_capacity(n);
    for i in 0..n {
        let j = (i + 1) % n;
        let (a_t, b_t) = (&ts[i], &ts[j]);
        let bond = a_t.dims()[2];
        if bond <= d_target {
            pq.push(None);
            continue;
        }
        let a = a_t.to_matrix(2);
        let b = b_t.to_matrix(1);
        let d = svd(&(&a * &b));
        let k = d_target.min(d.s.len());
        let d = d.truncate(k);
        let inv = pseudo_inverse(&d.s, PINV_TOL);
        if inv.iter().all(|&x| x == 0.0) {
            return Err(Error::RankDeficient(format!("bond {i}-{j}: all singular values below tolerance")));
        }
        let isq: Vec<f64> = inv.iter().map(|x| x.sqrt()).collect();
        let mut vbar = d.vt.transpose();
        let mut ubar = d.u.clone();
        for (c, s) in isq.iter().enumerate() {
            vbar.column_mut(c).scale_mut(*s);
            ubar.column_mut(c).scale_mut(*s);
        }
        let p = &b * vbar;
        let q = a.transpose() * ubar;
        pq.push(Some((p, q)));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let left = &pq[(i + n - 1) % n];
        let right = &pq[i];
        let mut m = ts[i].to_matrix(1);
        let mut dl = m.nrows();
        if let Some((_, q)) = left {
            m = q.transpose() * m;
            dl = m.nrows();
        }
        let dr0 = ts[i].dims()[2];
        let mut m2 = Matrix::from_row_slice(dl * 2, dr0, &row_major(&m));
        if let Some((p, _)) = right {
            m2 = m2 * p;
        }
        let dr = m2.ncols();
        out.push(DenseTensor::from_matrix(&m2, vec![dl, 2, dr])?);
    }
    MatrixProductState::new(out, Boundary::Pbc, None)
}

/// Grow bonds smaller than `d` with small seeded noise so the local solves can use them.
fn pad_bonds(ts: &mut [DenseTensor], d: usize) -> Result<()> {
    let n = ts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d70_7371);
    for i in 0..n {
        let j = (i + 1) % n;
        let bond = ts[i].dims()[2];
        if bond >= d {
            continue;
        }
        let scale_of = |t: &DenseTensor| 1e-3 * (t.norm() / (t.len() as f64).sqrt()).max(1e-12);
        let (si, sj) = (scale_of(&ts[i]), scale_of(&ts[j]));
        let old = ts[i].clone();
        let (dl, _) = (old.dims()[0], old.dims()[2]);
        let mut a = DenseTensor::zeros(vec![dl, 2, d]);
        for l in 0..dl {
            for s in 0..2 {
                for r in 0..d {
                    let v = if r < bond { old.get(&[l, s, r]) } else { si * rng.sample::<f64, _>(StandardNormal) };
                    a.set(&[l, s, r], v);
                }
            }
        }
        ts[i] = a;
        let old = ts[j].clone();
        let dr = old.dims()[2];
        let mut b = DenseTensor::zeros(vec![d, 2, dr]);
        for l in 0..d {
            for s in 0..2 {
                for r in 0..dr {
                    let v = if l < bond { old.get(&[l, s, r]) } else { sj * rng.sample::<f64, _>(StandardNormal) };
                    b.set(&[l, s, r], v);
                }
            }
        }
        ts[j] = b;
    }
    Ok(())
}

/// `Env[(al,bl),(ar,br)] = Σ_r L[r,(al,bl)]·Rt[r,(ar,br)]`.
fn join_env(l: &[f64], rt: &[f64], rows: usize, left: usize, right: usize) -> Vec<f64> {
    let mut env = vec![0.0; left * right];
    gemm_strided(left, rows, right, l, 1, left, rt, right, 1, &mut env);
    env
}

/// Variational ring compression: alternating least squares over single sites, starting
/// from `hosvd_init`. Each local problem `M_env·A = N_env` is solved with an SVD
/// pseudo-inverse, so the distance never increases.
pub fn compress_pbc(
    target: &MatrixProductState,
    d_target: usize,
    max_sweeps: usize,
    tol: f64,
) -> Result<(MatrixProductState, CompressionReport)> {
    if target.boundary() != Boundary::Pbc {
        return invalid("compress_pbc needs a periodic target");
    }
    let tgt = target.absorbed_tensors();
    let n = tgt.len();
    let mut x = hosvd_init(target, d_target)?.absorbed_tensors();
    pad_bonds(&mut x, d_target)?;
    let tt = mps_norm(target);
    if !(tt > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let dt0 = tgt[0].dims()[0];
    let tgt_rev: Vec<DenseTensor> = tgt.iter().map(reversed).collect();
    let mut report = CompressionReport {
        sweeps_run: 0,
        dist_trace: Vec::new(),
        fidelity_trace: Vec::new(),
        final_fidelity: 0.0,
        rank_deficient_solves: 0,
    };
    for _ in 0..max_sweeps {
        let dx0 = x[0].dims()[0];
        let (rows_xx, rows_tx) = (dx0 * dx0, dt0 * dx0);
        let x_rev: Vec<DenseTensor> = x.iter().map(reversed).collect();
        let mut rt_xx = vec![Vec::new(); n];
        let mut rt_tx = vec![Vec::new(); n];
        rt_xx[n - 1] = identity_env(dx0, dx0);
        rt_tx[n - 1] = identity_env(dt0, dx0);
        for i in (0..n - 1).rev() {
            rt_xx[i] = transfer_right(&rt_xx[i + 1], rows_xx, &x_rev[i + 1], &x_rev[i + 1]);
            rt_tx[i] = transfer_right(&rt_tx[i + 1], rows_tx, &tgt_rev[i + 1], &x_rev[i + 1]);
        }
        let mut l_xx = identity_env(dx0, dx0);
        let mut l_tx = identity_env(dt0, dx0);
        for i in 0..n {
            let (dl, dr) = (x[i].dims()[0], x[i].dims()[2]);
            let (tl, tr) = (tgt[i].dims()[0], tgt[i].dims()[2]);
            let env_xx = join_env(&l_xx, &rt_xx[i], rows_xx, dl * dl, dr * dr);
            let env_tx = join_env(&l_tx, &rt_tx[i], rows_tx, tl * dl, tr * dr);
            let m = dl * dr;
            let mut menv = Matrix::zeros(m, m);
            for al in 0..dl {
                for bl in 0..dl {
                    for ar in 0..dr {
                        for br in 0..dr {
                            let v = env_xx[(al * dl + bl) * dr * dr + ar * dr + br];
                            menv[(al * dr + ar, bl * dr + br)] += 0.5 * v;
                            menv[(bl * dr + br, al * dr + ar)] += 0.5 * v;
                        }
                    }
                }
            }
            let mut nenv = Matrix::zeros(m, 2);
            let td = tgt[i].data();
            for t_l in 0..tl {
                for bl in 0..dl {
                    let row = (t_l * dl + bl) * tr * dr;
                    for t_r in 0..tr {
                        for br in 0..dr {
                            let e = env_tx[row + t_r * dr + br];
                            if e == 0.0 {
                                continue;
                            }
                            for s in 0..2 {
                                nenv[(bl * dr + br, s)] += e * td[(t_l * 2 + s) * tr + t_r];
                            }
                        }
                    }
                }
            }
            let d = svd(&menv);
            let inv = pseudo_inverse(&d.s, PINV_TOL);
            if inv.iter().any(|&v| v == 0.0) {
                report.rank_deficient_solves += 1;
            }
            let mut ut_n = d.u.transpose() * nenv;
            for (r, w) in inv.iter().enumerate() {
                ut_n.row_mut(r).scale_mut(*w);
            }
            let sol = d.vt.transpose() * ut_n;
            let mut new = DenseTensor::zeros(vec![dl, 2, dr]);
            for l in 0..dl {
                for r in 0..dr {
                    for s in 0..2 {
                        new.set(&[l, s, r], sol[(l * dr + r, s)]);
                    }
                }
            }
            x[i] = new;
            l_xx = transfer_right(&l_xx, rows_xx, &x[i], &x[i]);
            l_tx = transfer_right(&l_tx, rows_tx, &tgt[i], &x[i]);
        }
        let pp = close_trace(&l_xx, rows_xx);
        let tp = close_trace(&l_tx, rows_tx);
        let dist = (tt - 2.0 * tp + pp).max(0.0);
        let fid = if pp > 0.0 { (tp * tp / (tt * pp)).min(1.0) } else { 0.0 };
        report.sweeps_run += 1;
        let prev = report.dist_trace.last().copied();
        report.dist_trace.push(dist);
        report.fidelity_trace.push(fid);
        if let Some(p) = prev {
            if (p - dist).abs() < tol {
                break;
            }
        }
    }
    let out = MatrixProductState::new(x, Boundary::Pbc, None)?;
    let ov = overlap(target, &out)?;
    let pp = mps_norm(&out);
    report.final_fidelity = if pp > 0.0 { (ov * ov / (tt * pp)).min(1.0) } else { 0.0 };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{fidelity, from_statevector, to_statevector};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn obc_compression_without_truncation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = MatrixProductState::random(6, 4, Boundary::Obc, &mut rng).unwrap();
        let (_, f) = compress_obc(&m, 8).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obc_compression_matches_dense_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let m = MatrixProductState::random(8, 6, Boundary::Obc, &mut rng).unwrap();
        let (c, f) = compress_obc(&m, 3).unwrap();
        assert!(c.max_bond() <= 3);
        let v = to_statevector(&m).unwrap();
        let oracle = from_statevector(&v, 3).unwrap();
        let fo = fidelity(&m, &oracle).unwrap();
        assert!((f - fo).abs() < 1e-8, "{f} vs {fo}");
    }

    #[test]
    fn hosvd_keeps_ghz_ring() {
        let m = MatrixProductState::ghz(5, Boundary::Pbc).unwrap();
        let h = hosvd_init(&m, 2).unwrap();
        assert!((fidelity(&m, &h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hosvd_exact_at_known_rank() {
        // a D=4 ring written with redundant bond 6: zero-padded tensors
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let small = MatrixProductState::random(6, 4, Boundary::Pbc, &mut rng).unwrap();
        let mut big = Vec::new();
        for t in small.tensors() {
            let mut b = DenseTensor::zeros(vec![6, 2, 6]);
            for l in 0..4 {
                for s in 0..2 {
                    for r in 0..4 {
                        b.set(&[l, s, r], t.get(&[l, s, r]));
                    }
                }
            }
            big.push(b);
        }
        let big = MatrixProductState::new(big, Boundary::Pbc, None).unwrap();
        let h = hosvd_init(&big, 4).unwrap();
        assert!(h.bond_dims().iter().all(|&d| d == 4));
        assert!((fidelity(&small, &h).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn self_compression_recovers_ring() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let m = MatrixProductState::random(6, 4, Boundary::Pbc, &mut rng).unwrap();
        let (_, rep) = compress_pbc(&m, 4, 5, 1e-14).unwrap();
        assert!((rep.final_fidelity - 1.0).abs() < 1e-8);
        assert!(rep.dist_trace[0] < 1e-10 * mps_norm(&m));
    }

    #[test]
    fn ring_compression_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let m = MatrixProductState::random(6, 6, Boundary::Pbc, &mut rng).unwrap();
        let (c, rep) = compress_pbc(&m, 3, 30, 0.0).unwrap();
        assert!(c.bond_dims().iter().all(|&d| d == 3));
        for w in rep.dist_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", rep.dist_trace);
        }
        assert!(rep.final_fidelity > 0.0 && rep.final_fidelity < 1.0);
    }
}
