use crate::error::{invalid, Error, Result};
use crate::mps::MatrixProductState;
use crate::tensor::{svd, DenseTensor, Matrix};

use super::{PauliTerm, PauliTermSet};

/// Open-boundary MPO; site tensors are `(wl, s, s', wr)` with `W[.., s, s', ..] = ⟨s|W|s'⟩`.
#[derive(Clone, Debug)]
pub struct MatrixProductOperator {
    tensors: Vec<DenseTensor>,
}

impl MatrixProductOperator {
    pub fn new(tensors: Vec<DenseTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return invalid("MPO needs at least one site");
        }
        for (i, t) in tensors.iter().enumerate() {
            let d = t.dims();
            if d.len() != 4 || d[1] != 2 || d[2] != 2 {
                return Err(Error::DimensionMismatch(format!("MPO site {i} has dims {d:?}")));
            }
            if i + 1 < tensors.len() && d[3] != tensors[i + 1].dims()[0] {
                return Err(Error::DimensionMismatch(format!("MPO bond {i}")));
            }
        }
        if tensors[0].dims()[0] != 1 || tensors[tensors.len() - 1].dims()[3] != 1 {
            return invalid("MPO boundary bonds must be 1");
        }
        Ok(Self { tensors })
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    /// Internal bond dimensions (N − 1 of them).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.dims()[3]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn to_dense(&self) -> Result<Matrix> {
        let n = self.n_sites();
        if n > super::DENSE_SITE_GUARD {
            return Err(Error::SizeGuard(format!("dense MPO on {n} sites")));
        }
        // acc[(S, S', w)] with S, S' growing one bit per site
        let mut acc = vec![1.0];
        let mut dim = 1usize;
        for t in &self.tensors {
            let (wl, wr) = (t.dims()[0], t.dims()[3]);
            let nd = dim * 2;
            let mut next = vec![0.0; nd * nd * wr];
            for i in 0..dim {
                for j in 0..dim {
                    for w in 0..wl {
                        let a = acc[(i * dim + j) * wl + w];
                        if a == 0.0 {
                            continue;
                        }
                        for s in 0..2 {
                            for sp in 0..2 {
                                let base = ((w * 2 + s) * 2 + sp) * wr;
                                let row = ((2 * i + s) * nd + 2 * j + sp) * wr;
                                for v in 0..wr {
                                    next[row + v] += a * t.data()[base + v];
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
            dim = nd;
        }
        Ok(Matrix::from_row_slice(dim, dim, &acc))
    }

    /// `C[(w,b), s, (w',b')] = Σ_t W[w,s,t,w'] B[b,t,b']`, the MPO applied to one ket site.
    pub(crate) fn apply_site(&self, i: usize, b: &DenseTensor) -> DenseTensor {
        let w = &self.tensors[i];
        let (wl, wr) = (w.dims()[0], w.dims()[3]);
        let (bl, br) = (b.dims()[0], b.dims()[2]);
        let mut out = DenseTensor::zeros(vec![wl * bl, 2, wr * br]);
        let od = out.data_mut();
        for wi in 0..wl {
            for s in 0..2 {
                for t in 0..2 {
                    for wo in 0..wr {
                        let c = w.data()[((wi * 2 + s) * 2 + t) * wr + wo];
                        if c == 0.0 {
                            continue;
                        }
                        for bi in 0..bl {
                            let src = &b.data()[(bi * 2 + t) * br..(bi * 2 + t + 1) * br];
                            let dst0 = ((wi * bl + bi) * 2 + s) * (wr * br) + wo * br;
                            for (d, x) in od[dst0..dst0 + br].iter_mut().zip(src) {
                                *d += c * x;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn term_mpo(t: &PauliTerm) -> Result<Vec<DenseTensor>> {
    let c = t.real_factor()?;
    let mut ts = Vec::with_capacity(t.ops.len());
    for (k, op) in t.ops.iter().enumerate() {
        let m = op.real_matrix();
        let scale = if k == 0 { c } else { 1.0 };
        let data = vec![m[0][0] * scale, m[0][1] * scale, m[1][0] * scale, m[1][1] * scale];
        ts.push(DenseTensor::new(vec![1, 2, 2, 1], data)?);
    }
    Ok(ts)
}

fn direct_sum(a: &[DenseTensor], b: &[DenseTensor]) -> Vec<DenseTensor> {
    let n = a.len();
    if n == 1 {
        let data = a[0].data().iter().zip(b[0].data()).map(|(x, y)| x + y).collect();
        return vec![DenseTensor::new(vec![1, 2, 2, 1], data).unwrap()];
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (ad, bd) = (a[i].dims(), b[i].dims());
        let (ll, lr) = if i == 0 { (0, 0) } else { (ad[0], bd[0]) };
        let (rl, rr) = if i == n - 1 { (0, 0) } else { (ad[3], bd[3]) };
        let wl = if i == 0 { 1 } else { ll + lr };
        let wr = if i == n - 1 { 1 } else { rl + rr };
        let mut t = DenseTensor::zeros(vec![wl, 2, 2, wr]);
        let mut put = |src: &DenseTensor, loff: usize, roff: usize| {
            let d = src.dims();
            for l in 0..d[0] {
                for p in 0..4 {
                    for r in 0..d[3] {
                        t.data_mut()[((l + loff) * 4 + p) * wr + r + roff] += src.data()[(l * 4 + p) * d[3] + r];
                    }
                }
            }
        };
        put(&a[i], 0, 0);
        put(&b[i], if i == 0 { 0 } else { ad[0] }, if i == n - 1 { 0 } else { ad[3] });
        out.push(t);
    }
    out
}

/// Left QR sweep then right-to-left SVD truncation, dropping singular values ≤ `tol·s_max`.
fn compress_sites(ts: &mut [DenseTensor], tol: f64) {
    let n = ts.len();
    if n < 2 {
        return;
    }
    for i in 0..n - 1 {
        let d = ts[i].dims().to_vec();
        let m = ts[i].to_matrix(3);
        let qr = m.qr();
        let (q, r) = (qr.q(), qr.r());
        let k = q.ncols();
        ts[i] = DenseTensor::from_matrix(&q, vec![d[0], 2, 2, k]).unwrap();
        let dn = ts[i + 1].dims().to_vec();
        let nm = &r * ts[i + 1].to_matrix(1);
        ts[i + 1] = DenseTensor::from_matrix(&nm, vec![k, 2, 2, dn[3]]).unwrap();
    }
    for i in (1..n).rev() {
        let d = ts[i].dims().to_vec();
        let f = svd(&ts[i].to_matrix(1));
        let smax = f.s.first().copied().unwrap_or(0.0);
        let keep = f.s.iter().filter(|&&x| x > tol * smax).count().max(1);
        let f = f.truncate(keep);
        ts[i] = DenseTensor::from_matrix(&f.vt, vec![keep, 2, 2, d[3]]).unwrap();
        let us = Matrix::from_fn(f.u.nrows(), keep, |r, c| f.u[(r, c)] * f.s[c]);
        let dp = ts[i - 1].dims().to_vec();
        let nm = ts[i - 1].to_matrix(3) * us;
        ts[i - 1] = DenseTensor::from_matrix(&nm, vec![dp[0], 2, 2, keep]).unwrap();
    }
}

/// `a + b`, recompressed at relative tolerance `tol`.
pub fn mpo_sum(a: &MatrixProductOperator, b: &MatrixProductOperator, tol: f64) -> Result<MatrixProductOperator> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::DimensionMismatch(format!("{} vs {} sites", a.n_sites(), b.n_sites())));
    }
    let mut s = direct_sum(&a.tensors, &b.tensors);
    compress_sites(&mut s, tol);
    MatrixProductOperator::new(s)
}

impl MatrixProductOperator {
    /// `(Tr W / 2^N, Tr W² / 2^N)`, the infinite-temperature moments.
    pub fn trace_moments(&self) -> (f64, f64) {
        let mut e1 = vec![1.0];
        let mut e2 = vec![1.0];
        for t in &self.tensors {
            let (wl, wr) = (t.dims()[0], t.dims()[3]);
            let d = t.data();
            let at = |w: usize, s: usize, u: usize, v: usize| d[((w * 2 + s) * 2 + u) * wr + v];
            let mut n1 = vec![0.0; wr];
            let mut n2 = vec![0.0; wr * wr];
            for w in 0..wl {
                for v in 0..wr {
                    n1[v] += e1[w] * 0.5 * (at(w, 0, 0, v) + at(w, 1, 1, v));
                }
                for x in 0..wl {
                    let c = e2[w * wl + x];
                    if c == 0.0 {
                        continue;
                    }
                    for v in 0..wr {
                        for y in 0..wr {
                            let mut acc = 0.0;
                            for s in 0..2 {
                                for u in 0..2 {
                                    acc += at(w, s, u, v) * at(x, u, s, y);
                                }
                            }
                            n2[v * wr + y] += 0.5 * c * acc;
                        }
                    }
                }
            }
            e1 = n1;
            e2 = n2;
        }
        (e1[0], e2[0])
    }
}

/// Sum of the term MPOs, recompressed after every addition.
pub fn terms_to_mpo(h: &PauliTermSet, tol: f64) -> Result<MatrixProductOperator> {
    let n = h.n_sites();
    if n == 0 {
        return invalid("empty chain");
    }
    let mut acc: Option<Vec<DenseTensor>> = None;
    for t in h.terms() {
        let tm = term_mpo(t)?;
        acc = Some(match acc {
            None => tm,
            Some(a) => {
                let mut s = direct_sum(&a, &tm);
                compress_sites(&mut s, tol);
                s
            }
        });
    }
    let ts = acc.unwrap_or_else(|| (0..n).map(|_| DenseTensor::zeros(vec![1, 2, 2, 1])).collect());
    MatrixProductOperator::new(ts)
}

/// `⟨ψ|W|ψ⟩ / ⟨ψ|ψ⟩` for either boundary.
pub fn mpo_expectation(mps: &MatrixProductState, mpo: &MatrixProductOperator) -> Result<f64> {
    if mps.n_sites() != mpo.n_sites() {
        return Err(Error::DimensionMismatch(format!("{} vs {} sites", mps.n_sites(), mpo.n_sites())));
    }
    let ket = mps.absorbed_tensors();
    let applied: Vec<DenseTensor> = ket.iter().enumerate().map(|(i, b)| mpo.apply_site(i, b)).collect();
    let wmps = MatrixProductState::new(applied, mps.boundary(), None)?;
    let num = crate::mps::overlap(mps, &wmps)?;
    let den = crate::mps::mps_norm(mps);
    if den <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{heisenberg, schwinger, terms_to_dense};
    use crate::mps::{to_statevector, Boundary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn heisenberg_chain_has_bond_five() {
        let h = heisenberg(8, 1.0, Boundary::Obc).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        assert!(w.max_bond() <= 5, "{:?}", w.bond_dims());
        let d = terms_to_dense(&h).unwrap();
        assert!((w.to_dense().unwrap() - d).amax() < 1e-10);
    }

    #[test]
    fn schwinger_reconstructs() {
        let h = schwinger(10, 1.0, 0.5, 0.0).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        let d = terms_to_dense(&h).unwrap();
        assert!((w.to_dense().unwrap() - d).amax() < 1e-10);
    }

    #[test]
    fn ring_expectation_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = crate::mps::MatrixProductState::random(6, 3, Boundary::Pbc, &mut rng).unwrap();
        let h = heisenberg(6, 0.5, Boundary::Pbc).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        let v = to_statevector(&psi).unwrap();
        let d = terms_to_dense(&h).unwrap();
        assert!((w.to_dense().unwrap() - &d).amax() < 1e-10);
        let dv = nalgebra::DVector::from_vec(v.clone());
        let want = dv.dot(&(&d * &dv)) / dv.dot(&dv);
        let got = mpo_expectation(&psi, &w).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn moments_match_dense_traces() {
        let h = schwinger(6, 0.8, 0.3, 0.1).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        let d = terms_to_dense(&h).unwrap();
        let (m1, m2) = w.trace_moments();
        assert!((m1 - d.trace() / 64.0).abs() < 1e-10);
        assert!((m2 - (&d * &d).trace() / 64.0).abs() < 1e-9);
        let two = mpo_sum(&w, &w, 1e-12).unwrap();
        assert!((two.to_dense().unwrap() - d * 2.0).amax() < 1e-10);
    }

    #[test]
    fn y_pairs_become_real() {
        let mut h = PauliTermSet::new(3);
        h.add(0.7, &[(0, super::super::PauliOp::Y), (2, super::super::PauliOp::Y)]).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        assert!((w.to_dense().unwrap() - terms_to_dense(&h).unwrap()).amax() < 1e-14);
    }
}
