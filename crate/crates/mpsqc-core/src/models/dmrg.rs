use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mps::{overlap, reversed, row_major, transfer_right, Boundary, MatrixProductState};
use crate::tensor::{gemm_rowmajor, lq_decompose, svd, DenseTensor, Matrix};

use super::ed::lanczos_min;
use super::mpo::{mpo_expectation, mpo_sum, terms_to_mpo, MatrixProductOperator};
use super::{PauliOp, PauliTermSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgConfig {
    pub d_max: usize,
    pub max_sweeps: usize,
    /// Stop once a full sweep changes the energy by less than this.
    pub energy_tol: f64,
    /// Penalty on earlier states; `None` picks 100 × a spectral-width estimate.
    pub ortho_weight: Option<f64>,
    /// Target Σσᶻ, enforced by `charge_weight·(Σσᶻ − q)²`.
    pub sector: Option<i64>,
    pub charge_weight: f64,
    pub seed: u64,
    pub lanczos_tol: f64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            d_max: 40,
            max_sweeps: 30,
            energy_tol: 1e-10,
            ortho_weight: None,
            sector: None,
            charge_weight: 10.0,
            seed: 0,
            lanczos_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub energies: Vec<f64>,
    pub states: Vec<MatrixProductState>,
    pub bond_dim: usize,
    pub sweeps: Vec<usize>,
    /// Energy change over the last sweep, per state.
    pub residuals: Vec<f64>,
    pub ortho_weight: f64,
}

fn charge_penalty(n: usize, q: i64, c: f64) -> PauliTermSet {
    let mut h = super::total_sz_squared(n);
    let q = q as f64;
    h.add(q * q, &[]).unwrap();
    for k in 0..n {
        h.add(-2.0 * q, &[(k, PauliOp::Z)]).unwrap();
    }
    h.scaled(c)
}

fn random_right_canonical(n: usize, d_max: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DenseTensor>> {
    let mut dims = vec![1usize; n + 1];
    for (i, d) in dims.iter_mut().enumerate().take(n).skip(1) {
        let cap = 1usize.checked_shl(i.min(n - i) as u32).unwrap_or(usize::MAX);
        *d = d_max.min(cap);
    }
    let mut ts: Vec<DenseTensor> = (0..n)
        .map(|i| {
            let len = dims[i] * 2 * dims[i + 1];
            let data = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            DenseTensor::new(vec![dims[i], 2, dims[i + 1]], data)
        })
        .collect::<Result<_>>()?;
    for i in (1..n).rev() {
        let d = ts[i].dims().to_vec();
        let (l, q) = lq_decompose(&ts[i].to_matrix(1));
        ts[i] = DenseTensor::from_matrix(&q, vec![q.nrows(), 2, d[2]])?;
        let pd = ts[i - 1].dims().to_vec();
        let m = ts[i - 1].to_matrix(2) * l;
        ts[i - 1] = DenseTensor::from_matrix(&m, vec![pd[0], 2, m.ncols()])?;
    }
    let nrm = ts[0].norm();
    ts[0].scale(1.0 / nrm);
    Ok(ts)
}

struct Sweeper<'a> {
    n: usize,
    h: &'a MatrixProductOperator,
    ts: Vec<DenseTensor>,
    lenv: Vec<Vec<f64>>,
    renv: Vec<Vec<f64>>,
    prev: &'a [Vec<DenseTensor>],
    plenv: Vec<Vec<Vec<f64>>>,
    prenv: Vec<Vec<Vec<f64>>>,
    weight: f64,
    d_max: usize,
    lanczos_tol: f64,
}

impl<'a> Sweeper<'a> {
    fn new(
        h: &'a MatrixProductOperator,
        ts: Vec<DenseTensor>,
        prev: &'a [Vec<DenseTensor>],
        weight: f64,
        cfg: &DmrgConfig,
    ) -> Self {
        let n = ts.len();
        let mut s = Self {
            n,
            h,
            ts,
            lenv: vec![vec![1.0]; n],
            renv: vec![vec![1.0]; n],
            prev,
            plenv: vec![vec![vec![1.0]; n]; prev.len()],
            prenv: vec![vec![vec![1.0]; n]; prev.len()],
            weight,
            d_max: cfg.d_max,
            lanczos_tol: cfg.lanczos_tol,
        };
        for i in (0..n - 1).rev() {
            s.update_right(i);
        }
        s
    }

    fn update_left(&mut self, i: usize) {
        let a = &self.ts[i];
        let c = self.h.apply_site(i, a);
        self.lenv[i + 1] = transfer_right(&self.lenv[i], 1, a, &c);
        for (j, p) in self.prev.iter().enumerate() {
            self.plenv[j][i + 1] = transfer_right(&self.plenv[j][i], 1, &p[i], a);
        }
    }

    /// Environment of the sites right of `i` from the one right of `i + 1`.
    fn update_right(&mut self, i: usize) {
        let a = &self.ts[i + 1];
        let c = self.h.apply_site(i + 1, a);
        self.renv[i] = transfer_right(&self.renv[i + 1], 1, &reversed(a), &reversed(&c));
        for (j, p) in self.prev.iter().enumerate() {
            self.prenv[j][i] = transfer_right(&self.prenv[j][i + 1], 1, &reversed(&p[i + 1]), &reversed(a));
        }
    }

    /// Optimizes sites (i, i+1); returns the local eigenvalue.
    fn step(&mut self, i: usize, right: bool) -> Result<f64> {
        let (w1, w2) = (&self.h.tensors()[i], &self.h.tensors()[i + 1]);
        let (wl, wm, wr) = (w1.dims()[0], w1.dims()[3], w2.dims()[3]);
        let dl = self.ts[i].dims()[0];
        let dr = self.ts[i + 1].dims()[2];
        let l = &self.lenv[i];
        let r = &self.renv[i + 1];

        // LW[(a,s1),(b,t1,w1)] = Σ_w L[a,w,b] W1[w,s1,t1,w1]
        let mut lw = vec![0.0; dl * 2 * dl * 2 * wm];
        for a in 0..dl {
            for w in 0..wl {
                for b in 0..dl {
                    let lv = l[(a * wl + w) * dl + b];
                    if lv == 0.0 {
                        continue;
                    }
                    for s1 in 0..2 {
                        for t1 in 0..2 {
                            for v in 0..wm {
                                let wv = w1.data()[((w * 2 + s1) * 2 + t1) * wm + v];
                                lw[(a * 2 + s1) * (dl * 2 * wm) + (b * 2 + t1) * wm + v] += lv * wv;
                            }
                        }
                    }
                }
            }
        }
        // Rm[b',(w2,a')] = R[a',w2,b']
        let mut rm = vec![0.0; dr * wr * dr];
        for ap in 0..dr {
            for w in 0..wr {
                for bp in 0..dr {
                    rm[bp * (wr * dr) + w * dr + ap] = r[(ap * wr + w) * dr + bp];
                }
            }
        }
        let w2d = w2.data().to_vec();

        let mut phis: Vec<Vec<f64>> = Vec::with_capacity(self.prev.len());
        for (j, p) in self.prev.iter().enumerate() {
            let (pa, pb) = (&p[i], &p[i + 1]);
            let (cl, cr) = (pa.dims()[0], pb.dims()[2]);
            let lp = Matrix::from_row_slice(cl, dl, &self.plenv[j][i]);
            let rp = Matrix::from_row_slice(cr, dr, &self.prenv[j][i + 1]);
            let t = lp.transpose() * pa.to_matrix(1);
            let t = Matrix::from_row_slice(dl * 2, pa.dims()[2], &row_major(&t));
            let u = t * pb.to_matrix(1);
            let u = Matrix::from_row_slice(dl * 4, cr, &row_major(&u));
            phis.push(row_major(&(u * rp)));
        }

        let weight = self.weight;
        let dim = dl * 4 * dr;
        let op = |x: &[f64], y: &mut [f64]| {
            let mut a = vec![0.0; dl * 4 * wr * dr];
            gemm_rowmajor(dl * 4, dr, wr * dr, x, &rm, &mut a);
            // B[(b,t1,w1),(s2,a')] = Σ_{t2,w2} W2[w1,s2,t2,w2] A[b,t1,t2,w2,a']
            let mut bm = vec![0.0; dl * 2 * wm * 2 * dr];
            for b in 0..dl {
                for t1 in 0..2 {
                    for v1 in 0..wm {
                        for s2 in 0..2 {
                            let dst = ((b * 2 + t1) * wm + v1) * 2 * dr + s2 * dr;
                            for t2 in 0..2 {
                                for v2 in 0..wr {
                                    let c = w2d[((v1 * 2 + s2) * 2 + t2) * wr + v2];
                                    if c == 0.0 {
                                        continue;
                                    }
                                    let src = (((b * 2 + t1) * 2 + t2) * wr + v2) * dr;
                                    for k in 0..dr {
                                        bm[dst + k] += c * a[src + k];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            gemm_rowmajor(dl * 2, dl * 2 * wm, 2 * dr, &lw, &bm, y);
            for phi in &phis {
                let ov: f64 = phi.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() * weight;
                y.iter_mut().zip(phi).for_each(|(yy, p)| *yy += ov * p);
            }
        };

        let theta0 = {
            let m = self.ts[i].to_matrix(2) * self.ts[i + 1].to_matrix(1);
            row_major(&m)
        };
        debug_assert_eq!(theta0.len(), dim);
        let (e, theta, _) = lanczos_min(&op, theta0, &[], self.lanczos_tol, 40, 4)?;

        let f = svd(&Matrix::from_row_slice(dl * 2, 2 * dr, &theta));
        let smax = f.s.first().copied().unwrap_or(0.0);
        let keep = f.s.iter().filter(|&&x| x > 1e-13 * smax).count().clamp(1, self.d_max);
        let f = f.truncate(keep);
        let norm = f.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if right {
            self.ts[i] = DenseTensor::from_matrix(&f.u, vec![dl, 2, keep])?;
            let sv = Matrix::from_fn(keep, 2 * dr, |r, c| f.s[r] / norm * f.vt[(r, c)]);
            self.ts[i + 1] = DenseTensor::from_matrix(&sv, vec![keep, 2, dr])?;
            self.update_left(i);
        } else {
            let us = Matrix::from_fn(dl * 2, keep, |r, c| f.u[(r, c)] * f.s[c] / norm);
            self.ts[i] = DenseTensor::from_matrix(&us, vec![dl, 2, keep])?;
            self.ts[i + 1] = DenseTensor::from_matrix(&f.vt, vec![keep, 2, dr])?;
            self.update_right(i);
        }
        Ok(e)
    }

    /// One right pass then one left pass; returns the last local eigenvalue.
    fn sweep(&mut self) -> Result<f64> {
        let mut e = f64::NAN;
        for i in 0..self.n - 1 {
            e = self.step(i, true)?;
        }
        for i in (0..self.n - 1).rev() {
            e = self.step(i, false)?;
        }
        Ok(e)
    }
}

/// Lowest `k` states found one after another; state `j` minimizes `H + w·Σ_{i<j}|ψ_i⟩⟨ψ_i|`
/// by two-site sweeps truncated to `d_max`.
pub fn dmrg_excited_obc(h: &MatrixProductOperator, k: usize, cfg: &DmrgConfig) -> Result<SpectrumResult> {
    let n = h.n_sites();
    if n < 2 {
        return invalid("DMRG needs at least two sites");
    }
    if k == 0 || cfg.d_max == 0 {
        return invalid("k and d_max must be positive");
    }
    let heff = match cfg.sector {
        Some(q) => {
            let pen = terms_to_mpo(&charge_penalty(n, q, cfg.charge_weight), 1e-12)?;
            mpo_sum(h, &pen, 1e-12)?
        }
        None => h.clone(),
    };
    let weight = cfg.ortho_weight.unwrap_or_else(|| {
        let (m1, m2) = h.trace_moments();
        let sigma = (m2 - m1 * m1).max(0.0).sqrt();
        100.0 * (6.0 * sigma).max(1.0)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(0x646d_7267 ^ cfg.seed);
    let mut found: Vec<Vec<DenseTensor>> = Vec::with_capacity(k);
    let mut sweeps = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for _ in 0..k {
        let init = random_right_canonical(n, cfg.d_max, &mut rng)?;
        let mut sw = Sweeper::new(&heff, init, &found, weight, cfg);
        let mut last = f64::INFINITY;
        let mut done = None;
        let mut delta = f64::INFINITY;
        for s in 0..cfg.max_sweeps {
            let e = sw.sweep()?;
            delta = (e - last).abs();
            last = e;
            if s >= 1 && delta < cfg.energy_tol * e.abs().max(1.0) {
                done = Some(s + 1);
                break;
            }
        }
        let Some(ns) = done else {
            return Err(Error::Numerical(format!(
                "DMRG state {} did not converge in {} sweeps (last energy change {delta:.3e})",
                found.len(),
                cfg.max_sweeps
            )));
        };
        sweeps.push(ns);
        residuals.push(delta);
        found.push(sw.ts);
    }
    let mut states: Vec<(f64, MatrixProductState)> = Vec::with_capacity(k);
    for ts in found {
        let m = MatrixProductState::new(ts, Boundary::Obc, None)?;
        states.push((mpo_expectation(&m, h)?, m));
    }
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..k).collect();
        o.sort_by(|&a, &b| states[a].0.total_cmp(&states[b].0));
        o
    };
    let energies = order.iter().map(|&i| states[i].0).collect();
    let sweeps = order.iter().map(|&i| sweeps[i]).collect();
    let residuals = order.iter().map(|&i| residuals[i]).collect();
    let states: Vec<MatrixProductState> = order.iter().map(|&i| states[i].1.clone()).collect();
    Ok(SpectrumResult { energies, states, bond_dim: cfg.d_max, sweeps, residuals, ortho_weight: weight })
}

/// Largest `|⟨ψ_i|ψ_j⟩|` over distinct pairs, states normalized.
pub fn max_pairwise_overlap(states: &[MatrixProductState]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let o = overlap(&states[i], &states[j])?;
            let ni = overlap(&states[i], &states[i])?.sqrt();
            let nj = overlap(&states[j], &states[j])?.sqrt();
            worst = worst.max((o / (ni * nj)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{exact_eigs, heisenberg, schwinger, terms_to_dense};

    #[test]
    fn heisenberg_ground_matches_ed() {
        let h = heisenberg(8, 1.0, Boundary::Obc).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        let cfg = DmrgConfig { d_max: 16, ..Default::default() };
        let r = dmrg_excited_obc(&w, 1, &cfg).unwrap();
        let (e, _) = exact_eigs(&terms_to_dense(&h).unwrap(), 1, None).unwrap();
        assert!((r.energies[0] - e[0]).abs() < 1e-8, "{} vs {}", r.energies[0], e[0]);
    }

    #[test]
    fn schwinger_low_spectrum_matches_ed() {
        let h = schwinger(8, 1.0, 0.3, 0.0).unwrap();
        let w = terms_to_mpo(&h, 1e-12).unwrap();
        let cfg = DmrgConfig { d_max: 16, sector: Some(0), ..Default::default() };
        let r = dmrg_excited_obc(&w, 4, &cfg).unwrap();
        let (e, _) = exact_eigs(&terms_to_dense(&h).unwrap(), 4, Some(0)).unwrap();
        for j in 0..4 {
            assert!((r.energies[j] - e[j]).abs() < 1e-6, "level {j}: {} vs {}", r.energies[j], e[j]);
        }
        assert!(max_pairwise_overlap(&r.states).unwrap() < 1e-6);
    }
}
