use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::tensor::Matrix;

use super::sparse::SparseHamiltonian;
use super::{total_sz, PauliTermSet};

/// Basis states (ascending) with the given Σσᶻ, or all of them.
pub fn sector_basis(n: usize, sector: Option<i64>) -> Vec<usize> {
    (0..1usize << n).filter(|&x| sector.is_none_or(|s| total_sz(x, n) == s)).collect()
}

fn sorted_eigen(m: Matrix) -> (Vec<f64>, Matrix) {
    let e = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]).then(a.cmp(&b)));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = Matrix::from_fn(e.eigenvectors.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Fix the sign of an eigenvector: its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `k` lowest eigenpairs of a dense Hamiltonian, optionally inside one Σσᶻ sector.
/// Eigenvectors are returned in the full `2^n` space.
pub fn exact_eigs(h: &Matrix, k: usize, sector: Option<i64>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = h.nrows();
    if !h.is_square() || !dim.is_power_of_two() {
        return invalid("Hamiltonian must be square with a power-of-two dimension");
    }
    let n = dim.trailing_zeros() as usize;
    let basis = sector_basis(n, sector);
    if k > basis.len() {
        return invalid(format!("asked for {k} states but the sector has {}", basis.len()));
    }
    let sub = Matrix::from_fn(basis.len(), basis.len(), |i, j| h[(basis[i], basis[j])]);
    let (vals, vecs) = sorted_eigen(sub);
    let mut states = Vec::with_capacity(k);
    for c in 0..k {
        let mut v = vec![0.0; dim];
        for (i, &b) in basis.iter().enumerate() {
            v[b] = vecs[(i, c)];
        }
        fix_sign(&mut v);
        states.push(v);
    }
    Ok((vals[..k].to_vec(), states))
}

/// Above this sector dimension, eigenpairs come from Lanczos instead of a dense solve.
pub const DENSE_EIG_LIMIT: usize = 2500;

/// `k` lowest eigenpairs straight from the operator strings, full-space vectors.
pub fn lowest_eigs(h: &PauliTermSet, k: usize, sector: Option<i64>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let sp = SparseHamiltonian::new(h, sector)?;
    if k > sp.dim() {
        return invalid(format!("asked for {k} states but the sector has {}", sp.dim()));
    }
    let (vals, vecs): (Vec<f64>, Vec<Vec<f64>>) = if sp.dim() <= DENSE_EIG_LIMIT {
        let (vals, m) = sorted_eigen(sp.to_dense());
        (vals[..k].to_vec(), (0..k).map(|c| m.column(c).iter().cloned().collect()).collect())
    } else {
        let mut found: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut vals = Vec::with_capacity(k);
        for j in 0..k {
            let (e, v) = lanczos_ground(|x, y| sp.matvec(x, y), sp.dim(), &found, 1e-10, j as u64)?;
            vals.push(e);
            found.push(v);
        }
        (vals, found)
    };
    let states = vecs
        .iter()
        .map(|v| {
            let mut full = sp.embed(v);
            fix_sign(&mut full);
            full
        })
        .collect();
    Ok((vals, states))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let p = dot(u, w);
        w.iter_mut().zip(u).for_each(|(x, a)| *x -= p * a);
    }
}

/// Lowest eigenpair of a symmetric operator in the complement of `deflate`, by restarted
/// Lanczos with full reorthogonalization. `tol` bounds the residual ‖Hv − θv‖ relative to max(|θ|, 1).
pub fn lanczos_ground<F: Fn(&[f64], &mut [f64])>(
    op: F,
    dim: usize,
    deflate: &[Vec<f64>],
    tol: f64,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_0500 ^ seed);
    let start: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let (theta, x, res) = lanczos_min(&op, start, deflate, tol, 150, 200)?;
    if res > tol * theta.abs().max(1.0) {
        return Err(Error::Numerical(format!("Lanczos did not converge (residual {res:.3e})")));
    }
    Ok((theta, x))
}

/// Restarted Lanczos from `start`; returns the Ritz pair and its residual norm even when
/// the restart budget runs out before `tol` is met.
pub(crate) fn lanczos_min<F: Fn(&[f64], &mut [f64])>(
    op: &F,
    mut start: Vec<f64>,
    deflate: &[Vec<f64>],
    tol: f64,
    krylov: usize,
    restarts: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    let dim = start.len();
    let m_max = dim.saturating_sub(deflate.len()).clamp(1, krylov);
    let mut w = vec![0.0; dim];
    let mut best = (f64::NAN, Vec::new(), f64::INFINITY);
    for _ in 0..restarts.max(1) {
        orthogonalize(&mut start, deflate);
        orthogonalize(&mut start, deflate);
        let nrm = dot(&start, &start).sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Numerical("Lanczos start vector vanished after deflation".into()));
        }
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / nrm).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            op(&basis[j], &mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                orthogonalize(&mut w, deflate);
                orthogonalize(&mut w, &basis);
            }
            let b = dot(&w, &w).sqrt();
            beta.push(b);
            if basis.len() >= m_max || b < 1e-13 * a.abs().max(1.0) {
                break;
            }
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let t = Matrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let (_, vecs) = sorted_eigen(t);
        let y = vecs.column(0);
        let mut x = vec![0.0; dim];
        for (c, b) in basis.iter().enumerate() {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += y[c] * bi);
        }
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        op(&x, &mut w);
        let theta = dot(&x, &w);
        let res = w.iter().zip(&x).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
        best = (theta, x.clone(), res);
        if res <= tol * theta.abs().max(1.0) {
            break;
        }
        start = x;
    }
    Ok(best)
}
