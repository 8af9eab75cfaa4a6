use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{expm_frechet4, expm_static, Matrix};

use super::circuit::{so4_matrix, SO4_PAIRS};
use super::optimizer::{lbfgs, LbfgsConfig};
use super::so4::so4_log;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Outer optimization steps.
    pub max_iters: usize,
    /// Quasi-Newton iterations inside each step.
    pub inner_iters: usize,
    pub restarts: usize,
    /// First step length of each run.
    pub learning_rate: f64,
    /// Initial skew entries are drawn from `[0, init_scale)`.
    pub init_scale: f64,
    pub history: usize,
    /// Remaining restarts are skipped once the loss is below this.
    pub stop_below: f64,
    /// Fit only the prescribed columns of each gate.
    pub restrict_columns: bool,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            inner_iters: 20,
            restarts: 10,
            learning_rate: 0.1,
            init_scale: 0.1,
            history: 10,
            stop_below: 1e-26,
            restrict_columns: false,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub(crate) fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iters: self.max_iters * self.inner_iters.max(1),
            history: self.history,
            initial_step: self.learning_rate,
            f_target: self.stop_below,
            grad_tol: 1e-15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub n_qubits: usize,
    pub layers: usize,
    /// `params[l][p]` belongs to pair `ladder_pairs(n)[p]` of layer `l`.
    pub params: Vec<Vec<[f64; 6]>>,
    /// `‖(ladder − target)·P‖²_F`, with `P` the column mask (identity unless restricted).
    pub frobenius_distance: f64,
    pub restarts_used: usize,
    /// Loss at each accepted iterate of the winning run.
    pub loss_trace: Vec<f64>,
}

/// Gate order inside one layer: bottom pair first.
pub fn ladder_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n.saturating_sub(1)).rev().map(|q| (q, q + 1)).collect()
}

/// Row-major square matrix of size `2^n`.
#[derive(Clone)]
struct Square {
    n: usize,
    dim: usize,
    a: Vec<f64>,
}

impl Square {
    fn identity(n: usize) -> Self {
        let dim = 1 << n;
        let mut a = vec![0.0; dim * dim];
        (0..dim).for_each(|i| a[i * dim + i] = 1.0);
        Self { n, dim, a }
    }

    /// Row indices of the four states of the pair `(q, q+1)` for every value of the rest.
    fn quads(&self, q: usize) -> impl Iterator<Item = [usize; 4]> + '_ {
        let lo = self.n - 2 - q;
        (0..self.dim >> 2).map(move |rest| {
            let base = ((rest >> lo) << (lo + 2)) | (rest & ((1 << lo) - 1));
            [base, base | (1 << lo), base | (2 << lo), base | (3 << lo)]
        })
    }

    /// `self ← G_embedded · self`
    fn apply(&mut self, q: usize, g: &Matrix4<f64>) {
        let dim = self.dim;
        let quads: Vec<[usize; 4]> = self.quads(q).collect();
        for rows in quads {
            for c in 0..dim {
                let v = rows.map(|r| self.a[r * dim + c]);
                for (i, &r) in rows.iter().enumerate() {
                    self.a[r * dim + c] = g[(i, 0)] * v[0] + g[(i, 1)] * v[1] + g[(i, 2)] * v[2] + g[(i, 3)] * v[3];
                }
            }
        }
    }

    /// `Σ_rest Σ_c r[(a,rest),c] · p[(b,rest),c]`
    fn pair_grad(r: &Square, p: &Square, q: usize) -> Matrix4<f64> {
        let dim = r.dim;
        let mut out = Matrix4::zeros();
        for rows in r.quads(q) {
            for a in 0..4 {
                let ra = &r.a[rows[a] * dim..(rows[a] + 1) * dim];
                for b in 0..4 {
                    let pb = &p.a[rows[b] * dim..(rows[b] + 1) * dim];
                    out[(a, b)] += ra.iter().zip(pb).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        out
    }
}

fn generator(p: &[f64]) -> Matrix4<f64> {
    let mut a = Matrix4::zeros();
    for (&(i, j), &v) in SO4_PAIRS.iter().zip(p) {
        a[(i, j)] = v;
        a[(j, i)] = -v;
    }
    a
}

struct Problem {
    n: usize,
    pairs: Vec<(usize, usize)>,
    target: Square,
    cols: Vec<bool>,
}

impl Problem {
    fn n_gates(&self, x: &[f64]) -> usize {
        x.len() / 6
    }

    fn loss_of(&self, u: &Square) -> f64 {
        let dim = u.dim;
        let mut l = 0.0;
        for r in 0..dim {
            for c in (0..dim).filter(|&c| self.cols[c]) {
                let d = u.a[r * dim + c] - self.target.a[r * dim + c];
                l += d * d;
            }
        }
        l
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.n_gates(x);
        let gens: Vec<Matrix4<f64>> = x.chunks(6).map(generator).collect();
        let gates: Vec<Matrix4<f64>> = gens.iter().map(expm_static).collect();
        let mut prefix = Vec::with_capacity(k);
        let mut u = Square::identity(self.n);
        for j in 0..k {
            prefix.push(u.clone());
            u.apply(self.pairs[j % self.pairs.len()].0, &gates[j]);
        }
        let loss = self.loss_of(&u);
        let dim = u.dim;
        let mut r = u;
        for row in 0..dim {
            for c in 0..dim {
                let i = row * dim + c;
                r.a[i] = if self.cols[c] { 2.0 * (r.a[i] - self.target.a[i]) } else { 0.0 };
            }
        }
        for j in (0..k).rev() {
            let q = self.pairs[j % self.pairs.len()].0;
            let gbar = Square::pair_grad(&r, &prefix[j], q);
            let abar = expm_frechet4(&gens[j].transpose(), &gbar);
            for (t, &(a, b)) in SO4_PAIRS.iter().enumerate() {
                grad[6 * j + t] = abar[(a, b)] - abar[(b, a)];
            }
            r.apply(q, &gates[j].transpose());
        }
        loss
    }
}

/// Product of the ladder gates, first layer applied first.
pub fn ladder_matrix(n: usize, params: &[Vec<[f64; 6]>]) -> Matrix {
    let pairs = ladder_pairs(n);
    let mut u = Matrix::identity(1 << n, 1 << n);
    for layer in params {
        for (&(q, _), p) in pairs.iter().zip(layer) {
            let g = so4_matrix(p);
            let left = Matrix::identity(1 << q, 1 << q);
            let right = Matrix::identity(1 << (n - q - 2), 1 << (n - q - 2));
            u = left.kronecker(&g).kronecker(&right) * u;
        }
    }
    u
}

fn masked_distance(u: &Matrix, t: &Matrix, cols: &[bool]) -> f64 {
    let mut d = 0.0;
    for c in (0..u.ncols()).filter(|&c| cols[c]) {
        d += (u.column(c) - t.column(c)).norm_squared();
    }
    d
}

/// Fits `L` ladder layers of SO(4) gates to an `n`-qubit rotation. `columns` restricts the
/// loss to those columns when `cfg.restrict_columns` is set.
pub fn decompose_multiqubit(
    target: &Matrix,
    layers: usize,
    cfg: &OptimizerConfig,
    columns: Option<&[usize]>,
) -> Result<DecompositionResult> {
    let dim = target.nrows();
    if !target.is_square() || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("target is {:?}", target.shape())));
    }
    let n = dim.trailing_zeros() as usize;
    if !(2..=6).contains(&n) {
        return invalid(format!("ladder decomposition covers 2 to 6 qubits, got {n}"));
    }
    let orth = (target.transpose() * target - Matrix::identity(dim, dim)).amax();
    if orth > 1e-10 {
        return Err(Error::NotOrthogonal(orth));
    }
    let det = target.determinant();
    if (det - 1.0).abs() > 1e-8 {
        return Err(Error::BadDeterminant(det));
    }
    let mut cols = vec![true; dim];
    if cfg.restrict_columns {
        if let Some(list) = columns {
            cols = vec![false; dim];
            for &c in list {
                if c >= dim {
                    return invalid(format!("column {c} outside the gate"));
                }
                cols[c] = true;
            }
        }
    }
    let pairs = ladder_pairs(n);
    let n_params = 6 * layers * pairs.len();
    let finish = |x: &[f64], restarts_used: usize, loss_trace: Vec<f64>| {
        let params: Vec<Vec<[f64; 6]>> = x
            .chunks(6 * pairs.len())
            .map(|layer| layer.chunks(6).map(|p| p.try_into().expect("six entries")).collect())
            .collect();
        let u = ladder_matrix(n, &params);
        DecompositionResult {
            n_qubits: n,
            layers,
            frobenius_distance: masked_distance(&u, target, &cols),
            params,
            restarts_used,
            loss_trace,
        }
    };
    if layers == 0 {
        return Ok(finish(&[], 0, vec![]));
    }
    if n == 2 {
        // one gate is enough; later layers stay at the identity
        if let Ok(p) = so4_log(target) {
            let mut x = vec![0.0; n_params];
            x[..6].copy_from_slice(&p);
            let r = finish(&x, 0, vec![]);
            if r.frobenius_distance < 1e-20 {
                return Ok(r);
            }
        }
    }
    let problem = Problem {
        n,
        pairs: pairs.clone(),
        target: Square { n, dim, a: (0..dim * dim).map(|i| target[(i / dim, i % dim)]).collect() },
        cols: cols.clone(),
    };
    let lcfg = cfg.lbfgs();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut used = 0;
    for restart in 0..cfg.restarts.max(1) {
        used += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
        let x0: Vec<f64> = (0..n_params).map(|_| rng.random::<f64>() * cfg.init_scale).collect();
        let m = lbfgs(|x, g| problem.eval(x, g), &x0, &lcfg);
        if !m.f.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| m.f < b.0) {
            best = Some((m.f, m.x, m.trace));
        }
        if best.as_ref().is_some_and(|b| b.0 < cfg.stop_below) {
            break;
        }
    }
    let (_, x, trace) = best.ok_or_else(|| Error::Numerical("every restart diverged".into()))?;
    Ok(finish(&x, used, trace))
}
