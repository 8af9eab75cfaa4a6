use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mps::{to_statevector, Boundary, MatrixProductState};
use crate::tensor::{expm_frechet4, expm_static};

use super::circuit::{GateOp, SO4_PAIRS};
use super::optimizer::lbfgs;
use super::OptimizerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisentanglerLayout {
    /// Bottom pair first; rings append the wrap-around pair `(N−1, 0)` last.
    Ladder,
    /// Even pairs, then odd pairs (and the wrap-around pair on rings).
    BrickWall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisentangleConfig {
    pub optimizer: OptimizerConfig,
    pub layout: DisentanglerLayout,
}

impl Default for DisentangleConfig {
    fn default() -> Self {
        Self { optimizer: OptimizerConfig { restarts: 1, ..Default::default() }, layout: DisentanglerLayout::Ladder }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisentangleResult {
    pub pairs: Vec<(usize, usize)>,
    /// Parameters of the deepest ladder, one block of six per gate in application order.
    pub params: Vec<[f64; 6]>,
    /// `fidelities[l]` is the best `|⟨compressed|G_l|original⟩|²` with `l` layers.
    pub fidelities: Vec<f64>,
}

impl DisentangleResult {
    /// Gates `G` with `G|original⟩ ≈ |compressed⟩`.
    pub fn gates(&self) -> Vec<GateOp> {
        let per = self.pairs.len();
        self.params
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let (a, b) = self.pairs[j % per];
                GateOp::So4 { qubits: [a, b], params: *p }
            })
            .collect()
    }

    /// `G†`, which carries the compressed state back towards the original.
    pub fn inverse_gates(&self) -> Vec<GateOp> {
        self.gates().iter().rev().map(GateOp::inverse).collect()
    }
}

pub fn layer_pairs(n: usize, boundary: Boundary, layout: DisentanglerLayout) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = match layout {
        DisentanglerLayout::Ladder => (0..n.saturating_sub(1)).rev().map(|q| (q, q + 1)).collect(),
        DisentanglerLayout::BrickWall => {
            let even = (0..n.saturating_sub(1)).step_by(2).map(|q| (q, q + 1));
            let odd = (1..n.saturating_sub(1)).step_by(2).map(|q| (q, q + 1));
            even.chain(odd).collect()
        }
    };
    if boundary == Boundary::Pbc && n > 2 {
        pairs.push((n - 1, 0));
    }
    pairs
}

fn generator(p: &[f64]) -> Matrix4<f64> {
    let mut a = Matrix4::zeros();
    for (&(i, j), &v) in SO4_PAIRS.iter().zip(p) {
        a[(i, j)] = v;
        a[(j, i)] = -v;
    }
    a
}

/// Amplitude indices of the four states of qubits `(a, b)`, `a` most significant.
fn quads(n: usize, a: usize, b: usize) -> Vec<[usize; 4]> {
    let (pa, pb) = (n - 1 - a, n - 1 - b);
    let (lo, hi) = (pa.min(pb), pa.max(pb));
    (0..1usize << (n - 2))
        .map(|rest| {
            let x = ((rest >> lo) << (lo + 1)) | (rest & ((1 << lo) - 1));
            let base = ((x >> hi) << (hi + 1)) | (x & ((1 << hi) - 1));
            [base, base | (1 << pb), base | (1 << pa), base | (1 << pa) | (1 << pb)]
        })
        .collect()
}

fn apply(v: &mut [f64], quads: &[[usize; 4]], g: &Matrix4<f64>) {
    for idx in quads {
        let x = idx.map(|i| v[i]);
        for (r, &i) in idx.iter().enumerate() {
            v[i] = g[(r, 0)] * x[0] + g[(r, 1)] * x[1] + g[(r, 2)] * x[2] + g[(r, 3)] * x[3];
        }
    }
}

struct Objective {
    psi: Vec<f64>,
    phi: Vec<f64>,
    quads: Vec<Vec<[usize; 4]>>,
}

impl Objective {
    /// `1 − ⟨φ|G|ψ⟩²` and its gradient.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let per = self.quads.len();
        let gens: Vec<Matrix4<f64>> = x.chunks(6).map(generator).collect();
        let gates: Vec<Matrix4<f64>> = gens.iter().map(expm_static).collect();
        let mut fwd = self.psi.clone();
        for (j, g) in gates.iter().enumerate() {
            apply(&mut fwd, &self.quads[j % per], g);
        }
        let o: f64 = fwd.iter().zip(&self.phi).map(|(a, b)| a * b).sum();
        let mut lam = self.phi.clone();
        for j in (0..gates.len()).rev() {
            let q = &self.quads[j % per];
            let gt = gates[j].transpose();
            apply(&mut fwd, q, &gt);
            let mut gbar = Matrix4::zeros();
            for idx in q {
                for a in 0..4 {
                    let l = lam[idx[a]];
                    if l == 0.0 {
                        continue;
                    }
                    for b in 0..4 {
                        gbar[(a, b)] += l * fwd[idx[b]];
                    }
                }
            }
            gbar *= -2.0 * o;
            let abar = expm_frechet4(&gens[j].transpose(), &gbar);
            for (t, &(a, b)) in SO4_PAIRS.iter().enumerate() {
                grad[6 * j + t] = abar[(a, b)] - abar[(b, a)];
            }
            apply(&mut lam, q, &gt);
        }
        1.0 - o * o
    }
}

fn normalized(m: &MatrixProductState) -> Result<Vec<f64>> {
    let mut v = to_statevector(m)?;
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(crate::error::Error::ZeroNorm);
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

/// Layer-by-layer optimization of `G` maximizing `|⟨compressed|G|original⟩|²`. Layer `l`
/// starts from the optimum of `l − 1` with the new layer at the identity; further restarts
/// draw all parameters afresh.
pub fn optimize_disentanglers(
    original: &MatrixProductState,
    compressed: &MatrixProductState,
    layers: usize,
    cfg: &DisentangleConfig,
) -> Result<DisentangleResult> {
    let n = original.n_sites();
    if compressed.n_sites() != n {
        return invalid("original and compressed states differ in length");
    }
    if n < 2 {
        return invalid("disentanglers need at least two sites");
    }
    let boundary = if original.boundary() == Boundary::Pbc || compressed.boundary() == Boundary::Pbc {
        Boundary::Pbc
    } else {
        Boundary::Obc
    };
    let pairs = layer_pairs(n, boundary, cfg.layout);
    let obj = Objective {
        psi: normalized(original)?,
        phi: normalized(compressed)?,
        quads: pairs.iter().map(|&(a, b)| quads(n, a, b)).collect(),
    };
    let per = pairs.len() * 6;
    let mut x: Vec<f64> = Vec::new();
    let mut scratch = vec![];
    let mut fids = vec![1.0 - obj.eval(&x, &mut scratch)];
    let lcfg = cfg.optimizer.lbfgs();
    for l in 1..=layers {
        let mut start = x.clone();
        start.extend(std::iter::repeat_n(0.0, per));
        let mut best = lbfgs(|p, g| obj.eval(p, g), &start, &lcfg);
        for restart in 1..cfg.optimizer.restarts {
            let seed = cfg.optimizer.seed.wrapping_add((l * 1000 + restart) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0: Vec<f64> = (0..per * l).map(|_| rng.random::<f64>() * cfg.optimizer.init_scale).collect();
            let m = lbfgs(|p, g| obj.eval(p, g), &x0, &lcfg);
            if m.f < best.f {
                best = m;
            }
        }
        x = best.x;
        fids.push(1.0 - best.f);
    }
    Ok(DisentangleResult { pairs, params: x.chunks(6).map(|c| c.try_into().expect("six")).collect(), fidelities: fids })
}
