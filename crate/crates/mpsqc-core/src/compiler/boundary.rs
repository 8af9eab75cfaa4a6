use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mps::{mps_norm, right_canonicalize, Boundary, MatrixProductState};
use crate::tensor::{expm, is_power_of_two, DenseTensor, Matrix};

use super::embed::embed_isometry;
use super::optimizer::{lbfgs, LbfgsConfig};

/// The boundary matrix `Λ = Λ^α Λ^{1−α}` written as two unit vectors on `D²` amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEncoding {
    pub alpha: f64,
    pub v_alpha: Vec<f64>,
    pub v_one_minus_alpha: Vec<f64>,
    pub c_alpha: f64,
    pub c_one_minus_alpha: f64,
    pub success_rate: f64,
}

fn check(lambda: &[f64], alpha: f64) -> Result<()> {
    if !is_power_of_two(lambda.len()) {
        return Err(Error::NotPowerOfTwo { what: "boundary dimension", value: lambda.len() });
    }
    if lambda.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
        return invalid("boundary spectrum must be finite and non-negative");
    }
    if lambda.iter().all(|&s| s == 0.0) {
        return Err(Error::ZeroNorm);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha = {alpha} outside (0, 1)"));
    }
    Ok(())
}

/// `C_x = √(Σ s_i^{2x})`
fn c_of(lambda: &[f64], x: f64) -> f64 {
    lambda.iter().map(|&s| if s == 0.0 { 0.0 } else { s.powf(2.0 * x) }).sum::<f64>().sqrt()
}

fn v_of(lambda: &[f64], x: f64, c: f64) -> Vec<f64> {
    let d = lambda.len();
    let mut v = vec![0.0; d * d];
    for (i, &s) in lambda.iter().enumerate() {
        if s > 0.0 {
            v[i * d + i] = s.powf(x) / c;
        }
    }
    v
}

/// Post-selection probability `norm / (C_α² C_{1−α}²)`, with `state_norm = ⟨ψ|ψ⟩`
/// of the state whose boundary spectrum is `lambda`.
pub fn success_rate(lambda: &[f64], state_norm: f64, alpha: f64) -> Result<f64> {
    check(lambda, alpha)?;
    let (ca, cb) = (c_of(lambda, alpha), c_of(lambda, 1.0 - alpha));
    Ok(state_norm / (ca * ca * cb * cb))
}

pub fn split_bond_matrix(lambda: &[f64], alpha: f64, state_norm: f64) -> Result<BoundaryEncoding> {
    check(lambda, alpha)?;
    let (ca, cb) = (c_of(lambda, alpha), c_of(lambda, 1.0 - alpha));
    Ok(BoundaryEncoding {
        alpha,
        v_alpha: v_of(lambda, alpha, ca),
        v_one_minus_alpha: v_of(lambda, 1.0 - alpha, cb),
        c_alpha: ca,
        c_one_minus_alpha: cb,
        success_rate: state_norm / (ca * ca * cb * cb),
    })
}

/// Orthogonal `D² × D²` matrix with first column `v`.
pub fn build_boundary_unitary(v: &[f64], seed: u64) -> Result<Matrix> {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (nrm - 1.0).abs() > 1e-10 {
        return invalid(format!("boundary vector has norm {nrm}"));
    }
    embed_isometry(&Matrix::from_column_slice(v.len(), 1, v), seed)
}

/// Inserts `G·G⁻¹` on the closing bond, `G = exp(K)` with `K` given row-major, and
/// returns the right-canonical form of the result. The state is unchanged.
fn regauge(mps: &MatrixProductState, k: &[f64]) -> Result<MatrixProductState> {
    let mut ts = mps.absorbed_tensors();
    let n = ts.len();
    let d = ts[0].dims()[0];
    let k = Matrix::from_row_slice(d, d, k);
    let last = ts[n - 1].to_matrix(2) * expm(&k);
    let dl = ts[n - 1].dims()[0];
    ts[n - 1] = DenseTensor::from_matrix(&last, vec![dl, 2, d])?;
    let first = expm(&-k) * ts[0].to_matrix(1);
    let dr = ts[0].dims()[2];
    ts[0] = DenseTensor::from_matrix(&first, vec![d, 2, dr])?;
    right_canonicalize(&MatrixProductState::new(ts, Boundary::Pbc, None)?)
}

fn log_rate(mps: &MatrixProductState, k: &[f64], alpha: f64) -> f64 {
    match regauge(mps, k) {
        Ok(c) => match success_rate(c.lambda().expect("canonical"), mps_norm(&c), alpha) {
            Ok(p) if p > 0.0 => -p.ln(),
            _ => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    }
}

/// Right-canonical form of a ring whose closing-bond gauge maximizes the success rate at
/// `alpha`. The boundary spectrum, and with it the rate, depends on the gauge the ring
/// was handed in; this searches over `G ∈ GL(D)` on the closing bond by L-BFGS with
/// central-difference gradients. Returns the state and its success rate.
pub fn maximize_success_gauge(
    mps: &MatrixProductState,
    alpha: f64,
    max_iters: usize,
) -> Result<(MatrixProductState, f64)> {
    if mps.boundary() != Boundary::Pbc {
        return invalid("gauge search needs a periodic MPS");
    }
    let start = right_canonicalize(mps)?;
    let d = start.tensors()[0].dims()[0];
    let rate = |c: &MatrixProductState| success_rate(c.lambda().expect("canonical"), mps_norm(c), alpha);
    let p0 = rate(&start)?;
    if d == 1 || max_iters == 0 {
        return Ok((start, p0));
    }
    let h = 1e-6;
    let obj = |x: &[f64], g: &mut [f64]| {
        let mut xs = x.to_vec();
        for i in 0..x.len() {
            xs[i] = x[i] + h;
            let fp = log_rate(&start, &xs, alpha);
            xs[i] = x[i] - h;
            let fm = log_rate(&start, &xs, alpha);
            xs[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        log_rate(&start, x, alpha)
    };
    let cfg = LbfgsConfig { max_iters, f_target: f64::NEG_INFINITY, grad_tol: 1e-9, ..Default::default() };
    let m = lbfgs(obj, &vec![0.0; d * d], &cfg);
    let best = regauge(&start, &m.x)?;
    let p = rate(&best)?;
    if p > p0 {
        Ok((best, p))
    } else {
        Ok((start, p0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_spectrum() {
        let e = split_bond_matrix(&[1.0, 0.0, 0.0, 0.0], 0.5, 0.7).unwrap();
        assert_eq!(e.v_alpha[0], 1.0);
        assert!(e.v_alpha[1..].iter().all(|&x| x == 0.0));
        assert_eq!(e.c_alpha, 1.0);
        assert_eq!(e.success_rate, 0.7);
    }

    #[test]
    fn two_level_spectrum_by_hand() {
        let e = split_bond_matrix(&[0.8, 0.6], 0.5, 1.0).unwrap();
        assert!((e.c_alpha - 1.4f64.sqrt()).abs() < 1e-15);
        let want = [0.8f64.sqrt() / 1.4f64.sqrt(), 0.0, 0.0, 0.6f64.sqrt() / 1.4f64.sqrt()];
        for (a, b) in e.v_alpha.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((e.v_alpha[0] - 0.75593).abs() < 1e-5 && (e.v_alpha[3] - 0.65465).abs() < 1e-5);
        let u = build_boundary_unitary(&e.v_alpha, 3).unwrap();
        assert_eq!(u.column(0).iter().cloned().collect::<Vec<_>>(), e.v_alpha);
        assert!((u.transpose() * &u - Matrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn flat_spectrum_rate_is_one_over_d() {
        for d in [2usize, 4, 8] {
            let l = vec![1.0 / (d as f64).sqrt(); d];
            // a normalized state whose boundary spectrum is l has norm Σ s² = 1
            assert!((success_rate(&l, 1.0, 0.5).unwrap() - 1.0 / d as f64).abs() < 1e-14);
        }
        assert_eq!(success_rate(&[1.0], 1.0, 0.5).unwrap(), 1.0);
        assert!(success_rate(&[0.0, 0.0], 1.0, 0.5).is_err());
        assert!(success_rate(&[1.0, 1.0, 1.0], 1.0, 0.5).is_err());
        assert!(success_rate(&[1.0, 1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn ghz_rate_is_half() {
        assert!((success_rate(&[1.0, 1.0], 2.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauge_search_keeps_the_state_and_raises_the_rate() {
        use crate::mps::fidelity;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = MatrixProductState::random(6, 4, Boundary::Pbc, &mut rng).unwrap();
        // skew the closing bond so the starting gauge is poor
        let skew: Vec<f64> = (0..16).map(|i| if i % 5 == 1 { 1.5 } else { 0.0 }).collect();
        let bad = regauge(&m, &skew).unwrap();
        let p_bad = success_rate(bad.lambda().unwrap(), mps_norm(&bad), 0.5).unwrap();
        let (good, p) = maximize_success_gauge(&bad, 0.5, 100).unwrap();
        assert!((fidelity(&good, &m).unwrap() - 1.0).abs() < 1e-10);
        assert!(p > p_bad, "{p} vs {p_bad}");
        let direct = success_rate(good.lambda().unwrap(), mps_norm(&good), 0.5).unwrap();
        assert!((direct - p).abs() < 1e-14 && p <= 1.0);
    }

    #[test]
    fn partial_trace_restores_lambda() {
        let l = [0.9, 0.3, 0.2, 0.1];
        let d = l.len();
        let e = split_bond_matrix(&l, 0.3, 1.0).unwrap();
        let va = build_boundary_unitary(&e.v_alpha, 1).unwrap();
        let vb = build_boundary_unitary(&e.v_one_minus_alpha, 2).unwrap();
        // Tr_A[V_α |0⟩⟨0| V_{1−α}ᵀ] on the second register
        let outer = va.column(0) * vb.column(0).transpose();
        let mut red = Matrix::zeros(d, d);
        for a in 0..d {
            for i in 0..d {
                for j in 0..d {
                    red[(i, j)] += outer[(a * d + i, a * d + j)];
                }
            }
        }
        red *= e.c_alpha * e.c_one_minus_alpha;
        assert!((red - Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&l))).amax() < 1e-12);
    }
}
