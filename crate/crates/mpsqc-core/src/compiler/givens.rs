use crate::error::{invalid, Error, Result};
use crate::tensor::log2_exact;

use super::circuit::{Control, GateOp};

/// Reflected Gray code of `i` on `n_bits` bits, most significant first.
pub fn gray_code(i: usize, n_bits: usize) -> Result<Vec<u8>> {
    if n_bits < usize::BITS as usize && i >> n_bits != 0 {
        return invalid(format!("{i} does not fit in {n_bits} bits"));
    }
    let g = i ^ (i >> 1);
    Ok((0..n_bits).map(|k| ((g >> (n_bits - 1 - k)) & 1) as u8).collect())
}

pub fn binary_from_gray(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bits.len());
    let mut prev = 0u8;
    for &g in bits {
        prev ^= g & 1;
        out.push(prev);
    }
    out
}

/// Circuit taking `|0⟩^{2n}` to `Σ_i s̃_i |i⟩|i⟩` on `qubits` (first `n` hold the left copy).
pub fn givens_gray_synthesize_on(s_tilde: &[f64], qubits: &[usize]) -> Result<Vec<GateOp>> {
    let d = s_tilde.len();
    let n = log2_exact(d, "Givens input length")?;
    if qubits.len() != 2 * n {
        return invalid(format!("{} qubits supplied for a {}-qubit preparation", qubits.len(), 2 * n));
    }
    if s_tilde.iter().any(|&x| !(x >= 0.0)) {
        return invalid("Givens input must be non-negative");
    }
    let nrm = s_tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if (nrm - 1.0).abs() > 1e-10 {
        return invalid(format!("Givens input has norm {nrm}"));
    }
    // zero entries k = D−1, …, 1 against their predecessor; w[k−1] carries the norm upwards
    let mut w = s_tilde.to_vec();
    let mut theta = vec![0.0; d];
    for k in (1..d).rev() {
        let (a, b) = (w[k - 1], w[k]);
        let t = if a == 0.0 { -std::f64::consts::PI * sign(b) } else { -2.0 * (b / a).atan() };
        let (s, c) = (t / 2.0).sin_cos();
        w[k - 1] = c * a - s * b;
        w[k] = 0.0;
        theta[k] = t;
    }
    if w[0] < 0.0 && d > 1 {
        theta[1] += 2.0 * std::f64::consts::PI;
    }
    let mut gates = Vec::with_capacity(d - 1 + 2 * n);
    for k in 1..d {
        let (g0, g1) = (k - 1 ^ ((k - 1) >> 1), k ^ (k >> 1));
        let flip = g0 ^ g1;
        let pos = flip.trailing_zeros() as usize;
        let target = n - 1 - pos;
        let controls = (0..n)
            .filter(|&q| q != target)
            .map(|q| Control { qubit: qubits[q], polarity: ((g1 >> (n - 1 - q)) & 1) as u8 })
            .collect();
        // the reduction rotated (g0, g1) by θ; preparation applies the transpose
        let forward = g0 & flip == 0;
        let angle = if forward { -theta[k] } else { theta[k] };
        gates.push(GateOp::Mcry { target: qubits[target], controls, theta: angle });
    }
    for i in 1..n {
        gates.push(GateOp::Cnot { control: qubits[i - 1], target: qubits[i] });
    }
    for i in 0..n {
        gates.push(GateOp::Cnot { control: qubits[i], target: qubits[n + i] });
    }
    Ok(gates)
}

pub fn givens_gray_synthesize(s_tilde: &[f64]) -> Result<Vec<GateOp>> {
    let n = log2_exact(s_tilde.len(), "Givens input length")?;
    givens_gray_synthesize_on(s_tilde, &(0..2 * n).collect::<Vec<_>>())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Rewrites a multi-controlled RY as RY and CNOT gates through a Gray-ordered uniformly
/// controlled rotation (2^k rotations and 2^k CNOTs for k controls).
pub fn lower_mcry(g: &GateOp) -> Result<Vec<GateOp>> {
    let GateOp::Mcry { target, controls, theta } = g else {
        return invalid("only MCRY gates are lowered");
    };
    let k = controls.len();
    if k == 0 {
        return Ok(vec![GateOp::Ry { qubit: *target, theta: *theta }]);
    }
    if k > 16 {
        return invalid("too many controls to lower");
    }
    let fire = controls.iter().fold(0usize, |acc, c| (acc << 1) | c.polarity as usize);
    let count = 1usize << k;
    let scale = 1.0 / count as f64;
    let mut out = Vec::with_capacity(2 * count);
    for i in 0..count {
        let gi = i ^ (i >> 1);
        let parity = (fire & gi).count_ones() % 2;
        let a = if parity == 0 { theta * scale } else { -theta * scale };
        out.push(GateOp::Ry { qubit: *target, theta: a });
        let next = (i + 1) % count;
        let changed = gi ^ (next ^ (next >> 1));
        let pos = changed.trailing_zeros() as usize;
        out.push(GateOp::Cnot { control: controls[k - 1 - pos].qubit, target: *target });
    }
    Ok(out)
}
