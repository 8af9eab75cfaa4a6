//! Dense statevector execution: gates, post-selection, observables and Trotter quenches.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compiler::{GateOp, QuantumCircuit};
use crate::error::{invalid, Error, Result};
use crate::models::{heisenberg, mpo_expectation, terms_to_mpo, trotter_layer, PauliTermSet, SparseHamiltonian};
use crate::mps::{entanglement_entropy, mps_norm, to_statevector, Boundary, MatrixProductState};
use crate::tensor::Matrix;

pub const STATEVECTOR_QUBIT_GUARD: usize = 26;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Big-endian amplitudes: qubit 0 is the most significant bit of the index.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(&vec![0; n_qubits])
    }

    /// `|b₀ b₁ …⟩`
    pub fn basis(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        if n > STATEVECTOR_QUBIT_GUARD {
            return Err(Error::SizeGuard(format!("{n} qubits (guard {STATEVECTOR_QUBIT_GUARD})")));
        }
        if bits.iter().any(|&b| b > 1) {
            return invalid("basis label must be bits");
        }
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut amps = vec![ZERO; 1 << n];
        amps[idx] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo { what: "amplitude count", value: amps.len() });
        }
        Ok(Self { n_qubits: amps.len().trailing_zeros() as usize, amps })
    }

    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::from_amplitudes(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        self.amps.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.amps.iter_mut().for_each(|a| *a *= c);
    }

    fn positions(&self, qubits: &[usize]) -> Result<Vec<usize>> {
        let mut seen = 0usize;
        let mut out = Vec::with_capacity(qubits.len());
        for &q in qubits {
            if q >= self.n_qubits {
                return invalid(format!("qubit {q} outside 0..{}", self.n_qubits));
            }
            let p = self.n_qubits - 1 - q;
            if seen >> p & 1 == 1 {
                return invalid(format!("qubit {q} listed twice"));
            }
            seen |= 1 << p;
            out.push(p);
        }
        Ok(out)
    }

    /// Applies a `2^k × 2^k` matrix (row-major, complex) to `qubits`, first qubit most significant.
    pub fn apply_matrix(&mut self, qubits: &[usize], m: &[Complex64]) -> Result<()> {
        let pos = self.positions(qubits)?;
        let k = pos.len();
        let dim = 1usize << k;
        if m.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!("{} entries for a {k}-qubit gate", m.len())));
        }
        let offsets: Vec<usize> = (0..dim)
            .map(|j| (0..k).map(|t| ((j >> (k - 1 - t)) & 1) << pos[t]).sum())
            .collect();
        let mut sorted = pos.clone();
        sorted.sort_unstable();
        let mut buf = vec![ZERO; dim];
        for rest in 0..1usize << (self.n_qubits - k) {
            let base = deposit(rest, &sorted);
            for j in 0..dim {
                buf[j] = self.amps[base + offsets[j]];
            }
            for i in 0..dim {
                let row = &m[i * dim..(i + 1) * dim];
                self.amps[base + offsets[i]] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
            }
        }
        Ok(())
    }

    pub fn apply_real_matrix(&mut self, qubits: &[usize], m: &Matrix) -> Result<()> {
        let flat: Vec<Complex64> = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Complex64::new(m[(i, j)], 0.0))
            .collect();
        self.apply_matrix(qubits, &flat)
    }

    pub fn apply_gate(&mut self, g: &GateOp) -> Result<()> {
        g.validate(self.n_qubits)?;
        match g {
            GateOp::Cnot { control, target } => {
                let pc = self.n_qubits - 1 - control;
                let pt = self.n_qubits - 1 - target;
                for i in 0..self.amps.len() {
                    if (i >> pc) & 1 == 1 && (i >> pt) & 1 == 0 {
                        self.amps.swap(i, i | (1 << pt));
                    }
                }
                Ok(())
            }
            GateOp::Mcry { target, controls, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let pt = self.n_qubits - 1 - target;
                let (mut mask, mut want) = (0usize, 0usize);
                for ctl in controls {
                    let p = self.n_qubits - 1 - ctl.qubit;
                    mask |= 1 << p;
                    want |= (ctl.polarity as usize) << p;
                }
                for i in 0..self.amps.len() {
                    if (i >> pt) & 1 == 0 && i & mask == want {
                        let j = i | (1 << pt);
                        let (a, b) = (self.amps[i], self.amps[j]);
                        self.amps[i] = a * c - b * s;
                        self.amps[j] = a * s + b * c;
                    }
                }
                Ok(())
            }
            _ => self.apply_real_matrix(&g.qubits(), &g.matrix()),
        }
    }
}

/// Spreads the bits of `x` over the positions not listed in `holes` (ascending).
fn deposit(mut x: usize, holes: &[usize]) -> usize {
    for &h in holes {
        let low = x & ((1 << h) - 1);
        x = ((x >> h) << (h + 1)) | low;
    }
    x
}

pub fn apply_gate(s: &Statevector, g: &GateOp) -> Result<Statevector> {
    let mut out = s.clone();
    out.apply_gate(g)?;
    Ok(out)
}

/// Runs the gate list from `|init⟩` (all zeros when `None`). Execution is deterministic,
/// so `_seed` only exists for interface symmetry with sampling back ends.
pub fn run_circuit(c: &QuantumCircuit, init: Option<&[u8]>, _seed: u64) -> Result<Statevector> {
    let n = c.n_qubits();
    let mut s = match init {
        Some(bits) => {
            if bits.len() != n {
                return invalid(format!("init label has {} bits for {n} qubits", bits.len()));
            }
            Statevector::basis(bits)?
        }
        None => Statevector::zero(n)?,
    };
    for g in &c.gates {
        s.apply_gate(g)?;
    }
    Ok(s)
}

/// Projects `qubits` onto `outcome`, removes them, and renormalizes the rest.
pub fn post_select(s: &Statevector, qubits: &[usize], outcome: &[u8]) -> Result<(Statevector, f64)> {
    if qubits.len() != outcome.len() {
        return invalid("one outcome bit per selected qubit");
    }
    let pos = s.positions(qubits)?;
    let (mut mask, mut want) = (0usize, 0usize);
    for (&p, &b) in pos.iter().zip(outcome) {
        mask |= 1 << p;
        want |= (b as usize & 1) << p;
    }
    let keep: Vec<usize> = (0..s.n_qubits).rev().filter(|p| mask >> p & 1 == 0).collect();
    let mut out = vec![ZERO; 1 << keep.len()];
    let mut prob = 0.0;
    for (i, a) in s.amps.iter().enumerate() {
        if i & mask != want {
            continue;
        }
        prob += a.norm_sqr();
        let j = keep.iter().fold(0usize, |acc, &p| (acc << 1) | ((i >> p) & 1));
        out[j] = *a;
    }
    let total = s.norm().powi(2);
    let prob = prob / total;
    if prob < 1e-14 {
        return Err(Error::ZeroProbability(prob));
    }
    let mut st = Statevector { n_qubits: keep.len(), amps: out };
    st.normalize()?;
    Ok((st, prob))
}

/// `|⟨a|b⟩|²` after normalizing both.
pub fn fidelity(a: &Statevector, b: &Statevector) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch(format!("{} vs {} qubits", a.n_qubits, b.n_qubits)));
    }
    let ov: Complex64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((ov.norm_sqr() / (na * na * nb * nb)).min(1.0))
}

/// `⟨s|H|s⟩ / ⟨s|s⟩`
pub fn expectation(s: &Statevector, h: &PauliTermSet) -> Result<f64> {
    if h.n_sites() != s.n_qubits {
        return Err(Error::DimensionMismatch(format!("{} sites vs {} qubits", h.n_sites(), s.n_qubits)));
    }
    let mut acc = ZERO;
    for (x, a) in s.amps.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        for t in h.terms() {
            if let Some((y, c)) = t.act(x) {
                acc += s.amps[y].conj() * c * a;
            }
        }
    }
    Ok(acc.re / s.norm().powi(2))
}

pub fn expectation_dense(s: &Statevector, h: &Matrix) -> Result<f64> {
    let d = s.amps.len();
    if h.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!("{:?} operator on {d} amplitudes", h.shape())));
    }
    let mut acc = ZERO;
    for i in 0..d {
        let row: Complex64 = (0..d).map(|j| s.amps[j] * h[(i, j)]).sum();
        acc += s.amps[i].conj() * row;
    }
    Ok(acc.re / s.norm().powi(2))
}

/// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩` through the MPO of `h`.
pub fn mps_expectation(m: &MatrixProductState, h: &PauliTermSet) -> Result<f64> {
    let w = terms_to_mpo(h, 1e-12)?;
    mpo_expectation(m, &w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub fidelity: f64,
    /// Measured probability of the all-zero ancilla outcome (1 without ancillas).
    pub probability: f64,
    /// `⟨ψ|ψ⟩ / norm_factor²` for the target as given.
    pub predicted_probability: f64,
    pub gate_counts: BTreeMap<String, usize>,
}

/// Simulates `c`, post-selects its ancillas on zero and compares with `target`. The predicted
/// probability is only meaningful when `target` is the state the circuit was compiled from.
pub fn verify_circuit(c: &QuantumCircuit, target: &MatrixProductState) -> Result<VerifyReport> {
    c.validate()?;
    if c.n_system != target.n_sites() {
        return Err(Error::DimensionMismatch(format!("{} system qubits vs {} sites", c.n_system, target.n_sites())));
    }
    if c.n_qubits() > STATEVECTOR_QUBIT_GUARD {
        return Err(Error::SizeGuard(format!("{} qubits (guard {STATEVECTOR_QUBIT_GUARD})", c.n_qubits())));
    }
    let ancillas: Vec<usize> = (0..c.n_qubits()).filter(|q| !c.system_qubits.contains(q)).collect();
    if ancillas != {
        let mut p = c.postselect_qubits.clone();
        p.sort_unstable();
        p
    } || c.system_qubits.windows(2).any(|w| w[0] > w[1])
    {
        return invalid("verification needs every ancilla post-selected and system qubits in site order");
    }
    let s = run_circuit(c, None, 0)?;
    let (s, probability) = if c.postselect_qubits.is_empty() {
        (s, 1.0)
    } else {
        post_select(&s, &c.postselect_qubits, &vec![0; c.postselect_qubits.len()])?
    };
    let want = Statevector::from_real(&to_statevector(target)?)?;
    let predicted_probability = if c.postselect_qubits.is_empty() { 1.0 } else { mps_norm(target) / c.norm_factor.powi(2) };
    Ok(VerifyReport {
        fidelity: fidelity(&s, &want)?,
        probability,
        predicted_probability,
        gate_counts: c.counts().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuenchTrace {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub energy: Vec<f64>,
}

impl QuenchTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,entropy,energy\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", self.times[i], self.entropy[i], self.energy[i]));
        }
        out
    }

    pub fn max_entropy(&self) -> f64 {
        self.entropy.iter().cloned().fold(0.0, f64::max)
    }
}

/// Second-order Trotter evolution under the XXZ ring with anisotropy `delta`, recording the
/// half-chain entropy and `⟨H̃⟩` every `record_stride` steps (and at t = 0).
pub fn evolve_quench(init: &Statevector, delta: f64, dt: f64, t_final: f64, record_stride: usize) -> Result<QuenchTrace> {
    let n = init.n_qubits;
    if n % 2 == 1 || n < 4 {
        return invalid("quench needs an even ring with n ≥ 4");
    }
    if !(dt > 0.0) || t_final < 0.0 {
        return invalid("dt must be positive and t_final non-negative");
    }
    let stride = record_stride.max(1);
    let h = SparseHamiltonian::new(&heisenberg(n, delta, Boundary::Pbc)?, None)?;
    let layer: Vec<(Vec<usize>, Vec<Complex64>)> = trotter_layer(n, delta, dt, Boundary::Pbc)?
        .into_iter()
        .map(|g| (vec![g.qubits.0, g.qubits.1], g.matrix.iter().flatten().cloned().collect()))
        .collect();
    let steps = (t_final / dt).round() as usize;
    let mut s = init.clone();
    s.normalize()?;
    let mut trace = QuenchTrace::default();
    let record = |s: &Statevector, t: f64, trace: &mut QuenchTrace| -> Result<()> {
        trace.times.push(t);
        trace.entropy.push(entanglement_entropy(&s.amps, n / 2)?);
        trace.energy.push(h.expectation_full(&s.amps));
        Ok(())
    };
    record(&s, 0.0, &mut trace)?;
    for step in 1..=steps {
        for (q, m) in &layer {
            s.apply_matrix(q, m)?;
        }
        if step % stride == 0 || step == steps {
            record(&s, step as f64 * dt, &mut trace)?;
        }
    }
    Ok(trace)
}
