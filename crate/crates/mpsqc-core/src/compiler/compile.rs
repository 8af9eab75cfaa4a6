use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mps::{mps_norm, right_canonicalize, Boundary, MatrixProductState};
use crate::tensor::{log2_exact, Matrix};

use super::boundary::{build_boundary_unitary, split_bond_matrix, BoundaryEncoding};
use super::circuit::{GateOp, QuantumCircuit};
use super::embed::{fix_determinants, site_gates, SiteGate};
use super::givens::givens_gray_synthesize_on;
use super::ladder::{decompose_multiqubit, ladder_matrix, ladder_pairs, OptimizerConfig};
use super::so4::{so4_log, so4_to_native};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileOptions {
    /// Ladder depth for gates on three or more qubits; `None` keeps them dense.
    pub layers: Option<usize>,
    /// Expand SO(4) gates into RY and CNOT, and boundary vectors into Givens circuits.
    pub native: bool,
    pub alpha: f64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { layers: None, native: false, alpha: 0.5, seed: 0, optimizer: OptimizerConfig::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Compilation {
    pub circuit: QuantumCircuit,
    /// Staircase gates as realized in the circuit (after any ladder fit).
    pub site_gates: Vec<SiteGate>,
    /// Squared Frobenius error of each realized site gate (over the fitted columns).
    pub site_distances: Vec<f64>,
    pub boundary: Option<BoundaryEncoding>,
    /// Boundary spectrum of the right-canonical form.
    pub lambda: Vec<f64>,
    pub success_rate: f64,
    pub boundary_kind: Boundary,
}

impl Compilation {
    /// The state the circuit prepares (before normalization), rebuilt from the realized gates.
    pub fn realized_mps(&self) -> Result<MatrixProductState> {
        let ts = self.site_gates.iter().map(SiteGate::tensor).collect();
        let lambda = match self.boundary_kind {
            Boundary::Obc => None,
            Boundary::Pbc => Some(self.lambda.clone()),
        };
        let mut m = MatrixProductState::new(ts, self.boundary_kind, lambda)?;
        m.scale(self.circuit.global_sign);
        Ok(m)
    }
}

fn ry_angle(u: &Matrix) -> f64 {
    2.0 * u[(1, 0)].atan2(u[(0, 0)])
}

/// Gates realizing one staircase gate, the matrix they implement, and the fit error.
fn emit_site(g: &SiteGate, opts: &CompileOptions, seed: u64) -> Result<(Vec<GateOp>, Matrix, f64)> {
    let u = &g.matrix;
    let q = &g.qubits;
    match g.n_qubits() {
        1 => {
            let theta = ry_angle(u);
            let gate = GateOp::Ry { qubit: q[0], theta };
            let m = gate.matrix();
            let d = (&m - u).norm_squared();
            Ok((vec![gate], m, d))
        }
        2 if opts.layers.is_some() || opts.native => {
            let p = so4_log(u)?;
            let gate = GateOp::So4 { qubits: [q[0], q[1]], params: p };
            let m = gate.matrix();
            let d = (&m - u).norm_squared();
            let ops = if opts.native { so4_to_native(&gate)? } else { vec![gate] };
            Ok((ops, m, d))
        }
        n if n >= 3 && opts.layers.is_some() => {
            let layers = opts.layers.expect("checked");
            let cfg = OptimizerConfig { seed, ..opts.optimizer.clone() };
            let r = decompose_multiqubit(u, layers, &cfg, Some(&g.prescribed))?;
            let m = ladder_matrix(n, &r.params);
            let pairs = ladder_pairs(n);
            let mut ops = Vec::new();
            for layer in &r.params {
                for (&(a, b), p) in pairs.iter().zip(layer) {
                    let gate = GateOp::So4 { qubits: [q[a], q[b]], params: *p };
                    if opts.native {
                        ops.extend(so4_to_native(&gate)?);
                    } else {
                        ops.push(gate);
                    }
                }
            }
            Ok((ops, m, r.frobenius_distance))
        }
        _ => Ok((vec![GateOp::Dense { qubits: q.clone(), matrix: u.clone() }], u.clone(), 0.0)),
    }
}

fn staircase(
    c: &MatrixProductState,
    offset: usize,
    opts: &CompileOptions,
) -> Result<(Vec<GateOp>, Vec<SiteGate>, Vec<f64>, f64)> {
    let mut gates = site_gates(c, offset, opts.seed)?;
    let sign = fix_determinants(&mut gates)?;
    let mut ops = Vec::new();
    let mut dists = Vec::with_capacity(gates.len());
    for (i, g) in gates.iter_mut().enumerate() {
        let seed = opts.optimizer.seed.wrapping_add(7919 * i as u64);
        let (o, m, d) = emit_site(g, opts, seed)?;
        ops.extend(o);
        g.matrix = m;
        dists.push(d);
    }
    Ok((ops, gates, dists, sign))
}

pub fn compile_obc(mps: &MatrixProductState, opts: &CompileOptions) -> Result<Compilation> {
    if mps.boundary() != Boundary::Obc {
        return invalid("compile_obc needs an open chain");
    }
    let c = right_canonicalize(mps)?;
    let (gates, site_gates, site_distances, sign) = staircase(&c, 0, opts)?;
    let n = c.n_sites();
    let circuit = QuantumCircuit {
        n_system: n,
        n_ancilla: 0,
        gates,
        postselect_qubits: vec![],
        norm_factor: 1.0,
        global_sign: sign,
        system_qubits: (0..n).collect(),
    };
    circuit.validate()?;
    Ok(Compilation {
        circuit,
        site_gates,
        site_distances,
        boundary: None,
        lambda: c.lambda().map(|l| l.to_vec()).unwrap_or_else(|| vec![1.0]),
        success_rate: 1.0,
        boundary_kind: Boundary::Obc,
    })
}

fn boundary_gate(v: &[f64], qubits: &[usize], native: bool, seed: u64) -> Result<Vec<GateOp>> {
    if native {
        let d = (v.len() as f64).sqrt().round() as usize;
        let s: Vec<f64> = (0..d).map(|i| v[i * d + i]).collect();
        return givens_gray_synthesize_on(&s, qubits);
    }
    let mut u = build_boundary_unitary(v, seed)?;
    if u.determinant() < 0.0 {
        let last = u.ncols() - 1;
        u.column_mut(last).neg_mut();
    }
    Ok(vec![GateOp::Dense { qubits: qubits.to_vec(), matrix: u }])
}

/// Ring compilation: `V_α` on ancillas `0..m` and the first bond register, the staircase on
/// qubits `m..m+N`, then `V_{1−α}ᵀ` on ancillas `0..m` and the last bond register
/// `N+m..N+2m`. Post-selecting all `2m` ancillas on 0 leaves `ψ / (C_α C_{1−α})`.
pub fn compile_pbc(mps: &MatrixProductState, opts: &CompileOptions) -> Result<Compilation> {
    if mps.boundary() != Boundary::Pbc {
        return invalid("compile_pbc needs a ring");
    }
    let c = right_canonicalize(mps)?;
    let lambda = c.lambda().expect("canonical form carries lambda").to_vec();
    let n = c.n_sites();
    let m = log2_exact(lambda.len(), "boundary bond")?;
    let enc = split_bond_matrix(&lambda, opts.alpha, mps_norm(&c))?;
    let (stair, site_gates, site_distances, sign) = staircase(&c, m, opts)?;
    let mut gates = Vec::new();
    if m > 0 {
        let front: Vec<usize> = (0..2 * m).collect();
        gates.extend(boundary_gate(&enc.v_alpha, &front, opts.native, opts.seed.wrapping_add(1_000_003))?);
    }
    gates.extend(stair);
    let back: Vec<usize> = (0..m).chain(n + m..n + 2 * m).collect();
    if m > 0 {
        let close = boundary_gate(&enc.v_one_minus_alpha, &back, opts.native, opts.seed.wrapping_add(2_000_003))?;
        gates.extend(close.iter().rev().map(GateOp::inverse));
    }
    let circuit = QuantumCircuit {
        n_system: n,
        n_ancilla: 2 * m,
        gates,
        postselect_qubits: back,
        norm_factor: enc.c_alpha * enc.c_one_minus_alpha,
        global_sign: sign,
        system_qubits: (m..m + n).collect(),
    };
    circuit.validate()?;
    Ok(Compilation {
        circuit,
        site_gates,
        site_distances,
        success_rate: enc.success_rate,
        boundary: Some(enc),
        lambda,
        boundary_kind: Boundary::Pbc,
    })
}

/// Dispatches on the boundary condition of `mps`.
pub fn compile(mps: &MatrixProductState, opts: &CompileOptions) -> Result<Compilation> {
    match mps.boundary() {
        Boundary::Obc => compile_obc(mps, opts),
        Boundary::Pbc => compile_pbc(mps, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::{fidelity, to_statevector};
    use crate::simulator::{post_select, run_circuit, Statevector};

    fn prepared(c: &Compilation) -> (Statevector, f64) {
        let s = run_circuit(&c.circuit, None, 0).unwrap();
        let anc = &c.circuit.postselect_qubits;
        if anc.is_empty() {
            return (s, 1.0);
        }
        post_select(&s, anc, &vec![0; anc.len()]).unwrap()
    }

    fn target(m: &MatrixProductState) -> Statevector {
        let mut s = Statevector::from_real(&to_statevector(m).unwrap()).unwrap();
        s.normalize().unwrap();
        s
    }

    #[test]
    fn product_state_uses_single_qubit_gates() {
        let m = MatrixProductState::product_state(&[1, 0, 1]).unwrap();
        let c = compile_obc(&m, &CompileOptions::default()).unwrap();
        assert!(c.circuit.gates.iter().all(|g| g.qubits().len() == 1));
        let (s, _) = prepared(&c);
        assert!((crate::simulator::fidelity(&s, &target(&m)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_chain_is_exact_in_every_mode() {
        let m = MatrixProductState::ghz(5, Boundary::Obc).unwrap();
        for native in [false, true] {
            let opts = CompileOptions { native, layers: if native { Some(1) } else { None }, ..Default::default() };
            let c = compile_obc(&m, &opts).unwrap();
            let (s, _) = prepared(&c);
            assert!((crate::simulator::fidelity(&s, &target(&m)).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ghz_ring_post_selects_with_half() {
        for n in 4..=6 {
            let m = MatrixProductState::ghz(n, Boundary::Pbc).unwrap();
            for native in [false, true] {
                let opts = CompileOptions { native, layers: if native { Some(1) } else { None }, ..Default::default() };
                let c = compile_pbc(&m, &opts).unwrap();
                let (s, p) = prepared(&c);
                assert!((p - 0.5).abs() < 1e-12, "{p}");
                assert!((c.success_rate - 0.5).abs() < 1e-12);
                assert!((crate::simulator::fidelity(&s, &target(&m)).unwrap() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn random_ring_amplitudes_and_rate() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for &(d, alpha) in &[(2usize, 0.5), (4, 0.5), (4, 0.3)] {
            let m = MatrixProductState::random(6, d, Boundary::Pbc, &mut rng).unwrap();
            let opts = CompileOptions { alpha, ..Default::default() };
            let c = compile_pbc(&m, &opts).unwrap();
            let full = run_circuit(&c.circuit, None, 0).unwrap();
            let anc = &c.circuit.postselect_qubits;
            let (s, p) = post_select(&full, anc, &vec![0; anc.len()]).unwrap();
            assert!((p - c.success_rate).abs() < 1e-10, "{p} vs {}", c.success_rate);
            // unnormalized amplitudes times norm_factor reproduce the canonical state exactly
            let canon = right_canonicalize(&m).unwrap();
            let want = to_statevector(&canon).unwrap();
            let scale = p.sqrt() * c.circuit.norm_factor * c.circuit.global_sign;
            for (a, b) in s.amps().iter().zip(&want) {
                assert!((a.re * scale - b).abs() < 1e-10);
            }
            assert!((fidelity(&c.realized_mps().unwrap(), &m).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ladder_compilation_tracks_realized_state() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let m = MatrixProductState::random(5, 4, Boundary::Obc, &mut rng).unwrap();
        let opts = CompileOptions {
            layers: Some(2),
            native: true,
            optimizer: OptimizerConfig { restarts: 1, max_iters: 40, ..Default::default() },
            ..Default::default()
        };
        let c = compile_obc(&m, &opts).unwrap();
        assert!(c.circuit.gates.iter().all(|g| matches!(g, GateOp::Ry { .. } | GateOp::Cnot { .. })));
        let (s, _) = prepared(&c);
        let real = target(&c.realized_mps().unwrap());
        assert!((crate::simulator::fidelity(&s, &real).unwrap() - 1.0).abs() < 1e-10);
    }
}
