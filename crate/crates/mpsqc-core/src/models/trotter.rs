use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::mps::Boundary;

/// Two-qubit unitary on `qubits`; the matrix basis is `|b_first b_second⟩`, first qubit most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct TrotterGate {
    pub qubits: (usize, usize),
    pub matrix: [[Complex64; 4]; 4],
}

/// `exp(−iτ(SˣSˣ + SʸSʸ + Δ·SᶻSᶻ))` on one bond.
pub fn heisenberg_bond_propagator(delta: f64, tau: f64) -> [[Complex64; 4]; 4] {
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[zero; 4]; 4];
    let diag = Complex64::from_polar(1.0, -tau * delta / 4.0);
    m[0][0] = diag;
    m[3][3] = diag;
    // {|01⟩,|10⟩} block: e^{iτΔ/4}·(cos(τ/2)·1 − i·sin(τ/2)·σˣ)
    let ph = Complex64::from_polar(1.0, tau * delta / 4.0);
    let c = ph * (tau / 2.0).cos();
    let s = ph * Complex64::new(0.0, -(tau / 2.0).sin());
    m[1][1] = c;
    m[2][2] = c;
    m[1][2] = s;
    m[2][1] = s;
    m
}

/// One second-order step: odd bonds for dt/2, even bonds for dt, odd bonds for dt/2.
/// Odd bonds are (0,1), (2,3), …; even bonds are (1,2), (3,4), … plus (N−1, 0) on a ring.
pub fn trotter_layer(n: usize, delta: f64, dt: f64, boundary: Boundary) -> Result<Vec<TrotterGate>> {
    if n < 2 {
        return invalid("need at least two sites");
    }
    if boundary == Boundary::Pbc && (n % 2 == 1 || n < 4) {
        return invalid("the ring split needs an even n ≥ 4");
    }
    let odd: Vec<(usize, usize)> = (0..n - 1).step_by(2).map(|i| (i, i + 1)).collect();
    let mut even: Vec<(usize, usize)> = (1..n - 1).step_by(2).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Pbc {
        even.push((n - 1, 0));
    }
    let half = heisenberg_bond_propagator(delta, dt / 2.0);
    let full = heisenberg_bond_propagator(delta, dt);
    let mut out = Vec::with_capacity(2 * odd.len() + even.len());
    out.extend(odd.iter().map(|&q| TrotterGate { qubits: q, matrix: half }));
    out.extend(even.iter().map(|&q| TrotterGate { qubits: q, matrix: full }));
    out.extend(odd.iter().map(|&q| TrotterGate { qubits: q, matrix: half }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{heisenberg, terms_to_dense};
    use nalgebra::DMatrix;

    fn to_mat(m: &[[Complex64; 4]; 4]) -> DMatrix<Complex64> {
        DMatrix::from_fn(4, 4, |i, j| m[i][j])
    }

    #[test]
    fn gate_is_unitary_and_matches_exponential() {
        for &(delta, tau) in &[(1.0, 0.05), (-0.6, 0.7), (0.4, 2.3)] {
            let u = to_mat(&heisenberg_bond_propagator(delta, tau));
            let id = DMatrix::<Complex64>::identity(4, 4);
            assert!((u.adjoint() * &u - id).iter().all(|z| z.norm() < 1e-12));
            // compare against the eigen-decomposition of the bond Hamiltonian
            let h = terms_to_dense(&heisenberg(2, delta, Boundary::Obc).unwrap()).unwrap();
            let e = h.symmetric_eigen();
            let want = DMatrix::from_fn(4, 4, |i, j| {
                (0..4)
                    .map(|k| {
                        Complex64::from_polar(1.0, -tau * e.eigenvalues[k])
                            * e.eigenvectors[(i, k)]
                            * e.eigenvectors[(j, k)]
                    })
                    .sum::<Complex64>()
            });
            assert!((u - want).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn zero_step_is_identity() {
        for g in trotter_layer(6, 0.3, 0.0, Boundary::Pbc).unwrap() {
            let u = to_mat(&g.matrix);
            assert!((u - DMatrix::<Complex64>::identity(4, 4)).iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn layer_structure() {
        let gs = trotter_layer(6, 1.0, 0.1, Boundary::Pbc).unwrap();
        let q: Vec<_> = gs.iter().map(|g| g.qubits).collect();
        assert_eq!(q, vec![(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0), (0, 1), (2, 3), (4, 5)]);
        assert!(trotter_layer(5, 1.0, 0.1, Boundary::Pbc).is_err());
        assert_eq!(trotter_layer(5, 1.0, 0.1, Boundary::Obc).unwrap().len(), 6);
    }
}
