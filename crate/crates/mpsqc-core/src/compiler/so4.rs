use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{expm_skew, Matrix};

use super::circuit::{so4_matrix, GateOp, SO4_PAIRS};

type C = Complex64;

fn magic() -> Matrix4<C> {
    let h = 0.5f64.sqrt();
    let (o, z, i) = (C::new(h, 0.0), C::new(0.0, 0.0), C::new(0.0, h));
    Matrix4::new(o, i, z, z, z, z, i, o, z, z, i, -o, o, -i, z, z)
}

fn to_static(m: &Matrix) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[(i, j)])
}

/// Splits `w = a ⊗ b` for a product of two SU(2) matrices.
fn kron_factor(w: &Matrix4<C>) -> (Matrix2<C>, Matrix2<C>) {
    let block = |i: usize, j: usize| w.fixed_view::<2, 2>(2 * i, 2 * j).into_owned();
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                (bi, bj, best) = (i, j, n);
            }
        }
    }
    let blk = block(bi, bj);
    let mut b = blk / blk.determinant().sqrt();
    let mut a = Matrix2::from_fn(|i, j| (b.adjoint() * block(i, j)).trace() / 2.0);
    if a.determinant().re < 0.0 {
        // (iA)⊗(−iB) is the same product with both factors in SU(2)
        a *= C::new(0.0, 1.0);
        b *= C::new(0.0, -1.0);
    }
    (a, b)
}

/// `(φ, θ, λ)` with `u = RZ(φ)·RY(θ)·RZ(λ)` for `u` in SU(2).
fn zyz(u: &Matrix2<C>) -> (f64, f64, f64) {
    let (a, b) = (u[(0, 0)], u[(1, 0)]);
    let theta = 2.0 * b.norm().atan2(a.norm());
    let s = -a.arg();
    let d = b.arg();
    (s + d, theta, s - d)
}

fn native_sequence(q0: usize, q1: usize, ang: [f64; 6]) -> Vec<GateOp> {
    let [a1, b1, a, b, a2, b2] = ang;
    vec![
        GateOp::Ry { qubit: q0, theta: a1 },
        GateOp::Ry { qubit: q1, theta: b1 },
        GateOp::Cnot { control: q0, target: q1 },
        GateOp::Ry { qubit: q0, theta: a },
        GateOp::Ry { qubit: q1, theta: b },
        GateOp::Cnot { control: q0, target: q1 },
        GateOp::Ry { qubit: q0, theta: a2 },
        GateOp::Ry { qubit: q1, theta: b2 },
    ]
}

fn sequence_matrix(gates: &[GateOp], q0: usize) -> Matrix4<f64> {
    let mut m = Matrix4::<f64>::identity();
    for g in gates {
        let step = match g {
            GateOp::Ry { qubit, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let r = nalgebra::Matrix2::new(c, -s, s, c);
                let id = nalgebra::Matrix2::<f64>::identity();
                if *qubit == q0 { r.kronecker(&id) } else { id.kronecker(&r) }
            }
            _ => Matrix4::new(1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.),
        };
        m = step * m;
    }
    m
}

/// Two CNOTs and at most six RY rotations reproducing the SO(4) gate exactly (global
/// sign included). Rotations by a multiple of 4π are dropped.
pub fn so4_to_native(g: &GateOp) -> Result<Vec<GateOp>> {
    let GateOp::So4 { qubits: [q0, q1], params } = g else {
        return Err(Error::InvalidInput(format!("expected an SO4 gate, got {}", g.kind())));
    };
    let target = to_static(&so4_matrix(params));
    native_for_matrix(&target, *q0, *q1)
}

/// Native sequence for an explicit SO(4) matrix on `(q0, q1)`.
pub fn native_for_matrix(target: &Matrix4<f64>, q0: usize, q1: usize) -> Result<Vec<GateOp>> {
    let orth = (target.transpose() * target - Matrix4::identity()).amax();
    if orth > 1e-10 {
        return Err(Error::NotOrthogonal(orth));
    }
    let det = target.determinant();
    if (det - 1.0).abs() > 1e-8 {
        return Err(Error::BadDeterminant(det));
    }
    let m = magic();
    let w = m * target.map(|x| C::new(x, 0.0)) * m.adjoint();
    let (a, b) = kron_factor(&w);
    let (q1a, q2a, q3a) = zyz(&b);
    let i = C::new(0.0, 1.0);
    let one = C::new(1.0, 0.0);
    let h = Matrix2::new(one, one, one, -one) * C::new(0.5f64.sqrt(), 0.0);
    let s = Matrix2::new(one, C::new(0.0, 0.0), C::new(0.0, 0.0), i);
    let (p1, p2, p3) = zyz(&(s * h * a * h * s.adjoint()));
    let mut ang = [-p3, -q3a, q2a, -p2, -p1, -q1a];
    let mut seq = native_sequence(q0, q1, ang);
    let mut err = (sequence_matrix(&seq, q0) - target).amax();
    if err > 1e-9 {
        let flipped = (sequence_matrix(&seq, q0) + target).amax();
        if flipped < 1e-9 {
            ang[0] += 2.0 * std::f64::consts::PI;
            seq = native_sequence(q0, q1, ang);
            err = (sequence_matrix(&seq, q0) - target).amax();
        }
    }
    if err > 1e-9 {
        return Err(Error::Numerical(format!("SO(4) native synthesis residual {err:.3e}")));
    }
    Ok(seq
        .into_iter()
        .filter(|g| match g {
            GateOp::Ry { theta, .. } => {
                let r = theta.rem_euclid(4.0 * std::f64::consts::PI);
                r.min(4.0 * std::f64::consts::PI - r) > 1e-14
            }
            _ => true,
        })
        .collect())
}

/// Skew parameters `p` with `expm(X(p) − X(p)ᵀ) = m`, from the real Schur form.
pub fn so4_log(m: &Matrix) -> Result<[f64; 6]> {
    if m.shape() != (4, 4) {
        return Err(Error::DimensionMismatch(format!("SO(4) log of a {:?} matrix", m.shape())));
    }
    let det = m.determinant();
    if (det - 1.0).abs() > 1e-8 {
        return Err(Error::BadDeterminant(det));
    }
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (q, t) = schur.unpack();
    let mut log_t = Matrix::zeros(4, 4);
    let mut minus_ones = Vec::new();
    let mut k = 0;
    while k < 4 {
        if k + 1 < 4 && t[(k + 1, k)].abs() > 1e-14 {
            let sn = 0.5 * (t[(k + 1, k)] - t[(k, k + 1)]);
            let cs = 0.5 * (t[(k, k)] + t[(k + 1, k + 1)]);
            let ang = sn.atan2(cs);
            log_t[(k + 1, k)] = ang;
            log_t[(k, k + 1)] = -ang;
            k += 2;
        } else {
            if t[(k, k)] < 0.0 {
                minus_ones.push(k);
            }
            k += 1;
        }
    }
    for pair in minus_ones.chunks(2) {
        if let [i, j] = *pair {
            log_t[(j, i)] = std::f64::consts::PI;
            log_t[(i, j)] = -std::f64::consts::PI;
        }
    }
    let a = &q * log_t * q.transpose();
    let a = (&a - a.transpose()) * 0.5;
    let mut p = [0.0; 6];
    for (slot, &(i, j)) in p.iter_mut().zip(SO4_PAIRS.iter()) {
        *slot = a[(i, j)];
    }
    let back = expm_skew(&super::circuit::so4_generator(&p))?;
    let res = (back - m).amax();
    if res > 1e-10 {
        return Err(Error::Numerical(format!("SO(4) logarithm residual {res:.3e}")));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 6] {
        std::array::from_fn(|_| rng.random_range(-scale..scale))
    }

    #[test]
    fn identity_needs_no_rotations() {
        let seq = so4_to_native(&GateOp::So4 { qubits: [0, 1], params: [0.0; 6] }).unwrap();
        assert_eq!(seq.iter().filter(|g| g.kind() == "CNOT").count(), 2);
        assert!((sequence_matrix(&seq, 0) - Matrix4::identity()).amax() < 1e-12);
    }

    #[test]
    fn random_gates_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = random_params(&mut rng, 3.0);
            let g = GateOp::So4 { qubits: [0, 1], params: p };
            let seq = so4_to_native(&g).unwrap();
            assert_eq!(seq.iter().filter(|g| g.kind() == "CNOT").count(), 2);
            assert!(seq.iter().filter(|g| g.kind() == "RY").count() <= 6);
            worst = worst.max((sequence_matrix(&seq, 0) - to_static(&so4_matrix(&p))).amax());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn swap_times_rotations() {
        let swap = Matrix4::new(1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.);
        let r = to_static(&so4_matrix(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.7]));
        // SWAP has det −1; compose with a reflection on both qubits to land in SO(4)
        let z = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, 1.0));
        let t = swap * z * r;
        let seq = native_for_matrix(&t, 3, 7).unwrap();
        let seq_local: Vec<GateOp> = seq
            .iter()
            .map(|g| match g {
                GateOp::Ry { qubit, theta } => GateOp::Ry { qubit: if *qubit == 3 { 0 } else { 1 }, theta: *theta },
                _ => GateOp::Cnot { control: 0, target: 1 },
            })
            .collect();
        assert!((sequence_matrix(&seq_local, 0) - t).amax() < 1e-10);
    }

    #[test]
    fn logarithm_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for scale in [0.1, 1.0, 3.0] {
            for _ in 0..30 {
                let p = random_params(&mut rng, scale);
                let m = so4_matrix(&p);
                let q = so4_log(&m).unwrap();
                assert!((so4_matrix(&q) - &m).amax() < 1e-10);
            }
        }
        let minus = -Matrix::identity(4, 4);
        let q = so4_log(&minus).unwrap();
        assert!((so4_matrix(&q) - minus).amax() < 1e-10);
    }
}
