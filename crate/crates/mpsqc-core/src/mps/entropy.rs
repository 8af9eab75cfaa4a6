use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

fn entropy_from_weights(w: &[f64]) -> f64 {
    let total: f64 = w.iter().map(|x| x.max(0.0)).sum();
    w.iter()
        .map(|x| x.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Schmidt weights as eigenvalues of the smaller reduced density matrix.
fn schmidt_weights<T: nalgebra::ComplexField<RealField = f64>>(m: DMatrix<T>) -> Vec<f64> {
    let rho = if m.nrows() <= m.ncols() { &m * m.adjoint() } else { m.adjoint() * &m };
    rho.symmetric_eigen().eigenvalues.iter().cloned().collect()
}

fn check_cut(len: usize, cut: usize) -> Result<usize> {
    if !len.is_power_of_two() || len < 4 {
        return Err(Error::NotPowerOfTwo { what: "amplitude count", value: len });
    }
    let n = len.trailing_zeros() as usize;
    if cut == 0 || cut >= n {
        return invalid(format!("cut {cut} must lie in 1..{}", n - 1));
    }
    Ok(n)
}

/// Half-chain von Neumann entropy (natural log) across `cut`, from the Schmidt weights
/// of the `2^cut × 2^{N−cut}` amplitude matrix. Unnormalized input is normalized here.
pub fn entanglement_entropy(v: &[Complex64], cut: usize) -> Result<f64> {
    let n = check_cut(v.len(), cut)?;
    let norm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let (rows, cols) = (1usize << cut, 1usize << (n - cut));
    let m = DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j]);
    Ok(entropy_from_weights(&schmidt_weights(m)))
}

/// Same as [`entanglement_entropy`] for real amplitudes.
pub fn entanglement_entropy_real(v: &[f64], cut: usize) -> Result<f64> {
    let n = check_cut(v.len(), cut)?;
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroNorm);
    }
    let (rows, cols) = (1usize << cut, 1usize << (n - cut));
    let m = DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j]);
    Ok(entropy_from_weights(&schmidt_weights(m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn product_bell_and_ghz() {
        let prod = vec![c(0.0), c(1.0), c(0.0), c(0.0)];
        assert!(entanglement_entropy(&prod, 1).unwrap().abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![c(h), c(0.0), c(0.0), c(h)];
        assert!((entanglement_entropy(&bell, 1).unwrap() - LN_2).abs() < 1e-12);
        let mut ghz = vec![c(0.0); 16];
        ghz[0] = c(h);
        ghz[15] = c(h);
        assert!((entanglement_entropy(&ghz, 2).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn phase_and_scale_invariant() {
        let v: Vec<Complex64> = (0..16).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let s0 = entanglement_entropy(&v, 2).unwrap();
        let ph = Complex64::from_polar(3.0, 0.7);
        let w: Vec<Complex64> = v.iter().map(|x| x * ph).collect();
        assert!((entanglement_entropy(&w, 2).unwrap() - s0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_cut() {
        assert!(entanglement_entropy(&[c(1.0), c(0.0), c(0.0), c(0.0)], 2).is_err());
    }
}
