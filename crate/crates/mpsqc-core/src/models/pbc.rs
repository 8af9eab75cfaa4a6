use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::{compress_pbc, fidelity, from_statevector, Boundary, CompressionReport, MatrixProductState};

use super::{heisenberg, lowest_eigs};
use crate::compiler::maximize_success_gauge;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PbcFitConfig {
    pub d_target: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    /// Fits below this fidelity with the ED state are an error.
    pub fidelity_floor: f64,
    /// L-BFGS iterations of the closing-bond gauge search; 0 keeps the fitted gauge. Skipped
    /// unless `d_target` is a power of two, since only those bonds are compiled.
    pub gauge_iters: usize,
}

impl Default for PbcFitConfig {
    fn default() -> Self {
        Self { d_target: 8, max_sweeps: 300, tol: 1e-12, fidelity_floor: 0.999, gauge_iters: 300 }
    }
}

#[derive(Clone, Debug)]
pub struct PbcFit {
    pub mps: MatrixProductState,
    pub energy: f64,
    pub fidelity: f64,
    pub ed_state: Vec<f64>,
    pub report: CompressionReport,
}

pub const PBC_ED_GUARD: usize = 16;

/// Ring ground state of the XXZ model as a periodic MPS of bond dimension `d_target`:
/// ED ground state, exact open-chain MPS, the variational ring fit, then the closing-bond
/// gauge search.
pub fn pbc_ground_mps(n: usize, delta: f64, cfg: &PbcFitConfig) -> Result<PbcFit> {
    if n > PBC_ED_GUARD {
        return Err(Error::SizeGuard(format!("ring ground state via ED on {n} sites")));
    }
    let h = heisenberg(n, delta, Boundary::Pbc)?;
    let sector = if n % 2 == 0 { Some(0) } else { Some(1) };
    let (e, v) = lowest_eigs(&h, 1, sector)?;
    let exact = from_statevector(&v[0], usize::MAX)?;
    let (mut fit, report) = compress_pbc(&exact.as_pbc(), cfg.d_target, cfg.max_sweeps, cfg.tol)?;
    let f = fidelity(&fit, &exact)?;
    if f < cfg.fidelity_floor {
        return Err(Error::Numerical(format!(
            "ring fit fidelity {f:.9} below floor {} at D = {}",
            cfg.fidelity_floor, cfg.d_target
        )));
    }
    let nrm = crate::mps::mps_norm(&fit).sqrt();
    fit.scale(1.0 / nrm);
    if cfg.gauge_iters > 0 && cfg.d_target.is_power_of_two() {
        fit = maximize_success_gauge(&fit, 0.5, cfg.gauge_iters)?.0;
    }
    Ok(PbcFit { mps: fit, energy: e[0], fidelity: f, ed_state: v[0].clone(), report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::to_statevector;

    #[test]
    fn four_site_ring_is_exact() {
        let cfg = PbcFitConfig { d_target: 4, ..Default::default() };
        let fit = pbc_ground_mps(4, 1.0, &cfg).unwrap();
        assert!((fit.fidelity - 1.0).abs() < 1e-8);
        assert!((fit.energy + 2.0).abs() < 1e-10);
    }

    #[test]
    fn fitted_state_is_translation_covariant() {
        let cfg = PbcFitConfig { d_target: 4, ..Default::default() };
        let fit = pbc_ground_mps(6, 1.0, &cfg).unwrap();
        let v = to_statevector(&fit.mps).unwrap();
        let n = 6;
        let shifted: Vec<f64> = (0..v.len())
            .map(|x| {
                let y = ((x << 1) | (x >> (n - 1))) & ((1 << n) - 1);
                v[y]
            })
            .collect();
        let ov: f64 = v.iter().zip(&shifted).map(|(a, b)| a * b).sum();
        let nn: f64 = v.iter().map(|a| a * a).sum();
        assert!(((ov / nn).abs() - 1.0).abs() < 1e-6, "{}", ov / nn);
    }
}
