use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mpsqc::compiler::{DisentanglerLayout, OptimizerConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Canonicalize,
    Compile,
    Verify,
    SuccessRateScan,
    DecomposeScan,
    DisentangleScan,
    Quench,
    SchwingerSpectrum,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Canonicalize => "canonicalize",
            Self::Compile => "compile",
            Self::Verify => "verify",
            Self::SuccessRateScan => "success_rate_scan",
            Self::DecomposeScan => "decompose_scan",
            Self::DisentangleScan => "disentangle_scan",
            Self::Quench => "quench",
            Self::SchwingerSpectrum => "schwinger_spectrum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisentangleModel {
    HeisenbergPbc,
    SchwingerObc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuenchInit {
    /// ED ground state of the Heisenberg ring.
    Exact,
    /// The ring MPS of bond dimension `d`, as prepared by its circuit.
    Mps,
}

/// One run. Unset fields take the defaults below; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must name the subcommand when present.
    pub experiment: Option<ExperimentKind>,
    pub mps_path: Option<PathBuf>,
    pub circuit_path: Option<PathBuf>,
    pub n: usize,
    pub n_values: Vec<usize>,
    pub delta: f64,
    pub delta_values: Vec<f64>,
    pub x: f64,
    pub mu: f64,
    pub l: f64,
    pub d: usize,
    pub d_values: Vec<usize>,
    pub d_from: usize,
    pub layers: Option<usize>,
    pub layer_values: Vec<usize>,
    /// Ladder depth per entry of `d_values` in `schwinger_spectrum`.
    pub spectrum_layers: Vec<usize>,
    pub native: bool,
    pub alpha: f64,
    pub k: usize,
    pub d_ref: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub quench_init: QuenchInit,
    pub model: DisentangleModel,
    pub layout: DisentanglerLayout,
    pub fidelity_floor: f64,
    pub compress_sweeps: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            mps_path: None,
            circuit_path: None,
            n: 12,
            n_values: vec![8, 10, 12],
            delta: 1.0,
            delta_values: (0..10).map(|i| -1.0 + 0.2 * i as f64).collect(),
            x: 1.44,
            mu: 0.3,
            l: 0.0,
            d: 8,
            d_values: vec![4, 8],
            d_from: 6,
            layers: None,
            layer_values: (2..=9).collect(),
            spectrum_layers: vec![4, 8],
            native: false,
            alpha: 0.5,
            k: 11,
            d_ref: 40,
            dt: 0.05,
            t_final: 100.0,
            record_stride: 10,
            quench_init: QuenchInit::Exact,
            model: DisentangleModel::HeisenbergPbc,
            layout: DisentanglerLayout::Ladder,
            fidelity_floor: 0.0,
            compress_sweeps: 100,
            seed: 0,
            optimizer: OptimizerConfig { restrict_columns: true, ..Default::default() },
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))
    }

    /// Checks what `kind` needs before anything runs.
    pub fn validate(&self, kind: ExperimentKind) -> CliResult<()> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(bad(format!("config is for `{}`, not `{}`", k.name(), kind.name())));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(bad(msg)) };
        let pow2 = |d: usize| d.is_power_of_two();
        match kind {
            ExperimentKind::Canonicalize => need(self.mps_path.is_some(), "mps_path is required"),
            ExperimentKind::Compile => need(self.mps_path.is_some(), "mps_path is required"),
            ExperimentKind::Verify => {
                need(self.mps_path.is_some() && self.circuit_path.is_some(), "mps_path and circuit_path are required")
            }
            ExperimentKind::SuccessRateScan => {
                need(!self.n_values.is_empty() && !self.d_values.is_empty(), "n_values and d_values must be non-empty")?;
                need(self.d_values.iter().all(|&d| pow2(d) && d >= 2), "d_values must be powers of two ≥ 2")?;
                need(self.n_values.iter().all(|&n| n >= 4 && n % 2 == 0), "n_values must be even and ≥ 4")
            }
            ExperimentKind::DecomposeScan => {
                need(!self.n_values.is_empty() && !self.layer_values.is_empty(), "n_values and layer_values must be non-empty")?;
                need(pow2(self.d) && self.d >= 2, "d must be a power of two ≥ 2")?;
                need(self.n_values.iter().all(|&n| n >= 4 && n % 2 == 0), "n_values must be even and ≥ 4")?;
                need(self.layer_values.iter().all(|&l| l > 0), "layer_values must be positive")
            }
            ExperimentKind::DisentangleScan => {
                need(!self.n_values.is_empty(), "n_values must be non-empty")?;
                need(pow2(self.d) && self.d < self.d_from, "d must be a power of two below d_from")?;
                need(self.d_ref >= self.d_from, "d_ref must be at least d_from")?;
                need(self.layers.unwrap_or(10) > 0, "layers must be positive")?;
                need(self.k > 0, "k must be positive")
            }
            ExperimentKind::Quench => {
                need(!self.n_values.is_empty() && !self.delta_values.is_empty(), "n_values and delta_values must be non-empty")?;
                need(self.n_values.iter().all(|&n| n >= 4 && n % 2 == 0), "n_values must be even and ≥ 4")?;
                need(self.dt > 0.0 && self.t_final >= 0.0, "dt must be positive and t_final non-negative")
            }
            ExperimentKind::SchwingerSpectrum => {
                need(self.n >= 2 && self.n % 2 == 0, "n must be even")?;
                need(self.k > 0 && self.d_ref > 0, "k and d_ref must be positive")?;
                need(!self.d_values.is_empty(), "d_values must be non-empty")?;
                need(self.d_values.iter().all(|&d| pow2(d) && d >= 2), "d_values must be powers of two ≥ 2")?;
                need(self.spectrum_layers.len() == self.d_values.len(), "spectrum_layers must pair up with d_values")
            }
        }
    }
}
