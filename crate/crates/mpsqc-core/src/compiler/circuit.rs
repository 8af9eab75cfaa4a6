use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{expm_skew, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    /// 1: fire on |1⟩, 0: fire on |0⟩.
    pub polarity: u8,
}

/// One circuit instruction. Multi-qubit matrices use the listed qubit order,
/// first qubit most significant.
#[derive(Clone, Debug, PartialEq)]
pub enum GateOp {
    Dense { qubits: Vec<usize>, matrix: Matrix },
    /// `expm(X − Xᵀ)` with `X` strictly lower triangular, entries (1,0),(2,0),(2,1),(3,0),(3,1),(3,2).
    So4 { qubits: [usize; 2], params: [f64; 6] },
    Ry { qubit: usize, theta: f64 },
    Mcry { target: usize, controls: Vec<Control>, theta: f64 },
    Cnot { control: usize, target: usize },
}

/// Lower-triangular positions of the six SO(4) parameters.
pub const SO4_PAIRS: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

pub fn so4_generator(params: &[f64; 6]) -> Matrix {
    let mut a = Matrix::zeros(4, 4);
    for (&(i, j), &p) in SO4_PAIRS.iter().zip(params) {
        a[(i, j)] = p;
        a[(j, i)] = -p;
    }
    a
}

pub fn so4_matrix(params: &[f64; 6]) -> Matrix {
    expm_skew(&so4_generator(params)).expect("generator is skew by construction")
}

pub fn ry_matrix(theta: f64) -> Matrix {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix::from_row_slice(2, 2, &[c, -s, s, c])
}

impl GateOp {
    pub fn kind(&self) -> &'static str {
        match self {
            GateOp::Dense { .. } => "DENSE_UNITARY",
            GateOp::So4 { .. } => "SO4",
            GateOp::Ry { .. } => "RY",
            GateOp::Mcry { .. } => "MCRY",
            GateOp::Cnot { .. } => "CNOT",
        }
    }

    /// Every qubit the gate touches; for MCRY the controls come first and the target last.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            GateOp::Dense { qubits, .. } => qubits.clone(),
            GateOp::So4 { qubits, .. } => qubits.to_vec(),
            GateOp::Ry { qubit, .. } => vec![*qubit],
            GateOp::Mcry { target, controls, .. } => {
                controls.iter().map(|c| c.qubit).chain(std::iter::once(*target)).collect()
            }
            GateOp::Cnot { control, target } => vec![*control, *target],
        }
    }

    /// Dense matrix on `qubits()` in that order.
    pub fn matrix(&self) -> Matrix {
        match self {
            GateOp::Dense { matrix, .. } => matrix.clone(),
            GateOp::So4 { params, .. } => so4_matrix(params),
            GateOp::Ry { theta, .. } => ry_matrix(*theta),
            GateOp::Mcry { controls, theta, .. } => {
                let k = controls.len();
                let dim = 2usize << k;
                let mut m = Matrix::identity(dim, dim);
                let fire: usize = controls.iter().fold(0, |acc, c| (acc << 1) | c.polarity as usize);
                let r = ry_matrix(*theta);
                let base = fire << 1;
                for i in 0..2 {
                    for j in 0..2 {
                        m[(base + i, base + j)] = r[(i, j)];
                    }
                }
                m
            }
            GateOp::Cnot { .. } => {
                Matrix::from_row_slice(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.])
            }
        }
    }

    pub fn inverse(&self) -> GateOp {
        match self {
            GateOp::Dense { qubits, matrix } => GateOp::Dense { qubits: qubits.clone(), matrix: matrix.transpose() },
            GateOp::So4 { qubits, params } => GateOp::So4 { qubits: *qubits, params: params.map(|p| -p) },
            GateOp::Ry { qubit, theta } => GateOp::Ry { qubit: *qubit, theta: -theta },
            GateOp::Mcry { target, controls, theta } => {
                GateOp::Mcry { target: *target, controls: controls.clone(), theta: -theta }
            }
            GateOp::Cnot { control, target } => GateOp::Cnot { control: *control, target: *target },
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let q = self.qubits();
        if q.iter().any(|&x| x >= n_qubits) {
            return invalid(format!("{} gate touches qubit outside 0..{n_qubits}", self.kind()));
        }
        let mut sorted = q.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != q.len() {
            return invalid(format!("{} gate repeats a qubit", self.kind()));
        }
        match self {
            GateOp::Dense { matrix, .. } => {
                let d = 1usize << q.len();
                if matrix.shape() != (d, d) {
                    return Err(Error::DimensionMismatch(format!("dense gate on {} qubits is {:?}", q.len(), matrix.shape())));
                }
                let res = (matrix.transpose() * matrix - Matrix::identity(d, d)).amax();
                if res > 1e-10 {
                    return Err(Error::NotOrthogonal(res));
                }
            }
            GateOp::Mcry { controls, .. } => {
                if controls.iter().any(|c| c.polarity > 1) {
                    return invalid("control polarity must be 0 or 1");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumCircuit {
    pub n_system: usize,
    pub n_ancilla: usize,
    pub gates: Vec<GateOp>,
    pub postselect_qubits: Vec<usize>,
    pub norm_factor: f64,
    /// ±1; the circuit prepares `global_sign · |ψ⟩`.
    pub global_sign: f64,
    /// Qubits holding the physical sites, in site order.
    pub system_qubits: Vec<usize>,
}

impl QuantumCircuit {
    pub fn n_qubits(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        for g in &self.gates {
            g.validate(n)?;
        }
        if self.postselect_qubits.iter().any(|&q| q >= n || self.system_qubits.contains(&q)) {
            return invalid("post-selected qubits must be ancillas");
        }
        if self.system_qubits.len() != self.n_system {
            return invalid("system qubit list does not match n_system");
        }
        Ok(())
    }

    /// Gate histogram by kind, in a fixed order.
    pub fn counts(&self) -> Vec<(&'static str, usize)> {
        ["DENSE_UNITARY", "SO4", "RY", "MCRY", "CNOT"]
            .iter()
            .map(|k| (*k, self.gates.iter().filter(|g| g.kind() == *k).count()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_canonical_string_pretty(&CircuitFile::from(self))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: CircuitFile = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("circuit JSON: {e}")))?;
        let c = f.into_circuit()?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Serialize, Deserialize)]
struct GateFile {
    kind: String,
    qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    controls: Option<Vec<Control>>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    n_system: usize,
    n_ancilla: usize,
    postselect_qubits: Vec<usize>,
    norm_factor: f64,
    #[serde(default = "one")]
    global_sign: f64,
    #[serde(default)]
    system_qubits: Option<Vec<usize>>,
    gates: Vec<GateFile>,
}

fn one() -> f64 {
    1.0
}

impl From<&GateOp> for GateFile {
    fn from(g: &GateOp) -> Self {
        let mut f = GateFile { kind: g.kind().into(), qubits: g.qubits(), matrix: None, params: None, theta: None, controls: None };
        match g {
            GateOp::Dense { matrix, .. } => {
                f.matrix = Some((0..matrix.nrows()).map(|i| matrix.row(i).iter().cloned().collect()).collect());
            }
            GateOp::So4 { params, .. } => f.params = Some(params.to_vec()),
            GateOp::Ry { theta, .. } => f.theta = Some(*theta),
            GateOp::Mcry { theta, controls, .. } => {
                f.theta = Some(*theta);
                f.controls = Some(controls.clone());
            }
            GateOp::Cnot { .. } => {}
        }
        f
    }
}

impl GateFile {
    fn into_gate(self) -> Result<GateOp> {
        let need = |n: usize| -> Result<()> {
            if self.qubits.len() != n {
                return invalid(format!("{} gate needs {n} qubits", self.kind));
            }
            Ok(())
        };
        let theta = || self.theta.ok_or_else(|| Error::InvalidInput(format!("{} gate without theta", self.kind)));
        Ok(match self.kind.as_str() {
            "DENSE_UNITARY" => {
                let rows = self.matrix.clone().ok_or_else(|| Error::InvalidInput("dense gate without matrix".into()))?;
                let d = rows.len();
                if rows.iter().any(|r| r.len() != d) {
                    return invalid("dense gate matrix is not square");
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                GateOp::Dense { qubits: self.qubits.clone(), matrix: Matrix::from_row_slice(d, d, &flat) }
            }
            "SO4" => {
                need(2)?;
                let p = self.params.clone().ok_or_else(|| Error::InvalidInput("SO4 gate without params".into()))?;
                let params: [f64; 6] = p.try_into().map_err(|_| Error::InvalidInput("SO4 needs 6 params".into()))?;
                GateOp::So4 { qubits: [self.qubits[0], self.qubits[1]], params }
            }
            "RY" => {
                need(1)?;
                GateOp::Ry { qubit: self.qubits[0], theta: theta()? }
            }
            "MCRY" => {
                let controls = self.controls.clone().unwrap_or_default();
                need(controls.len() + 1)?;
                if controls.iter().zip(&self.qubits).any(|(c, &q)| c.qubit != q) {
                    return invalid("MCRY qubits must list the controls, then the target");
                }
                GateOp::Mcry { target: *self.qubits.last().unwrap(), controls, theta: theta()? }
            }
            "CNOT" => {
                need(2)?;
                GateOp::Cnot { control: self.qubits[0], target: self.qubits[1] }
            }
            other => return invalid(format!("unknown gate kind {other}")),
        })
    }
}

impl From<&QuantumCircuit> for CircuitFile {
    fn from(c: &QuantumCircuit) -> Self {
        CircuitFile {
            n_system: c.n_system,
            n_ancilla: c.n_ancilla,
            postselect_qubits: c.postselect_qubits.clone(),
            norm_factor: c.norm_factor,
            global_sign: c.global_sign,
            system_qubits: Some(c.system_qubits.clone()),
            gates: c.gates.iter().map(GateFile::from).collect(),
        }
    }
}

impl CircuitFile {
    fn into_circuit(self) -> Result<QuantumCircuit> {
        if self.gates.is_empty() {
            return invalid("circuit has an empty gate list");
        }
        let system_qubits = self.system_qubits.unwrap_or_else(|| {
            let anc: Vec<usize> = self.postselect_qubits.clone();
            (0..self.n_system + self.n_ancilla).filter(|q| !anc.contains(q)).collect()
        });
        Ok(QuantumCircuit {
            n_system: self.n_system,
            n_ancilla: self.n_ancilla,
            postselect_qubits: self.postselect_qubits,
            norm_factor: self.norm_factor,
            global_sign: self.global_sign,
            system_qubits,
            gates: self.gates.into_iter().map(GateFile::into_gate).collect::<Result<_>>()?,
        })
    }
}
