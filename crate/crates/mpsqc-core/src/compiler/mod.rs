//! Circuit synthesis for canonical MPS: embedding, determinant gauge, SO(4) ladders,
//! disentanglers, boundary encoding and Givens/Gray state preparation.

mod boundary;
mod circuit;
mod compile;
mod disentangle;
mod embed;
mod givens;
mod ladder;
pub mod optimizer;
mod so4;

pub use boundary::{build_boundary_unitary, maximize_success_gauge, split_bond_matrix, success_rate, BoundaryEncoding};
pub use circuit::{ry_matrix, so4_generator, so4_matrix, Control, GateOp, QuantumCircuit, SO4_PAIRS};
pub use compile::{compile, compile_obc, compile_pbc, CompileOptions, Compilation};
pub use disentangle::{layer_pairs, optimize_disentanglers, DisentangleConfig, DisentangleResult, DisentanglerLayout};
pub use embed::{embed_isometry, fix_determinants, site_gates, SiteGate};
pub use givens::{binary_from_gray, givens_gray_synthesize, givens_gray_synthesize_on, gray_code, lower_mcry};
pub use ladder::{decompose_multiqubit, ladder_matrix, ladder_pairs, DecompositionResult, OptimizerConfig};
pub use so4::{native_for_matrix, so4_log, so4_to_native};
