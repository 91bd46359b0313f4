//! Quantum random projections: random-circuit sketches, classical baselines,
//! and the benchmarks that compare them.

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod datasets;
pub mod entropy_bench;
pub mod error;
pub mod jl_bench;
pub mod linalg;
pub mod projectors;
pub mod rng;
pub mod rqc;
pub mod simulator;
pub mod stats;
pub mod vqsvd;

pub use datasets::ImageDataset;
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Matrix, RealMatrix};
pub use projectors::{Projector, ProjectorKind};
pub use rqc::{build_rqc, AnsatzSpec, Ensemble, MomentEstimate, RowSelection};
pub use simulator::{Circuit, Gate, GateKind, Statevector};
