//! Kernel classifiers weighted by the input distribution.
//!
//! Provides distribution weights (v-vectors and V-matrices), the
//! epsilon-insensitive weighted kernel machine and its closed-form relatives,
//! evaluation metrics, cross-validated grid search and synthetic benchmarks.

pub mod bench;
pub mod data;
pub mod datagen;
pub mod distribution;
pub mod error;
pub mod evaluation;
pub mod kernels;
pub mod modelsel;
pub mod solvers;

pub use data::{decide, normalize, Dataset, Scaler, THRESHOLD};
pub use error::{Error, Result};
pub use kernels::{gram, GKernelSpec, GramMatrix, KernelSpec};
pub use solvers::{ClosedFormModel, DualModel, Method, Model, SolverConfig};
