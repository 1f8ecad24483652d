//! Estimation of discordant and mixture single-index models by decomposing
//! third-order Gaussian score moment tensors with (truncated) tensor power
//! iteration.
//!
//! The pipeline is:
//!
//! 1. [`models`] draws index vectors and data `(X, y)`.
//! 2. [`moments`] forms `M̂ = (1/n) Σ y_i S₃(x_i)` densely or as an
//!    implicit operator ([`score`] holds `S₁..S₃`).
//! 3. [`decomposition`] runs the power method from many random starts and
//!    clusters the results into `k` components.
//! 4. [`metrics`] scores the components against the truth.

pub mod decomposition;
mod error;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod moments;
pub mod quadrature;
pub mod rng;
pub mod score;
pub mod tensor;

pub use decomposition::{decompose, decompose_dataset, Backend, DecompositionResult, Init, PowerConfig};
pub use error::{Error, Result};
pub use models::{Dataset, LinkKind, ModelKind, ModelSpec, ParamSet};
pub use moments::ImplicitMoment;
pub use tensor::{SymTensor3, TensorOperator};
