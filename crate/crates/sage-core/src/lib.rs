//! Arena-tape reverse-mode autodiff, a small dual-vocabulary transformer
//! with landmark attention, and the scoring machinery layered on top:
//! reconstruction-consistency scores, energy reranking, consistency-guided
//! voting, score-function gradient estimation, entropy gating, and
//! look-ahead simulation.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (f32 or f64);
//! the `*64` aliases below are the default concrete types.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod estimator;
pub mod gate;
pub mod graph;
pub mod init;
pub mod las;
pub mod model;
pub mod optim;
pub mod rerank;
pub mod scalar;
pub mod tasks;
pub mod tensor;
pub mod trainer;
pub mod vocab;

pub use error::{CoreError, CoreResult};
pub use scalar::Scalar;

/// Double precision is the verification default.
pub type Tensor64 = tensor::Tensor<f64>;
pub type Graph64 = graph::Graph<f64>;
pub type Model64 = model::SageModel<f64>;

pub type Tensor32 = tensor::Tensor<f32>;
pub type Graph32 = graph::Graph<f32>;
pub type Model32 = model::SageModel<f32>;
