//! Robot skill graph engine.
//!
//! Skills, environments and tasks are nodes of a small knowledge graph. Context
//! nodes (environment instances, task instances) are embedded by two MLP
//! encoders, skills by free vectors, and both relations by TransH hyperplanes.
//! A trained graph answers `(environment, task)` queries with ranked skill
//! scores, and the dispatcher routes the top score to direct execution,
//! Bayesian-optimization composition, or policy-gradient fine-tuning. Every
//! downstream evaluation runs against the deterministic surrogate in [`toysim`].
//!
//! The numeric core (encoders, scores, loss, kernels, GP) is generic over
//! [`Real`]; the aliases below fix the scalar to `f64` (or `f32`) for everyday use.

pub mod catalog;
pub mod composition;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod inference;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod sketch;
pub mod toysim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Graph = embedding::TrainedGraph<f64>;
pub type Graph32 = embedding::TrainedGraph<f32>;
pub type Encoder = embedding::ContextEncoder<f64>;
pub type Relation = embedding::RelationEmbedding<f64>;
pub type Gp = composition::gp::GaussianProcess<f64>;
pub type Gp32 = composition::gp::GaussianProcess<f32>;
pub type Composition = composition::CompositionParams<f64>;
