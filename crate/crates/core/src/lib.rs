//! Spatial-temporal hidden Markov random field inference of binary
//! differential-expression states on a gene network.
//!
//! The latent state matrix `X` (genes × time points) carries an
//! auto-logistic prior coupled over network edges and over time, and the
//! observations follow a Gamma–Gamma hierarchy. Estimation alternates
//! pseudolikelihood fits of the prior, maximum-likelihood fits of the
//! emission model and iterated-conditional-modes sweeps in which every
//! gene's whole time path is replaced by its Viterbi optimum.
//!
//! Numerical code is generic over [`Real`]; the `*64` / `*32` aliases
//! below name the concrete instantiations.

pub mod error;
pub mod evaluate;
pub mod gamma_gamma;
pub mod inference;
pub mod io;
pub mod mrf;
pub mod network;
pub mod optimize;
pub mod scalar;
pub mod simulate;
pub mod special;
pub mod states;

pub use error::{Error, Result};
pub use evaluate::{aggregate_replicates, confusion_metrics, MetricSummary, TimepointMetrics};
pub use gamma_gamma::{ExpressionData, GgParams};
pub use inference::{FitConfig, FitMode, FitResult, TraceEntry};
pub use mrf::{MrfParams, PhiEstimate};
pub use network::GeneNetwork;
pub use scalar::Real;
pub use simulate::{Scenario, ScenarioSpec};
pub use states::StateMatrix;

pub type GgParams64 = GgParams<f64>;
pub type GgParams32 = GgParams<f32>;
pub type MrfParams64 = MrfParams<f64>;
pub type MrfParams32 = MrfParams<f32>;
pub type ExpressionData64 = ExpressionData<f64>;
pub type ExpressionData32 = ExpressionData<f32>;
pub type FitConfig64 = FitConfig<f64>;
pub type FitConfig32 = FitConfig<f32>;
pub type FitResult64 = FitResult<f64>;
pub type FitResult32 = FitResult<f32>;
pub type ScenarioSpec64 = ScenarioSpec<f64>;
