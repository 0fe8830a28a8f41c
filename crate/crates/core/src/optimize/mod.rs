//! Small numerical optimizers used by the estimation steps.

pub mod irls;
pub mod linalg;
pub mod nelder_mead;

pub use irls::{fit_logistic, LogisticFit, LogisticOptions};
pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};
