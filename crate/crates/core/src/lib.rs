//! Count-data regression: Poisson, negative binomial (NB) and hurdle
//! negative binomial (HNB) models with maximum-likelihood fitting, Wald
//! inference, residual diagnostics and a simulation harness.

pub mod countdist;
pub mod datamodel;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod inference;
pub mod likelihood;
pub mod optim;
pub mod simulate;
pub mod specfun;

pub use error::{Error, Result};
