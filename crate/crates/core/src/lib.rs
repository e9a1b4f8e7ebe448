//! Point-process response models for optogenetic spike trains.
//!
//! * [`pointproc`]: binned flash/spike sweeps, history markers and the
//!   post-flash / cumulative-flash / spread-flash response features.
//! * [`glm`]: logistic fitting by IRLS with Wald inference and AIC search.
//! * [`lif`]: leaky integrate-and-fire simulation of flash-driven neurons.
//! * [`eval`]: ROC/AUC and the train/test protocol.
//! * [`studies`]: replicated simulation experiments.
//! * [`io`]: CSV and JSON wire formats.
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix the scalar to `f64`, which is what the studies and the CLI use.

// `!(x > y)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod glm;
pub mod io;
pub mod lif;
pub mod pointproc;
pub mod rng;
pub mod scalar;
pub mod studies;

pub use error::{ProError, Result};
pub use scalar::Real;

pub type DesignMatrix = pointproc::DesignMatrix<f64>;
pub type FeatureRow = pointproc::FeatureRow<f64>;
pub type FittedModel = glm::FittedModel<f64>;
pub type OlsFit = glm::OlsFit<f64>;
pub type LifParams = lif::LifParams<f64>;
pub type LifTrace = lif::LifTrace<f64>;
pub type RocCurve = eval::RocCurve<f64>;

pub type DesignMatrixF32 = pointproc::DesignMatrix<f32>;
pub type FittedModelF32 = glm::FittedModel<f32>;
pub type LifParamsF32 = lif::LifParams<f32>;
