//! Kernel SVM training by a preconditioned interior point method.
//!
//! The dual soft-margin problem is solved by a barrier method whose Newton
//! saddle systems go to right-preconditioned GMRES. Kernel products use an
//! additive Gaussian (ANOVA) kernel over feature windows of at most three
//! features, applied either exactly or by NFFT-based fast summation. The
//! preconditioner combines a low-rank kernel factor with the
//! Sherman-Morrison-Woodbury identity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fastsum;
pub mod ipm;
pub mod kernel;
pub mod lowrank;
pub mod pipeline;
pub mod saddle;
pub mod synthetic;
pub mod tuning;

pub use data::{Dataset, FeatureWindowing};
pub use error::{Error, Result};
pub use fastsum::FastsumConfig;
pub use ipm::{IpmConfig, IpmStatus, PredictBackend, TrainedModel};
pub use kernel::{AnovaKernel, GaussianKernel, KernelOperator};
pub use lowrank::{FactorMethod, LowRankFactor, StackedFactor};
pub use pipeline::{Backend, FitReport, PrecondConfig, TrainingSetup};
