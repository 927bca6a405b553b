//! Multi-fidelity active learning with stochastic radial basis functions.
//!
//! The crate is organised bottom-up:
//!
//! * [`srbf`]: single-output stochastic RBF regression (k-means centers,
//!   least-squares weights over a τ ensemble, LOOCV choice of the number of
//!   centers).
//! * [`multifidelity`]: hierarchy of a lowest-fidelity surrogate plus
//!   inter-level error surrogates, with root-sum-square uncertainty.
//! * [`active_learning`]: penalized lower-confidence-bound sampling, fidelity
//!   selection by uncertainty/cost ratio and the budgeted campaign loop.
//! * [`pso`]: deterministic particle swarm optimizer.
//! * [`benchmarks`]: the analytical multi-fidelity problems with synthetic noise.
//! * [`external`]: line-protocol adapter for objectives living in another process.
//! * [`metrics`]: error metrics and box-plot statistics.
//!
//! All design coordinates seen by the learner live in the unit hypercube.

pub mod active_learning;
pub mod benchmarks;
mod error;
pub mod external;
pub mod kmeans;
pub mod lstsq;
pub mod metrics;
pub mod multifidelity;
pub mod objective;
pub mod pso;
pub mod sampling;
pub mod srbf;

pub use active_learning::{
    run_campaign, AcquisitionConfig, CampaignConfig, CampaignRecord, FinalOptimum,
    IterationRecord, TerminationReason,
};
pub use benchmarks::{FidelityStack, NoiseSettings, Problem};
pub use error::{Error, Result};
pub use metrics::{BoxStats, ErrorMetrics, ReferenceOptimum};
pub use multifidelity::{BudgetLedger, FidelityLevels, MfSurrogate};
pub use objective::Objective;
pub use pso::{PsoConfig, PsoResult};
pub use srbf::{Prediction, RbfEnsemble, SrbfConfig, TauGrid, TrainingSet};
