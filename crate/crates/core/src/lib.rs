//! Sanitized answers to order-statistic and counting queries.
//!
//! The crate covers the full curator pipeline: a [`Dataset`] with declared
//! domain bounds, exact query evaluation, global/local/smooth sensitivity in
//! closed form, the noise families used to calibrate answers (Laplace,
//! discrete Laplace and the heavy-tailed `1/(1+|x|^γ)` family), mechanisms for
//! ε-DP, ε-individual DP and group DP, and a budget ledger implementing
//! sequential and parallel composition.
//!
//! The [`oracle`] module recomputes sensitivities and indistinguishability
//! ratios by exhaustive enumeration on small grid domains, and [`bench`]
//! regenerates the accuracy comparisons between DP calibrated to the smooth
//! sensitivity and iDP calibrated to the local sensitivity.

pub mod bench;
pub mod curator;
pub mod dataset;
mod error;
pub mod noise;
pub mod oracle;
pub mod query;
pub mod sensitivity;

pub use curator::{
    answer, prepare, release, BudgetLedger, MechanismConfig, NoiseFamily, NoisyAnswer,
    PartitionTag, Regime, SharedLedger,
};
pub use dataset::{Dataset, DomainBounds, SyntheticDistribution};
pub use error::{Error, Result};
pub use noise::{
    AdmissibleNoiseParams, DiscreteLaplaceParams, LaplaceParams, RandomSource, ShiftRatioBound,
};
pub use query::{evaluate, QuerySpec, QueryValue};
pub use sensitivity::{
    global_sensitivity, group_local_sensitivity, local_sensitivity, smooth_sensitivity,
    GroupSensitivity, Sensitivity, SensitivityReport,
};
