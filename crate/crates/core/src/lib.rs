//! Budget-constrained ensemble selection for classification queries.
//!
//! Given a pool of probabilistic classifiers, each with a per-query cost and
//! an estimated success probability, this crate selects and adaptively
//! invokes a subset whose aggregated prediction maximizes the probability of
//! being correct -- without ever letting a single query's spend cross the
//! budget.
//!
//! The pieces, bottom to top:
//!
//! - [`catalog`]: model pools, per-class profiles, pricing, file formats.
//! - [`aggregation`]: observation probabilities, beliefs, the
//!   maximum-likelihood aggregated prediction.
//! - [`correctness`]: exact and Monte Carlo correctness probability `PA(S)`,
//!   the sample-count formula, the submodular surrogate `gamma`.
//! - [`selection`]: cost-ratio greedy and surrogate greedy with an
//!   instance-dependent guarantee ratio.
//! - [`runtime`]: adaptive per-query execution with early stopping.
//! - [`estimation`]: profiles from historical 0/1 matrices, density
//!   clustering, Hoeffding intervals, median boosting.
//! - [`oracle`]: brute-force optima and guarantee audits for verification.
//! - [`simharness`]: synthetic instances and budget sweeps.

pub mod aggregation;
pub mod catalog;
pub mod correctness;
pub mod error;
pub mod estimation;
pub mod oracle;
pub mod runtime;
mod seedmix;
pub mod selection;
pub mod set;
pub mod simharness;

pub use error::{Error, Result};
pub use set::ModelSet;
