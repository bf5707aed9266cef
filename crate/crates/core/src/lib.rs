//! Incentive mechanisms for two-tier crowdsourcing over a social graph.
//!
//! Tier one selects paid *notifiers* whose neighbourhoods cover as many
//! devices as possible under a public budget ([`tenm`]). Tier two ranks the
//! notified devices by peer review using a median rule ([`ectai`]) and then
//! allocates heterogeneous tasks with an ε-increment ascending auction
//! ([`wipd`]). Each tier ships the baselines it is compared against, and
//! [`harness`] drives seeded experiments with deviation injection.
//!
//! All tier-one and auction arithmetic is exact ([`Rational`]); only the
//! peak-value aggregation and the probabilistic estimators use `f64`.

pub mod ectai;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod prob;
pub mod rational;
pub mod tenm;
pub mod wipd;

pub use error::{Error, Result};
pub use graph::{CoverageOracle, NodeId, SocialGraph};
pub use rational::Rational;
