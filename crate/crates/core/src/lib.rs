//! Exact-arithmetic library for dividing the chances of a one-to-one matching
//! among agents whose preferences are single-peaked around an ideal lottery.
//!
//! The crate provides:
//!
//! - the core model: ideal lotteries, profiles, bistochastic random
//!   matchings, excess-demand classification, the l1 metric, and the
//!   same-sided welfare identity ([`model`]);
//! - the single-commodity uniform rule solved by exact breakpoint scan
//!   ([`uniform`]);
//! - the division mechanisms built on it: the two-phase uniform-rule family,
//!   serial dictatorship, proportional division, equal division, and the
//!   three-agent counterexample mechanisms ([`mechanisms`]);
//! - verification and falsification engines for strategy proofness,
//!   efficiency, replacement monotonicity, non-bossiness, in-betweenness,
//!   anonymity, envy-freeness, and welfare equivalence ([`axioms`]);
//! - seeded generators, the built-in benchmark fixtures, and the JSON
//!   interchange formats ([`profiles`], [`fixtures`], [`json`]).
//!
//! All quantities are exact rationals; no floating point is used anywhere, so
//! knife-edge comparisons (a column summing to exactly 1) are decided
//! exactly.

pub mod axioms;
pub mod error;
pub mod fixtures;
pub mod json;
pub mod mechanisms;
pub mod model;
pub mod profiles;
pub mod rational;
pub mod uniform;

pub use error::{Error, Result};
pub use rational::Rational;
