//! Multiagent rollout for belief-space POMDPs.
//!
//! The crate is organised around a small set of model/policy traits in
//! [`pomdp`], a concrete multi-robot repair environment in [`repair`], and the
//! planners built on top of them:
//!
//! * [`rollout`]: truncated rollout with Monte Carlo Q-factors (standard,
//!   one-agent-at-a-time, order-optimized and multistep lookahead).
//! * [`comms`]: rollout under imperfect control and belief sharing.
//! * [`approx_pi`]: approximate policy iteration with a feedforward policy
//!   classifier trained on rollout decisions.
//! * [`harness`]: seeded, paired experiment runner used by the CLI.

pub mod approx_pi;
pub mod base_policy;
pub mod comms;
pub mod error;
pub mod harness;
mod par;
pub mod pomdp;
pub mod repair;
pub mod rng;
pub mod rollout;
pub mod stats;

pub use error::{Error, Result};
