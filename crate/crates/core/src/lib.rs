//! Distributed online learning in tree-structured multi-stage systems.
//!
//! A job enters at the root of a tree every round and each non-leaf node on
//! its way forwards it to one child, using only what it has seen itself: the
//! job, the probability it had of receiving the job, and the end-to-end cost
//! reported back from the leaf. This crate provides the node policies
//! (normalized exponentiated gradient, ε-EXP3 and its anytime variant, plain
//! per-node EXP3 and a few reference policies), cost environments, a round
//! engine with a regret ledger, and an experiment harness with a CLI.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod seeding;
pub mod topology;

pub use engine::{FeedbackModel, RegretLedger, RoundOutcome, Simulation};
pub use error::{Error, Result};
pub use topology::{NodeId, TreeTopology};
