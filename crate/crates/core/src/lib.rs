// SPDX-License-Identifier: Apache-2.0

//! Incremental SMT encoding and solving for dynamic, capacitated
//! multi-robot pickup and delivery.
//!
//! The crate is layered bottom-up: [`model`] holds the domain data,
//! [`semantics`] checks plans, [`encoder`] builds and lowers formulas,
//! [`session`] talks to an external solver, and [`planner`] drives the
//! batch loop. [`oracle`] is a brute-force ground truth for small inputs
//! and [`benchgen`] produces benchmark families.

pub mod benchgen;
pub mod encoder;
pub mod model;
pub mod oracle;
pub mod planner;
pub mod semantics;
pub mod session;

/// Time in abstract integer units.
pub type Time = u64;
pub type LocationId = usize;
pub type TaskId = usize;
pub type AgentId = usize;
