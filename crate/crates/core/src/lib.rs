//! Occlusion-aware risk assessment and motion planning with bidirectional
//! reachability.
//!
//! The ego vehicle's forward reachable set is sampled as particles, each
//! particle's endpoint becomes the target set of a backward reachability
//! query for other lanes, and the resulting hypothetical intruder
//! trajectories are scored against the sensor's observable free space. The
//! planner turns those scores into a single acceleration command; the
//! simulator closes the loop on occluded four-way intersections.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod exec;
pub mod geometry;
pub mod planner;
pub mod risk;
pub mod simulator;

pub use exec::{map_range_with_jobs, Execution};
