//! Tape-aware toolpath compiler and placement simulator for continuous-tape
//! additive manufacturing.
//!
//! The pipeline is `Design` → [`planner::plan`] → [`simulator::simulate`] →
//! [`metrics`], with [`controlsync`] modelling the robot/print-module I/O
//! split and [`apps`] covering printed traces and capacitive sensor grids.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod config;
pub mod controlsync;
pub mod error;
pub mod geometry;
pub mod mechanics;
pub mod metrics;
pub mod planner;
pub mod render;
pub mod simulator;

pub use error::{Error, Result};
