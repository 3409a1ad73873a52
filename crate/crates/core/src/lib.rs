//! Offline toolkit for multi-UAV surface inspection.
//!
//! The pipeline runs in stages:
//!
//! * [`coverage`] turns camera and resolution requirements into a standoff
//!   distance and a grid of viewpoints.
//! * [`planner`] searches a collision-aware path for the formation centroid
//!   with angle-encoded particle swarm optimization.
//! * [`formation`] expands the centroid path into one trajectory per UAV.
//! * [`control`] simulates each UAV's attitude under an adaptive twisting
//!   sliding-mode controller with an outer position loop.
//! * [`detection`] finds dark surface defects in grayscale images by
//!   iterated histogram thresholding and scores masks against ground truth.
//! * [`pipeline`] chains the stages with content-hash caching and writes
//!   reports.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod coverage;
pub mod detection;
pub mod error;
pub mod formation;
pub mod kv;
pub mod pipeline;
pub mod planner;
pub mod scenario;

pub use error::{Error, Result};
