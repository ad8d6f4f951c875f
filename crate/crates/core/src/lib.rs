//! Tracking-by-detection for multiple objects.
//!
//! Detections with appearance features go in; identity-labelled
//! trajectories come out. Two trackers share the same affinity model:
//!
//! * [`online_tracker`]: frame-by-frame Kalman prediction and two-stage
//!   Kuhn-Munkres association.
//! * [`offline_tracker`]: segment-wise tracklets joined hierarchically, with
//!   big-target gating and gap interpolation.
//!
//! [`metrics`] scores trajectories with CLEAR-MOT and [`synth`] produces
//! seeded synthetic sequences with known ground truth.

pub mod affinity;
pub mod assignment;
pub mod error;
pub mod metrics;
pub mod mot_data;
pub mod motion;
pub mod offline_tracker;
pub mod online_tracker;
pub mod synth;

pub use error::{Error, Result};
