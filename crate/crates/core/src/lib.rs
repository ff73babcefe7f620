//! Picker activity recognition from video.
//!
//! The pipeline estimates dense optical flow between consecutive frames,
//! restricts it to each picker's moving-object region (a binary mask),
//! summarises the masked flow as per-frame motion descriptors, and
//! classifies every frame as picking or not picking against thresholds
//! calibrated without labels (KDE + k-means). A rolling mode over the last
//! few frame labels yields the batch-level labels that drive robot
//! scheduling signals.

pub mod calibration;
pub mod classifier;
pub mod descriptor;
pub mod error;
pub mod flow;
pub mod frame;
pub mod io;
pub mod metrics;
pub mod pipeline;

pub use error::{Error, Result};
