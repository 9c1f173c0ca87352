//! Geometry, calibration, evaluation and ranking for trackerless freehand
//! 3D ultrasound reconstruction.
//!
//! - [`se3`]: rigid transforms between image, tool and camera frames.
//! - [`calib`]: pinhead spatial calibration and temporal lag estimation.
//! - [`ddf`]: global/local dense displacement fields at pixels and landmarks.
//! - [`metrics`]: GPE/GLE/LPE/LLE per scan, in memory or streamed.
//! - [`ranking`]: normalization, leaderboards and the statistics around them.
//! - [`sim`]: synthetic scans, pinhead observations and corrupted predictions.
//! - [`io`]: the on-disk formats.

pub mod calib;
pub mod ddf;
pub mod error;
pub mod io;
pub mod metrics;
pub mod ranking;
pub mod rng;
pub mod se3;
pub mod sim;

pub use calib::{CalibrationSolution, PinheadObservation, SolverOptions};

pub use error::{Error, Result};

pub use ddf::{DdfSet, Landmark, LandmarkSet, ScanPoses};
pub use metrics::{ScanMetricReport, ScanStatus};
pub use ranking::{LeaderboardEntry, ScanScore};
pub use se3::{Pose6, RigidTransform, ScaleTransform};
