//! Spatial (pinhead) and temporal probe calibration.

pub mod lm;
pub mod spatial;
pub mod temporal;

pub use spatial::{
    analytic_jacobian, calibration_residuals, solve_spatial, CalibrationParams,
    CalibrationSolution, JacobianMode, PinheadObservation, SolverOptions,
};
pub use temporal::{temporal_offset, MotionSignal};
