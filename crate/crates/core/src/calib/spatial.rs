//! Pinhead spatial calibration.
//!
//! Each observation pairs a tracked probe pose `T_i^{cam<-tool}` with the
//! pixel `p_i` where a fixed pin appears. For the true calibration every
//! observation maps to the same camera-space point:
//!
//! ```text
//! T_i^{cam<-tool} · T_rigid · T_scale · p_i = P   for all i
//! ```
//!
//! The solver minimizes the squared distance to a common `P` over eleven
//! parameters, laid out as `[rx, ry, rz, tx, ty, tz, sx, sy, Px, Py, Pz]`
//! (Z-Y-X Euler angles of `T_rigid`, its translation, the pixel scales and
//! the pin position).

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;

use super::lm::{self, LmOutcome, LmSettings};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::se3::{
    mat_from_pose6, pose6_from_mat, rot_x, rot_y, rot_z, Pose6, RigidTransform, ScaleTransform,
};

/// Number of free parameters.
pub const PARAM_COUNT: usize = 11;
/// Fewest observations accepted by [`solve_spatial`].
pub const MIN_OBSERVATIONS: usize = 6;
/// Jacobian condition number above which the geometry is rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Initial pixel scale (mm/px).
pub const INITIAL_SCALE: f64 = 0.2;

pub const PARAM_NAMES: [&str; PARAM_COUNT] = [
    "rx", "ry", "rz", "tx", "ty", "tz", "sx", "sy", "pin_x", "pin_y", "pin_z",
];

/// One image of the pin with the probe pose at acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinheadObservation {
    pub t_cam_tool: RigidTransform,
    pub u: f64,
    pub v: f64,
}

impl PinheadObservation {
    pub fn new(t_cam_tool: RigidTransform, u: f64, v: f64) -> Result<Self> {
        if !(u.is_finite() && v.is_finite() && u >= 0.0 && v >= 0.0) {
            return Err(Error::invalid(format!(
                "pin pixel ({u}, {v}) must be finite and non-negative"
            )));
        }
        Ok(Self { t_cam_tool, u, v })
    }
}

/// The unknowns of the calibration problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    /// Image (mm) to tool.
    pub t_rigid: RigidTransform,
    pub sx: f64,
    pub sy: f64,
    pub pin_world: Vector3<f64>,
}

impl CalibrationParams {
    pub fn to_vector(&self) -> DVector<f64> {
        let pose = pose6_from_mat(&self.t_rigid);
        DVector::from_vec(vec![
            pose.rx,
            pose.ry,
            pose.rz,
            pose.tx,
            pose.ty,
            pose.tz,
            self.sx,
            self.sy,
            self.pin_world.x,
            self.pin_world.y,
            self.pin_world.z,
        ])
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        let t_rigid = RigidTransform::from_parts(
            rot_z(x[2]) * rot_y(x[1]) * rot_x(x[0]),
            Vector3::new(x[3], x[4], x[5]),
        );
        Self {
            t_rigid,
            sx: x[6],
            sy: x[7],
            pin_world: Vector3::new(x[8], x[9], x[10]),
        }
    }
}

/// Result of [`solve_spatial`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSolution {
    pub t_rigid: RigidTransform,
    pub sx: f64,
    pub sy: f64,
    pub pin_world: Vector3<f64>,
    /// `sqrt(objective / observations)`, mm.
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CalibrationSolution {
    /// A known calibration, e.g. read from disk or used by the simulator.
    pub fn known(t_rigid: RigidTransform, sx: f64, sy: f64) -> Self {
        Self {
            t_rigid,
            sx,
            sy,
            pin_world: Vector3::zeros(),
            rms_residual: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    pub fn scale(&self) -> Result<ScaleTransform> {
        ScaleTransform::new(self.sx, self.sy)
    }

    pub fn params(&self) -> CalibrationParams {
        CalibrationParams {
            t_rigid: self.t_rigid,
            sx: self.sx,
            sy: self.sy,
            pin_world: self.pin_world,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    ForwardDifference,
    Analytic,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub jacobian: JacobianMode,
    /// Random-rotation restarts tried when the first run does not converge.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            jacobian: JacobianMode::ForwardDifference,
            restarts: 8,
            seed: 0,
        }
    }
}

/// Stacked 3-component residuals `T_i·T_rigid·T_scale·p_i − P`.
pub fn calibration_residuals(
    params: &CalibrationParams,
    obs: &[PinheadObservation],
) -> DVector<f64> {
    let mut out = DVector::zeros(3 * obs.len());
    for (i, o) in obs.iter().enumerate() {
        let image_mm = Vector3::new(params.sx * o.u, params.sy * o.v, 0.0);
        let world = o.t_cam_tool.apply(&params.t_rigid.apply(&image_mm));
        let r = world - params.pin_world;
        out.fixed_rows_mut::<3>(3 * i).copy_from(&r);
    }
    out
}

fn residuals_from_vector(x: &DVector<f64>, obs: &[PinheadObservation]) -> DVector<f64> {
    calibration_residuals(&CalibrationParams::from_vector(x), obs)
}

/// Analytic `∂r/∂x` for the parameter layout of this module.
pub fn analytic_jacobian(x: &DVector<f64>, obs: &[PinheadObservation]) -> DMatrix<f64> {
    let (rx, ry, rz) = (rot_x(x[0]), rot_y(x[1]), rot_z(x[2]));
    let ex = Vector3::<f64>::x().cross_matrix();
    let ey = Vector3::<f64>::y().cross_matrix();
    let ez = Vector3::<f64>::z().cross_matrix();
    let rot = rz * ry * rx;
    let d_rx = rz * ry * rx * ex;
    let d_ry = rz * ry * ey * rx;
    let d_rz = ez * rz * ry * rx;
    let (sx, sy) = (x[6], x[7]);

    let mut jac = DMatrix::zeros(3 * obs.len(), PARAM_COUNT);
    for (i, o) in obs.iter().enumerate() {
        let ri = o.t_cam_tool.rotation;
        let q = Vector3::new(sx * o.u, sy * o.v, 0.0);
        let row = 3 * i;
        let cols: [Vector3<f64>; 3] = [ri * (d_rx * q), ri * (d_ry * q), ri * (d_rz * q)];
        for (k, c) in cols.iter().enumerate() {
            jac.fixed_view_mut::<3, 1>(row, k).copy_from(c);
        }
        jac.fixed_view_mut::<3, 3>(row, 3).copy_from(&ri);
        jac.fixed_view_mut::<3, 1>(row, 6)
            .copy_from(&(ri * rot.column(0) * o.u));
        jac.fixed_view_mut::<3, 1>(row, 7)
            .copy_from(&(ri * rot.column(1) * o.v));
        jac.fixed_view_mut::<3, 3>(row, 8)
            .copy_from(&(-Matrix3::identity()));
    }
    jac
}

/// Pin estimate for a given `T_rigid` and scale: mean of the mapped pin pixels.
fn mean_pin(
    t_rigid: &RigidTransform,
    sx: f64,
    sy: f64,
    obs: &[PinheadObservation],
) -> Vector3<f64> {
    let sum: Vector3<f64> = obs
        .iter()
        .map(|o| {
            o.t_cam_tool
                .apply(&t_rigid.apply(&Vector3::new(sx * o.u, sy * o.v, 0.0)))
        })
        .sum();
    sum / obs.len() as f64
}

fn initial_guess(rotation: RigidTransform, obs: &[PinheadObservation]) -> DVector<f64> {
    CalibrationParams {
        t_rigid: rotation,
        sx: INITIAL_SCALE,
        sy: INITIAL_SCALE,
        pin_world: mean_pin(&rotation, INITIAL_SCALE, INITIAL_SCALE, obs),
    }
    .to_vector()
}

fn run_from(x0: DVector<f64>, obs: &[PinheadObservation], opts: &SolverOptions) -> LmOutcome {
    let settings = LmSettings {
        max_iterations: opts.max_iterations,
        ..LmSettings::default()
    };
    let f = |x: &DVector<f64>| residuals_from_vector(x, obs);
    match opts.jacobian {
        JacobianMode::ForwardDifference => {
            lm::minimize(f, None::<fn(&DVector<f64>) -> DMatrix<f64>>, x0, &settings)
        }
        JacobianMode::Analytic => lm::minimize(
            f,
            Some(|x: &DVector<f64>| analytic_jacobian(x, obs)),
            x0,
            &settings,
        ),
    }
}

/// Condition number of the Jacobian and its weakest right-singular direction.
pub fn jacobian_condition(jac: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let (mut imax, mut imin) = (0, 0);
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > svd.singular_values[imax] {
            imax = k;
        }
        if *s < svd.singular_values[imin] {
            imin = k;
        }
    }
    let smax = svd.singular_values[imax];
    let smin = svd.singular_values[imin];
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    (cond, v_t.row(imin).transpose())
}

fn describe_direction(dir: &DVector<f64>) -> String {
    let mut terms: Vec<(usize, f64)> = dir
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, c)| c.abs() >= 0.1)
        .collect();
    terms.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    terms
        .iter()
        .map(|(k, c)| format!("{c:+.3}·{}", PARAM_NAMES[*k]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Solves for `T_rigid`, the pixel scales and the pin position.
///
/// Starts from `T_rigid = I`, `sx = sy = 0.2`; if that run fails to converge,
/// `opts.restarts` random initial rotations are tried and the lowest final
/// objective wins (ties go to the earlier start).
pub fn solve_spatial(
    obs: &[PinheadObservation],
    opts: &SolverOptions,
) -> Result<CalibrationSolution> {
    if obs.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "pinhead calibration needs at least {MIN_OBSERVATIONS} observations, got {}",
            obs.len()
        )));
    }

    let mut best = run_from(initial_guess(RigidTransform::identity(), obs), obs, opts);
    if !best.converged && opts.restarts > 0 {
        let starts: Vec<DVector<f64>> = (0..opts.restarts as u64)
            .map(|k| {
                let mut rng = StreamRng::with_stream(opts.seed, k + 1);
                let pose = Pose6::new(
                    0.0,
                    0.0,
                    0.0,
                    rng.range(-std::f64::consts::PI, std::f64::consts::PI),
                    rng.range(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
                    rng.range(-std::f64::consts::PI, std::f64::consts::PI),
                );
                initial_guess(mat_from_pose6(&pose).expect("finite pose"), obs)
            })
            .collect();
        let runs: Vec<LmOutcome> = starts
            .into_par_iter()
            .map(|x0| run_from(x0, obs, opts))
            .collect();
        for run in runs {
            if run.objective < best.objective {
                best = run;
            }
        }
    }

    let jac = analytic_jacobian(&best.params, obs);
    let (condition, direction) = jacobian_condition(&jac);
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::DegenerateGeometry {
            condition,
            direction: describe_direction(&direction),
        });
    }

    let params = CalibrationParams::from_vector(&best.params);
    if !(params.sx > 0.0 && params.sy > 0.0) {
        return Err(Error::DegenerateGeometry {
            condition,
            direction: format!("non-positive scale ({}, {})", params.sx, params.sy),
        });
    }
    Ok(CalibrationSolution {
        t_rigid: params.t_rigid,
        sx: params.sx,
        sy: params.sy,
        pin_world: params.pin_world,
        rms_residual: (best.objective / obs.len() as f64).sqrt(),
        iterations: best.iterations,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, seed: u64) -> (CalibrationParams, Vec<PinheadObservation>) {
        let truth = CalibrationParams {
            t_rigid: mat_from_pose6(&Pose6::new(-60.0, 8.0, 25.0, 0.25, -0.15, 0.4)).unwrap(),
            sx: 0.2,
            sy: 0.2,
            pin_world: Vector3::new(30.0, -20.0, 150.0),
        };
        let mut rng = StreamRng::new(seed);
        let obs = (0..n)
            .map(|_| {
                let (u, v) = (rng.range(40.0, 600.0), rng.range(40.0, 440.0));
                let x_tool = truth.t_rigid.apply(&Vector3::new(0.2 * u, 0.2 * v, 0.0));
                let rot = rot_z(rng.range(-0.8, 0.8))
                    * rot_y(rng.range(-0.6, 0.6))
                    * rot_x(rng.range(-0.6, 0.6));
                let t = truth.pin_world - rot * x_tool;
                PinheadObservation::new(RigidTransform::from_parts(rot, t), u, v).unwrap()
            })
            .collect();
        (truth, obs)
    }

    #[test]
    fn residuals_vanish_at_truth() {
        let (truth, obs) = synthetic(10, 1);
        assert!(calibration_residuals(&truth, &obs).amax() < 1e-10);
    }

    #[test]
    fn residuals_pin_offset() {
        let obs: Vec<_> = [(10.0, 20.0), (30.0, 5.0)]
            .iter()
            .map(|&(u, v)| PinheadObservation::new(RigidTransform::identity(), u, v).unwrap())
            .collect();
        let mut params = CalibrationParams {
            t_rigid: RigidTransform::identity(),
            sx: 0.2,
            sy: 0.2,
            pin_world: Vector3::zeros(),
        };
        let base = calibration_residuals(&params, &obs);
        params.pin_world.x += 1.0;
        let shifted = calibration_residuals(&params, &obs);
        for i in 0..obs.len() {
            assert!((shifted[3 * i] - base[3 * i] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_jacobian_matches_central_differences() {
        let (_, obs) = synthetic(8, 2);
        let mut rng = StreamRng::new(99);
        for _ in 0..50 {
            let x = DVector::from_fn(PARAM_COUNT, |k, _| match k {
                0..=2 => rng.range(-1.0, 1.0),
                3..=5 => rng.range(-80.0, 80.0),
                6 | 7 => rng.range(0.1, 0.4),
                _ => rng.range(-100.0, 100.0),
            });
            let analytic = analytic_jacobian(&x, &obs);
            let fd = lm::forward_jacobian(
                &|p: &DVector<f64>| residuals_from_vector(p, &obs),
                &x,
                &residuals_from_vector(&x, &obs),
                1e-6,
            );
            for k in 0..PARAM_COUNT {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let central = (residuals_from_vector(&xp, &obs) - residuals_from_vector(&xm, &obs))
                    / (2.0 * h);
                let scale = central.norm().max(1e-8);
                assert!(
                    (analytic.column(k) - &central).norm() / scale < 1e-4,
                    "analytic col {k}"
                );
                assert!(
                    (fd.column(k) - &central).norm() / scale < 1e-4,
                    "forward col {k}"
                );
            }
        }
    }

    #[test]
    fn too_few_observations() {
        let (_, obs) = synthetic(3, 3);
        assert!(matches!(
            solve_spatial(&obs, &SolverOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn noiseless_recovery_both_jacobians() {
        let (truth, obs) = synthetic(30, 4);
        for mode in [JacobianMode::ForwardDifference, JacobianMode::Analytic] {
            let sol = solve_spatial(
                &obs,
                &SolverOptions {
                    jacobian: mode,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(sol.converged);
            assert!(sol.rms_residual < 1e-8, "{mode:?} rms {}", sol.rms_residual);
            assert!((sol.sx - truth.sx).abs() / truth.sx < 1e-6);
            assert!((sol.t_rigid.rotation - truth.t_rigid.rotation).norm() < 1e-6);
            assert!((sol.pin_world - truth.pin_world).norm() < 1e-6);
        }
    }

    #[test]
    fn pure_translation_sweep_is_degenerate() {
        let (_, mut obs) = synthetic(12, 5);
        let rot = obs[0].t_cam_tool.rotation;
        for o in &mut obs {
            o.t_cam_tool.rotation = rot;
        }
        match solve_spatial(&obs, &SolverOptions::default()) {
            Err(Error::DegenerateGeometry { direction, .. }) => {
                assert!(direction.contains("pin_"), "{direction}")
            }
            other => panic!("expected degenerate geometry, got {other:?}"),
        }
    }

    #[test]
    fn accepted_steps_never_increase_objective() {
        let (_, obs) = synthetic(20, 6);
        let out = run_from(
            initial_guess(RigidTransform::identity(), &obs),
            &obs,
            &SolverOptions::default(),
        );
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
