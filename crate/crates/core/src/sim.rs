//! Synthetic scans, pinhead observations and corrupted predictions.
//!
//! Paths lie in the world `xy` plane, start at the origin and have their
//! chord along `+x`. The image centre follows the path; the probe pose is
//! derived from the image pose through the calibration, so the image-frame
//! scan length equals the path length up to arc discretization.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::calib::{CalibrationSolution, PinheadObservation};
use crate::ddf::{Landmark, LandmarkSet, ScanPoses};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::se3::{axis_angle, mat_from_pose6, Pose6, RigidTransform};

/// Frame geometry of the simulated probe.
pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;
pub const DEFAULT_PIXEL_MM: f64 = 0.2;
/// Tracker sampling rate, Hz.
pub const FRAME_RATE: f64 = 20.0;
/// Total turn of a C shape when no curvature is given.
pub const DEFAULT_C_TURN: f64 = PI / 2.0;
/// Turn of each S-shape arc when no curvature is given.
pub const DEFAULT_S_ARC_TURN: f64 = PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Straight,
    CShape,
    SShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Image plane normal to the direction of travel.
    Perpendicular,
    /// Image plane containing the direction of travel.
    Parallel,
}

macro_rules! text_enum {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::invalid(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

text_enum!(Shape, "shape", Straight => "straight", CShape => "c_shape", SShape => "s_shape");
text_enum!(Direction, "direction", Forward => "forward", Reverse => "reverse");
text_enum!(Orientation, "orientation", Perpendicular => "perpendicular", Parallel => "parallel");

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub shape: Shape,
    pub direction: Direction,
    pub orientation: Orientation,
    pub length_mm: f64,
    pub frame_count: usize,
    /// Arc curvature in 1/mm. Zero selects the default turn for the shape.
    pub curvature: f64,
    pub jitter_trans: f64,
    pub jitter_rot: f64,
    pub seed: u64,
    /// Probe calibration used to turn image poses into tool poses.
    pub calibration: CalibrationSolution,
    pub width: u32,
    pub height: u32,
}

impl TrajectorySpec {
    /// A jitter-free scan with the default probe.
    pub fn new(shape: Shape, length_mm: f64, frame_count: usize) -> Self {
        Self {
            shape,
            direction: Direction::Forward,
            orientation: Orientation::Perpendicular,
            length_mm,
            frame_count,
            curvature: 0.0,
            jitter_trans: 0.0,
            jitter_rot: 0.0,
            seed: 0,
            calibration: default_calibration(),
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_mm > 0.0 && self.length_mm.is_finite()) {
            return Err(Error::invalid(format!(
                "length must be positive, got {}",
                self.length_mm
            )));
        }
        if self.frame_count < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 frames, got {}",
                self.frame_count
            )));
        }
        if !(self.curvature >= 0.0 && self.curvature.is_finite()) {
            return Err(Error::invalid(format!(
                "curvature must be non-negative, got {}",
                self.curvature
            )));
        }
        for (name, v) in [
            ("jitter_trans", self.jitter_trans),
            ("jitter_rot", self.jitter_rot),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        self.calibration.scale()?;
        match self.shape {
            Shape::Straight if self.curvature != 0.0 => {
                Err(Error::invalid("a straight scan cannot have a curvature"))
            }
            Shape::CShape | Shape::SShape if self.arc_turn() > PI => Err(Error::invalid(format!(
                "curvature {} over {} mm turns more than pi per arc",
                self.curvature, self.length_mm
            ))),
            _ => Ok(()),
        }
    }

    /// Turn of one arc: the whole path for a C shape, half of it for an S shape.
    fn arc_turn(&self) -> f64 {
        match self.shape {
            Shape::Straight => 0.0,
            Shape::CShape if self.curvature == 0.0 => DEFAULT_C_TURN,
            Shape::CShape => self.curvature * self.length_mm,
            Shape::SShape if self.curvature == 0.0 => DEFAULT_S_ARC_TURN,
            Shape::SShape => self.curvature * self.length_mm / 2.0,
        }
    }
}

/// The probe calibration used by the simulator.
pub fn default_calibration() -> CalibrationSolution {
    let t_rigid =
        mat_from_pose6(&Pose6::new(-60.0, 8.0, 25.0, 0.25, -0.15, 0.4)).expect("finite pose");
    CalibrationSolution::known(t_rigid, DEFAULT_PIXEL_MM, DEFAULT_PIXEL_MM)
}

/// Position and heading after `s` mm along a constant-curvature piece that
/// starts at `p0` with heading `phi0`.
fn advance(p0: (f64, f64), phi0: f64, kappa: f64, s: f64) -> ((f64, f64), f64) {
    if kappa == 0.0 {
        let (sin, cos) = phi0.sin_cos();
        return ((p0.0 + s * cos, p0.1 + s * sin), phi0);
    }
    let phi = phi0 + kappa * s;
    let dx = (phi.sin() - phi0.sin()) / kappa;
    let dy = (phi0.cos() - phi.cos()) / kappa;
    ((p0.0 + dx, p0.1 + dy), phi)
}

/// Point and heading at arc length `s` of the centre path.
fn path_point(shape: Shape, length: f64, turn: f64, s: f64) -> ((f64, f64), f64) {
    match shape {
        Shape::Straight => advance((0.0, 0.0), 0.0, 0.0, s),
        Shape::CShape => advance((0.0, 0.0), -turn / 2.0, turn / length, s),
        Shape::SShape => {
            let half = length / 2.0;
            let kappa = turn / half;
            if s <= half {
                advance((0.0, 0.0), -turn / 2.0, kappa, s)
            } else {
                let (mid, phi) = advance((0.0, 0.0), -turn / 2.0, kappa, half);
                advance(mid, phi, -kappa, s - half)
            }
        }
    }
}

/// World rotation of the image frame for heading `phi`.
fn image_rotation(orientation: Orientation, phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    let tangent = Vector3::new(c, s, 0.0);
    let normal = Vector3::new(-s, c, 0.0);
    let down = -Vector3::z();
    let (x, y, z) = match orientation {
        Orientation::Perpendicular => (-normal, down, tangent),
        Orientation::Parallel => (tangent, down, normal),
    };
    Matrix3::from_columns(&[x, y, z])
}

/// Small random rigid perturbation: Gaussian translation, rotation about a
/// uniform axis by a Gaussian angle.
fn random_perturbation(rng: &mut StreamRng, sigma_trans: f64, sigma_rot: f64) -> RigidTransform {
    let t = Vector3::new(rng.gaussian(), rng.gaussian(), rng.gaussian()) * sigma_trans;
    let axis = Vector3::from(rng.unit_vector());
    let angle = rng.gaussian() * sigma_rot;
    RigidTransform::from_parts(axis_angle(&axis, angle), t)
}

/// Generates `camera <- tool` poses along the requested path at
/// [`FRAME_RATE`].
pub fn gen_trajectory(spec: &TrajectorySpec) -> Result<ScanPoses> {
    spec.validate()?;
    let n = spec.frame_count;
    let turn = spec.arc_turn();
    let scale = spec.calibration.scale()?;
    let centre = scale.pixel_to_mm(
        (spec.width - 1) as f64 / 2.0,
        (spec.height - 1) as f64 / 2.0,
    );
    let rigid_inv = spec.calibration.t_rigid.inverse();

    let mut images: Vec<RigidTransform> = (0..n)
        .map(|k| {
            let s = spec.length_mm * k as f64 / (n - 1) as f64;
            let ((x, y), phi) = path_point(spec.shape, spec.length_mm, turn, s);
            let r = image_rotation(spec.orientation, phi);
            RigidTransform::from_parts(r, Vector3::new(x, y, 0.0) - r * centre)
        })
        .collect();
    if spec.direction == Direction::Reverse {
        images.reverse();
    }

    let mut rng = StreamRng::new(spec.seed);
    let jitter = spec.jitter_trans > 0.0 || spec.jitter_rot > 0.0;
    let poses = images
        .iter()
        .map(|img| {
            let img = if jitter {
                img.compose(&random_perturbation(
                    &mut rng,
                    spec.jitter_trans,
                    spec.jitter_rot,
                ))
            } else {
                *img
            };
            img.compose(&rigid_inv)
        })
        .collect();
    let timestamps = (0..n).map(|k| k as f64 / FRAME_RATE).collect();
    ScanPoses::new(poses, timestamps)
}

/// Pin images from random probe poses around `pin_world`.
///
/// Each observation picks a pixel inside a 640x480 frame (40 px margin) and
/// a rotation, then places the probe so that pixel lands exactly on the
/// pin. Gaussian noise of `pixel_noise_std` is added to the recorded pixel.
pub fn gen_pinhead_observations(
    true_calib: &CalibrationSolution,
    pin_world: &Vector3<f64>,
    count: usize,
    pixel_noise_std: f64,
    seed: u64,
) -> Result<Vec<PinheadObservation>> {
    if count == 0 {
        return Err(Error::invalid("observation count must be at least 1"));
    }
    if !(pixel_noise_std >= 0.0 && pixel_noise_std.is_finite()) {
        return Err(Error::invalid(format!(
            "pixel noise must be non-negative, got {pixel_noise_std}"
        )));
    }
    let scale = true_calib.scale()?;
    let mut rng = StreamRng::new(seed);
    (0..count)
        .map(|_| {
            let u = rng.range(40.0, (DEFAULT_WIDTH - 40) as f64);
            let v = rng.range(40.0, (DEFAULT_HEIGHT - 40) as f64);
            let x_tool = true_calib.t_rigid.apply(&scale.pixel_to_mm(u, v));
            let rot = crate::se3::rot_z(rng.range(-0.8, 0.8))
                * crate::se3::rot_y(rng.range(-0.6, 0.6))
                * crate::se3::rot_x(rng.range(-0.6, 0.6));
            let t = pin_world - rot * x_tool;
            let (nu, nv) = (
                rng.gaussian() * pixel_noise_std,
                rng.gaussian() * pixel_noise_std,
            );
            PinheadObservation::new(
                RigidTransform::from_parts(rot, t),
                (u + nu).max(0.0),
                (v + nv).max(0.0),
            )
        })
        .collect()
}

/// Error model applied to ground-truth local transforms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorruptionSpec {
    pub sigma_rot: f64,
    pub sigma_trans: f64,
    /// Added to every local translation, mm.
    pub bias: [f64; 3],
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn is_zero(&self) -> bool {
        self.sigma_rot == 0.0 && self.sigma_trans == 0.0 && self.bias == [0.0; 3]
    }
}

/// Predicted locals `Δ_i·T_i` with `Δ_i` a random perturbation plus the bias.
pub fn corrupt_locals(
    gt_locals: &[RigidTransform],
    spec: &CorruptionSpec,
) -> Result<Vec<RigidTransform>> {
    if !(spec.sigma_rot >= 0.0 && spec.sigma_trans >= 0.0)
        || !spec.bias.iter().all(|b| b.is_finite())
    {
        return Err(Error::invalid(
            "corruption sigmas must be non-negative and the bias finite",
        ));
    }
    if spec.is_zero() {
        return Ok(gt_locals.to_vec());
    }
    let bias = Vector3::from(spec.bias);
    let mut rng = StreamRng::new(spec.seed);
    Ok(gt_locals
        .iter()
        .map(|t| {
            let mut delta = random_perturbation(&mut rng, spec.sigma_trans, spec.sigma_rot);
            delta.translation += bias;
            delta.compose(t)
        })
        .collect())
}

/// `per_frame` random landmarks on each non-reference frame.
pub fn gen_landmarks(
    frame_count: usize,
    per_frame: usize,
    width: u32,
    height: u32,
    seed: u64,
) -> LandmarkSet {
    let mut rng = StreamRng::new(seed);
    let mut entries = Vec::with_capacity(frame_count.saturating_sub(1) * per_frame);
    for frame_index in 1..frame_count {
        for _ in 0..per_frame {
            entries.push(Landmark {
                frame_index,
                u: rng.below(width as u64) as f64,
                v: rng.below(height as u64) as f64,
            });
        }
    }
    LandmarkSet::new(entries)
}
