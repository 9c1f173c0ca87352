//! Rigid-transform algebra for the image, tracker-tool and camera frames.
//!
//! Transforms are written `T_{to<-from}`: applying `T_{j<-i}` to a point
//! expressed in frame `i` yields the same point expressed in frame `j`.
//! Composition follows matrix multiplication, so
//! `compose(T_{k<-j}, T_{j<-i}) = T_{k<-i}`.
//!
//! Euler angles use the intrinsic Z-Y-X convention, `R = Rz(rz)·Ry(ry)·Rx(rx)`,
//! in radians. Image pixels are addressed with the origin at the centre of
//! the top-left pixel, `u` to the right and `v` downwards.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Drift in `‖RᵀR − I‖_F` above which a composed rotation is re-projected.
pub const ORTHONORMAL_DRIFT: f64 = 1e-9;

/// Below this `|cos ry|` the Z-Y-X decomposition is treated as gimbal-locked.
pub const GIMBAL_EPS: f64 = 1e-9;

/// Rigid transform: rotation followed by translation (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform without checking rotation validity.
    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a transform, checking orthonormality and handedness within `tol`.
    pub fn try_from_parts(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tol: f64,
    ) -> Result<Self> {
        let t = Self::from_parts(rotation, translation);
        t.validate(tol)?;
        Ok(t)
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::from_parts(Matrix3::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::from_parts(rotation, Vector3::zeros())
    }

    /// Reads a homogeneous 4×4 matrix. The bottom row must be `(0,0,0,1)`
    /// and the rotation block must be a proper rotation within `tol`.
    pub fn try_from_homogeneous(m: &Matrix4<f64>, tol: f64) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::invalid(format!(
                "homogeneous bottom row must be (0,0,0,1), got {bottom:?}"
            )));
        }
        let rotation = m.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::try_from_parts(rotation, translation, tol)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if !self
            .rotation
            .iter()
            .chain(self.translation.iter())
            .all(|x| x.is_finite())
        {
            return Err(Error::invalid("transform has non-finite entries"));
        }
        let ortho = self.orthonormality_error();
        if ortho > tol {
            return Err(Error::invalid(format!(
                "rotation not orthonormal (‖RᵀR−I‖ = {ortho:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Homogeneous product `self · other`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut out = RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        };
        if out.orthonormality_error() > ORTHONORMAL_DRIFT {
            out.rotation = nearest_rotation(&out.rotation);
        }
        out
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Largest absolute element-wise difference of the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let r = (self.rotation - other.rotation).amax();
        let t = (self.translation - other.translation).amax();
        r.max(t)
    }

    /// Rotation angle of this transform, radians in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Polar projection of `m` onto SO(3).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fix = u;
        u_fix.column_mut(2).neg_mut();
        r = u_fix * v_t;
    }
    r
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation of `angle` radians about a unit `axis` (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let (s, c) = angle.sin_cos();
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * s + kx * kx * (1.0 - c)
}

/// Six-parameter pose: translation in mm and Z-Y-X Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose6 {
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl Pose6 {
    pub fn new(tx: f64, ty: f64, tz: f64, rx: f64, ry: f64, rz: f64) -> Self {
        Self {
            tx,
            ty,
            tz,
            rx,
            ry,
            rz,
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.tx, self.ty, self.tz, self.rx, self.ry, self.rz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Materializes a pose as `Rz(rz)·Ry(ry)·Rx(rx)` plus translation.
pub fn mat_from_pose6(pose: &Pose6) -> Result<RigidTransform> {
    if !pose.is_finite() {
        return Err(Error::invalid(format!("non-finite pose {pose:?}")));
    }
    let rotation = rot_z(pose.rz) * rot_y(pose.ry) * rot_x(pose.rx);
    Ok(RigidTransform::from_parts(
        rotation,
        Vector3::new(pose.tx, pose.ty, pose.tz),
    ))
}

/// Inverse of [`mat_from_pose6`].
///
/// At gimbal lock (`|cos ry| < GIMBAL_EPS`) `rx` is fixed to zero and the
/// remaining in-plane rotation goes into `rz`.
pub fn pose6_from_mat(t: &RigidTransform) -> Pose6 {
    let r = &t.rotation;
    let cy = (r[(0, 0)] * r[(0, 0)] + r[(1, 0)] * r[(1, 0)]).sqrt();
    let ry = (-r[(2, 0)])
        .atan2(cy)
        .clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    let (rx, rz) = if cy >= GIMBAL_EPS {
        (r[(2, 1)].atan2(r[(2, 2)]), r[(1, 0)].atan2(r[(0, 0)]))
    } else {
        // With rx = 0 the first two columns reduce to (0,0,∓1) and (−sz, cz, 0).
        (0.0, (-r[(0, 1)]).atan2(r[(1, 1)]))
    };
    Pose6 {
        tx: t.translation.x,
        ty: t.translation.y,
        tz: t.translation.z,
        rx: wrap_half_open(rx),
        ry,
        rz: wrap_half_open(rz),
    }
}

/// Maps `-π` to `π` so angles land in `(−π, π]`.
fn wrap_half_open(a: f64) -> f64 {
    if a <= -std::f64::consts::PI {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// Tool-to-tool transform `T_{j<-i} = (T_j^{cam<-tool})⁻¹ · T_i^{cam<-tool}`.
pub fn relative_tool(t_i_cam: &RigidTransform, t_j_cam: &RigidTransform) -> RigidTransform {
    t_j_cam.inverse().compose(t_i_cam)
}

/// Image-mm to image-mm transform `T_rigid⁻¹ · T_tool_rel · T_rigid`.
///
/// Evaluated as `R' = Rcᵀ·R·Rc`, `t' = Rcᵀ·(R·tc + t − tc)`, so an identity
/// tool motion maps to the identity exactly.
pub fn image_relative(t_tool_rel: &RigidTransform, t_rigid: &RigidTransform) -> RigidTransform {
    let rc_t = t_rigid.rotation.transpose();
    let rotation = if t_tool_rel.rotation == Matrix3::identity() {
        Matrix3::identity()
    } else {
        rc_t * t_tool_rel.rotation * t_rigid.rotation
    };
    let shifted =
        t_tool_rel.rotation * t_rigid.translation + t_tool_rel.translation - t_rigid.translation;
    let mut out = RigidTransform::from_parts(rotation, rc_t * shifted);
    if out.orthonormality_error() > ORTHONORMAL_DRIFT {
        out.rotation = nearest_rotation(&out.rotation);
    }
    out
}

/// Pixel-to-mm scaling `diag(sx, sy, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTransform {
    sx: f64,
    sy: f64,
}

impl ScaleTransform {
    pub fn new(sx: f64, sy: f64) -> Result<Self> {
        if !(sx.is_finite() && sy.is_finite() && sx > 0.0 && sy > 0.0) {
            return Err(Error::invalid(format!(
                "scale factors must be positive, got ({sx}, {sy})"
            )));
        }
        Ok(Self { sx, sy })
    }

    pub fn unit() -> Self {
        Self { sx: 1.0, sy: 1.0 }
    }

    pub fn sx(&self) -> f64 {
        self.sx
    }

    pub fn sy(&self) -> f64 {
        self.sy
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(self.sx, self.sy, 1.0, 1.0))
    }

    /// Pixel `(u, v)` in the image plane, in image mm.
    #[inline]
    pub fn pixel_to_mm(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new(self.sx * u, self.sy * v, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Pixel,
    Millimetre,
}

/// Points tagged with their unit. Pixel points lie in the image plane (`z = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: Vec<Vector3<f64>>,
    unit: Unit,
}

impl PointSet {
    pub fn pixels(uv: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            coords: uv
                .into_iter()
                .map(|(u, v)| Vector3::new(u, v, 0.0))
                .collect(),
            unit: Unit::Pixel,
        }
    }

    pub fn millimetres(coords: Vec<Vector3<f64>>) -> Self {
        Self {
            coords,
            unit: Unit::Millimetre,
        }
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn coords(&self) -> &[Vector3<f64>] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Maps pixel points to mm: each row is `t · scale · (u, v, 0, 1)`.
pub fn transform_points(
    t: &RigidTransform,
    scale: &ScaleTransform,
    pts: &PointSet,
) -> Result<PointSet> {
    if pts.unit != Unit::Pixel {
        return Err(Error::invalid("transform_points expects pixel-unit points"));
    }
    if let Some(bad) = pts.coords.iter().position(|p| p.z != 0.0) {
        return Err(Error::invalid(format!(
            "pixel point {bad} is off the image plane"
        )));
    }
    let coords = pts
        .coords
        .par_iter()
        .map(|p| t.apply(&scale.pixel_to_mm(p.x, p.y)))
        .collect();
    Ok(PointSet::millimetres(coords))
}

/// Running products `locals[0]·…·locals[k]`.
pub fn accumulate_chain(locals: &[RigidTransform]) -> Vec<RigidTransform> {
    let mut out: Vec<RigidTransform> = Vec::with_capacity(locals.len());
    for local in locals {
        let next = match out.last() {
            Some(prev) => prev.compose(local),
            None => *local,
        };
        out.push(next);
    }
    out
}

/// Corner pixels ordered top-left, top-right, bottom-left, bottom-right.
pub fn frame_corners(width: u32, height: u32) -> Result<PointSet> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "frame dimensions must be nonzero, got {width}x{height}"
        )));
    }
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    Ok(PointSet::pixels([(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]))
}

/// Cumulative corner travel of a scan, in mm.
///
/// `globals` holds the frame-to-reference transforms of frames `1..N`; frame
/// 0 is the identity. Each consecutive pair contributes the mean Euclidean
/// displacement of the four corners.
pub fn scan_length(
    globals: &[RigidTransform],
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> Result<f64> {
    let corners = frame_corners(width, height)?;
    let mm: Vec<Vector3<f64>> = corners
        .coords
        .iter()
        .map(|p| scale.pixel_to_mm(p.x, p.y))
        .collect();
    let identity = RigidTransform::identity();
    let mut prev: Vec<Vector3<f64>> = mm.iter().map(|p| identity.apply(p)).collect();
    let mut total = 0.0;
    for g in globals {
        let cur: Vec<Vector3<f64>> = mm.iter().map(|p| g.apply(p)).collect();
        let step: f64 = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            / 4.0;
        total += step;
        prev = cur;
    }
    Ok(total)
}

/// Corner positions (mm, reference-frame coordinates) of every frame,
/// frame 0 first. Corners are ordered as in [`frame_corners`].
pub fn corner_tracks(
    globals: &[RigidTransform],
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> Result<Vec<[Vector3<f64>; 4]>> {
    let corners = frame_corners(width, height)?;
    let mm: Vec<Vector3<f64>> = corners
        .coords
        .iter()
        .map(|p| scale.pixel_to_mm(p.x, p.y))
        .collect();
    let at = |t: &RigidTransform| {
        [
            t.apply(&mm[0]),
            t.apply(&mm[1]),
            t.apply(&mm[2]),
            t.apply(&mm[3]),
        ]
    };
    Ok(std::iter::once(at(&RigidTransform::identity()))
        .chain(globals.iter().map(at))
        .collect())
}
