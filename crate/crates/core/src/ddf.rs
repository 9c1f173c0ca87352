//! Dense displacement fields (DDFs) for a scan.
//!
//! For frame `i ≥ 1` and a transform `T` into a reference image frame, the
//! displacement of pixel `p` is `T·T_scale·p − T_scale·p` (mm). With the
//! global transform `T_{0<-i}` this gives the global field, with the local
//! transform `T_{i-1<-i}` the local one. Dense arrays are stored frame-major,
//! then row-major over pixels (`v` outer, `u` inner), with `x, y, z`
//! interleaved; frame `i` sits at array index `i − 1`.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::calib::CalibrationSolution;
use crate::error::{Error, Result};
use crate::se3::{accumulate_chain, image_relative, relative_tool, RigidTransform, ScaleTransform};

/// A landmark on frame `frame_index` (0-based, never the first frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub frame_index: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    pub entries: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn new(entries: Vec<Landmark>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks every landmark against a scan of `frame_count` frames.
    pub fn validate(&self, frame_count: usize, width: u32, height: u32) -> Result<()> {
        for (row, lm) in self.entries.iter().enumerate() {
            let reason = if lm.frame_index == 0 {
                Some("frame 0 is the reference frame and carries no displacement".to_string())
            } else if lm.frame_index >= frame_count {
                Some(format!(
                    "frame {} outside 1..{}",
                    lm.frame_index,
                    frame_count.saturating_sub(1)
                ))
            } else if !(lm.u.is_finite() && lm.v.is_finite())
                || lm.u < 0.0
                || lm.v < 0.0
                || lm.u > (width as f64 - 1.0)
                || lm.v > (height as f64 - 1.0)
            {
                Some(format!(
                    "pixel ({}, {}) outside a {width}x{height} frame",
                    lm.u, lm.v
                ))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidLandmark { row, reason });
            }
        }
        Ok(())
    }
}

/// Tracked probe poses (`camera <- tool`) with timestamps in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoses {
    poses: Vec<RigidTransform>,
    timestamps: Vec<f64>,
}

impl ScanPoses {
    pub fn new(poses: Vec<RigidTransform>, timestamps: Vec<f64>) -> Result<Self> {
        if poses.len() != timestamps.len() {
            return Err(Error::invalid(format!(
                "{} poses but {} timestamps",
                poses.len(),
                timestamps.len()
            )));
        }
        if poses.len() < 2 {
            return Err(Error::InsufficientData(
                "a scan needs at least 2 frames".into(),
            ));
        }
        if let Some(k) = timestamps
            .windows(2)
            .position(|w| w[1].partial_cmp(&w[0]).is_none_or(|o| o.is_lt()))
        {
            return Err(Error::invalid(format!(
                "timestamps decrease at frame {}",
                k + 1
            )));
        }
        Ok(Self { poses, timestamps })
    }

    pub fn poses(&self) -> &[RigidTransform] {
        &self.poses
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Global,
    Local,
}

/// The four displacement sets of one scan, in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct DdfSet {
    pub width: u32,
    pub height: u32,
    /// Frames in the scan, including the reference frame.
    pub frame_count: u32,
    pub landmark_count: u32,
    pub gp: Vec<f64>,
    pub gl: Vec<f64>,
    pub lp: Vec<f64>,
    pub ll: Vec<f64>,
}

impl DdfSet {
    pub fn dense_len(frame_count: u32, width: u32, height: u32) -> usize {
        frame_count.saturating_sub(1) as usize * width as usize * height as usize * 3
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    pub fn check_shape(&self) -> Result<()> {
        let dense = Self::dense_len(self.frame_count, self.width, self.height);
        let sparse = self.landmark_count as usize * 3;
        if self.gp.len() != dense
            || self.lp.len() != dense
            || self.gl.len() != sparse
            || self.ll.len() != sparse
        {
            return Err(Error::invalid(format!(
                "DDF arrays do not match N={}, {}x{}, L={}",
                self.frame_count, self.width, self.height, self.landmark_count
            )));
        }
        Ok(())
    }

    pub fn same_dimensions(&self, other: &DdfSet) -> bool {
        (
            self.frame_count,
            self.width,
            self.height,
            self.landmark_count,
        ) == (
            other.frame_count,
            other.width,
            other.height,
            other.landmark_count,
        )
    }

    /// Builds all four sets from frame-to-previous-frame transforms
    /// (`locals[i-1] = T_{i-1<-i}`).
    pub fn from_locals(
        locals: &[RigidTransform],
        scale: &ScaleTransform,
        landmarks: &LandmarkSet,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let frame_count = locals.len() + 1;
        landmarks.validate(frame_count, width, height)?;
        let globals = globals_from_locals(locals);
        Ok(Self {
            width,
            height,
            frame_count: frame_count as u32,
            landmark_count: landmarks.len() as u32,
            gp: ddf_global_pixels(&globals, scale, width, height),
            gl: ddf_landmarks(&globals, scale, landmarks, Level::Global, width, height)?,
            lp: ddf_local_pixels(locals, scale, width, height),
            ll: ddf_landmarks(locals, scale, landmarks, Level::Local, width, height)?,
        })
    }
}

/// Accumulated frame-to-first-frame transforms.
pub fn globals_from_locals(locals: &[RigidTransform]) -> Vec<RigidTransform> {
    accumulate_chain(locals)
}

/// Displacement of pixel `(u, v)` under `t`.
#[inline]
pub fn pixel_displacement(
    t: &RigidTransform,
    scale: &ScaleTransform,
    u: f64,
    v: f64,
) -> Vector3<f64> {
    let q = scale.pixel_to_mm(u, v);
    t.apply(&q) - q
}

/// Writes one frame's displacements into `out` (`width·height·3` values).
pub fn frame_displacements(
    t: &RigidTransform,
    scale: &ScaleTransform,
    width: u32,
    height: u32,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), width as usize * height as usize * 3);
    for v in 0..height as usize {
        for u in 0..width as usize {
            let d = pixel_displacement(t, scale, u as f64, v as f64);
            let k = 3 * (v * width as usize + u);
            out[k] = d.x;
            out[k + 1] = d.y;
            out[k + 2] = d.z;
        }
    }
}

fn dense_field(
    transforms: &[RigidTransform],
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> Vec<f64> {
    let frame_len = width as usize * height as usize * 3;
    let mut out = vec![0.0; transforms.len() * frame_len];
    if frame_len == 0 {
        return out;
    }
    out.par_chunks_mut(frame_len)
        .zip(transforms.par_iter())
        .for_each(|(chunk, t)| frame_displacements(t, scale, width, height, chunk));
    out
}

/// Global pixel displacements; `globals[i-1] = T_{0<-i}`.
pub fn ddf_global_pixels(
    globals: &[RigidTransform],
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> Vec<f64> {
    dense_field(globals, scale, width, height)
}

/// Local pixel displacements; `locals[i-1] = T_{i-1<-i}`.
pub fn ddf_local_pixels(
    locals: &[RigidTransform],
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> Vec<f64> {
    dense_field(locals, scale, width, height)
}

/// Landmark displacements computed straight from the transforms.
///
/// `transforms` are the globals for [`Level::Global`] or the locals for
/// [`Level::Local`]; both are indexed by `frame_index − 1`.
pub fn ddf_landmarks(
    transforms: &[RigidTransform],
    scale: &ScaleTransform,
    landmarks: &LandmarkSet,
    level: Level,
    width: u32,
    height: u32,
) -> Result<Vec<f64>> {
    landmarks
        .validate(transforms.len() + 1, width, height)
        .map_err(|e| match e {
            Error::InvalidLandmark { row, reason } => Error::InvalidLandmark {
                row,
                reason: format!("{reason} ({level:?} level)"),
            },
            other => other,
        })?;
    let mut out = Vec::with_capacity(landmarks.len() * 3);
    for lm in &landmarks.entries {
        let d = pixel_displacement(&transforms[lm.frame_index - 1], scale, lm.u, lm.v);
        out.extend_from_slice(&[d.x, d.y, d.z]);
    }
    Ok(out)
}

/// Image-frame locals `T_{i-1<-i} = T_rigid⁻¹·T^{tool}_{i-1<-i}·T_rigid` of a tracked scan.
pub fn gt_locals(poses: &ScanPoses, t_rigid: &RigidTransform) -> Vec<RigidTransform> {
    poses
        .poses
        .windows(2)
        .map(|w| image_relative(&relative_tool(&w[1], &w[0]), t_rigid))
        .collect()
}

/// Probe poses that reproduce image-frame `locals`, starting from
/// `first_pose`. Inverse of [`gt_locals`].
pub fn poses_from_locals(
    first_pose: &RigidTransform,
    locals: &[RigidTransform],
    t_rigid: &RigidTransform,
    timestamps: Vec<f64>,
) -> Result<ScanPoses> {
    let rigid_inv = t_rigid.inverse();
    let base = first_pose.compose(t_rigid);
    let poses = std::iter::once(*first_pose)
        .chain(
            globals_from_locals(locals)
                .iter()
                .map(|g| base.compose(g).compose(&rigid_inv)),
        )
        .collect();
    ScanPoses::new(poses, timestamps)
}

/// Ground-truth DDFs of a tracked scan.
pub fn gt_ddf_from_scan(
    poses: &ScanPoses,
    calib: &CalibrationSolution,
    landmarks: &LandmarkSet,
    width: u32,
    height: u32,
) -> Result<DdfSet> {
    let scale = calib.scale()?;
    DdfSet::from_locals(
        &gt_locals(poses, &calib.t_rigid),
        &scale,
        landmarks,
        width,
        height,
    )
}
