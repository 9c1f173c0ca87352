//! Reconstruction error metrics for one scan.
//!
//! All four errors are the mean Euclidean distance between predicted and
//! ground-truth displacement vectors: GPE/LPE over every pixel of frames
//! `1..N`, GLE/LLE over the landmarks. Reconstructed positions are
//! `T_scale·p + ddf`, so the base position cancels and only the vector
//! difference is needed.
//!
//! Sums are accumulated per frame with Neumaier compensation and then
//! combined in frame order, which makes serial and parallel runs agree
//! bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddf::{
    ddf_landmarks, globals_from_locals, pixel_displacement, DdfSet, LandmarkSet, Level,
};
use crate::error::{Error, Result};
use crate::se3::{RigidTransform, ScaleTransform};

/// Per-scan prediction time limit (s).
pub const DEFAULT_RUNTIME_LIMIT: f64 = 120.0;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatus {
    Ok,
    Failed,
    Overtime,
}

/// Errors (mm) and runtime (s) of one team on one scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanMetricReport {
    pub gpe: Option<f64>,
    pub gle: Option<f64>,
    pub lpe: Option<f64>,
    pub lle: Option<f64>,
    pub runtime_s: f64,
    pub status: ScanStatus,
}

impl ScanMetricReport {
    pub fn failed(runtime_s: f64) -> Self {
        Self {
            gpe: None,
            gle: None,
            lpe: None,
            lle: None,
            runtime_s,
            status: ScanStatus::Failed,
        }
    }

    /// `[gpe, gle, lpe, lle]` when all are present and the scan did not fail.
    pub fn values(&self) -> Option<[f64; 4]> {
        if self.status == ScanStatus::Failed {
            return None;
        }
        Some([self.gpe?, self.gle?, self.lpe?, self.lle?])
    }
}

fn check_pair(pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "prediction has {} values, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if !pred.len().is_multiple_of(3) {
        return Err(Error::invalid(format!(
            "{} values is not a whole number of 3-vectors",
            pred.len()
        )));
    }
    Ok(())
}

fn error_sum(pred: &[f64], gt: &[f64]) -> CompensatedSum {
    let mut acc = CompensatedSum::default();
    for (p, g) in pred.chunks_exact(3).zip(gt.chunks_exact(3)) {
        let (dx, dy, dz) = (p[0] - g[0], p[1] - g[1], p[2] - g[2]);
        acc.add((dx * dx + dy * dy + dz * dz).sqrt());
    }
    acc
}

fn ordered_mean(parts: &[CompensatedSum], count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let mut total = CompensatedSum::default();
    for p in parts {
        total.merge(p);
    }
    total.value() / count as f64
}

/// Mean `‖pred − gt‖` over flat `x,y,z` arrays. Empty input gives 0.
pub fn mean_point_error(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(ordered_mean(&[error_sum(pred, gt)], pred.len() / 3))
}

/// [`mean_point_error`] reduced frame by frame (`frame_len` values per frame).
pub fn framewise_mean_error(pred: &[f64], gt: &[f64], frame_len: usize) -> Result<f64> {
    check_pair(pred, gt)?;
    if frame_len == 0 || !pred.len().is_multiple_of(frame_len) || !frame_len.is_multiple_of(3) {
        return Err(Error::invalid(format!(
            "frame length {frame_len} does not tile {} values",
            pred.len()
        )));
    }
    let parts: Vec<CompensatedSum> = pred
        .par_chunks(frame_len)
        .zip(gt.par_chunks(frame_len))
        .map(|(p, g)| error_sum(p, g))
        .collect();
    Ok(ordered_mean(&parts, pred.len() / 3))
}

pub(crate) fn finish(
    gpe: f64,
    gle: f64,
    lpe: f64,
    lle: f64,
    runtime_s: f64,
    limit_s: f64,
) -> ScanMetricReport {
    ScanMetricReport {
        gpe: Some(gpe),
        gle: Some(gle),
        lpe: Some(lpe),
        lle: Some(lle),
        runtime_s,
        status: if runtime_s > limit_s {
            ScanStatus::Overtime
        } else {
            ScanStatus::Ok
        },
    }
}

/// Scores a predicted DDF set against the ground truth.
///
/// Runtimes above `limit_s` are flagged `Overtime`; the metrics are still
/// reported.
pub fn evaluate_scan(
    pred: &DdfSet,
    gt: &DdfSet,
    runtime_s: f64,
    limit_s: f64,
) -> Result<ScanMetricReport> {
    if !pred.same_dimensions(gt) {
        return Err(Error::invalid(format!(
            "prediction is N={} {}x{} L={}, ground truth N={} {}x{} L={}",
            pred.frame_count,
            pred.width,
            pred.height,
            pred.landmark_count,
            gt.frame_count,
            gt.width,
            gt.height,
            gt.landmark_count
        )));
    }
    pred.check_shape()?;
    gt.check_shape()?;
    let frame_len = gt.frame_len();
    let dense = |p: &[f64], g: &[f64]| {
        if p.is_empty() {
            Ok(0.0)
        } else {
            framewise_mean_error(p, g, frame_len)
        }
    };
    let gpe = dense(&pred.gp, &gt.gp)?;
    let lpe = dense(&pred.lp, &gt.lp)?;
    let gle = mean_point_error(&pred.gl, &gt.gl)?;
    let lle = mean_point_error(&pred.ll, &gt.ll)?;
    Ok(finish(gpe, gle, lpe, lle, runtime_s, limit_s))
}

/// Error sum of one frame, computing both displacement fields on the fly.
fn streamed_frame_sum(
    pred: &RigidTransform,
    gt: &RigidTransform,
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> CompensatedSum {
    let mut acc = CompensatedSum::default();
    for v in 0..height {
        for u in 0..width {
            let (uf, vf) = (u as f64, v as f64);
            let p = pixel_displacement(pred, scale, uf, vf);
            let g = pixel_displacement(gt, scale, uf, vf);
            let (dx, dy, dz) = (p.x - g.x, p.y - g.y, p.z - g.z);
            acc.add((dx * dx + dy * dy + dz * dz).sqrt());
        }
    }
    acc
}

fn streamed_dense_error(
    pred: &[RigidTransform],
    gt: &[RigidTransform],
    scale: &ScaleTransform,
    width: u32,
    height: u32,
) -> f64 {
    let parts: Vec<CompensatedSum> = pred
        .par_iter()
        .zip(gt.par_iter())
        .map(|(p, g)| streamed_frame_sum(p, g, scale, width, height))
        .collect();
    ordered_mean(&parts, pred.len() * width as usize * height as usize)
}

/// Scores predicted local transforms against ground-truth ones without
/// materializing any dense field.
///
/// Gives bitwise the same result as building both [`DdfSet`]s and calling
/// [`evaluate_scan`], with no per-frame buffers at all.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_transforms(
    pred_locals: &[RigidTransform],
    gt_locals: &[RigidTransform],
    scale: &ScaleTransform,
    landmarks: &LandmarkSet,
    width: u32,
    height: u32,
    runtime_s: f64,
    limit_s: f64,
) -> Result<ScanMetricReport> {
    if pred_locals.len() != gt_locals.len() {
        return Err(Error::invalid(format!(
            "prediction has {} local transforms, ground truth {}",
            pred_locals.len(),
            gt_locals.len()
        )));
    }
    let pred_globals = globals_from_locals(pred_locals);
    let gt_globals = globals_from_locals(gt_locals);
    let gpe = streamed_dense_error(&pred_globals, &gt_globals, scale, width, height);
    let lpe = streamed_dense_error(pred_locals, gt_locals, scale, width, height);
    let gle = mean_point_error(
        &ddf_landmarks(
            &pred_globals,
            scale,
            landmarks,
            Level::Global,
            width,
            height,
        )?,
        &ddf_landmarks(&gt_globals, scale, landmarks, Level::Global, width, height)?,
    )?;
    let lle = mean_point_error(
        &ddf_landmarks(pred_locals, scale, landmarks, Level::Local, width, height)?,
        &ddf_landmarks(gt_locals, scale, landmarks, Level::Local, width, height)?,
    )?;
    Ok(finish(gpe, gle, lpe, lle, runtime_s, limit_s))
}

/// Adds the point errors of little-endian `f32` triples, as stored in a DDF
/// file, to `acc`. Feeding a frame through in order matches [`error_sum`] on
/// the widened values bit for bit.
pub(crate) fn add_errors_le_f32(acc: &mut CompensatedSum, pred: &[u8], gt: &[u8]) {
    let value =
        |b: &[u8], k: usize| f32::from_le_bytes([b[k], b[k + 1], b[k + 2], b[k + 3]]) as f64;
    for (p, g) in pred.chunks_exact(12).zip(gt.chunks_exact(12)) {
        let (dx, dy, dz) = (
            value(p, 0) - value(g, 0),
            value(p, 4) - value(g, 4),
            value(p, 8) - value(g, 8),
        );
        acc.add((dx * dx + dy * dy + dz * dz).sqrt());
    }
}

pub(crate) fn mean_of_parts(parts: &[CompensatedSum], count: usize) -> f64 {
    ordered_mean(parts, count)
}
