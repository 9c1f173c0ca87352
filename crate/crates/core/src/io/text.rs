//! Comma-separated text formats: poses, landmarks, pinhead observations,
//! per-scan scores, numeric pairs and corner tracks.
//!
//! Every file may start with one header line; blank lines and lines
//! starting with `#` are ignored. Line numbers in errors are 1-based.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix4, Vector3};

use super::{read_text, write_text};
use crate::calib::PinheadObservation;
use crate::ddf::{Landmark, LandmarkSet, ScanPoses};
use crate::error::{Error, Result};
use crate::se3::RigidTransform;

/// Orthonormality tolerance applied to matrices read from text.
pub const RIGIDITY_TOL: f64 = 1e-6;

const POSE_HEADER: &str =
    "frame_index,timestamp_s,m00,m01,m02,m03,m10,m11,m12,m13,m20,m21,m22,m23,m30,m31,m32,m33";
const OBS_HEADER: &str = "u,v,m00,m01,m02,m03,m10,m11,m12,m13,m20,m21,m22,m23,m30,m31,m32,m33";
const LANDMARK_HEADER: &str = "frame_index,u,v";
const SCORE_HEADER: &str = "team,scan,score,runtime_s";
const TRACK_HEADER: &str =
    "frame_index,tl_x,tl_y,tl_z,tr_x,tr_y,tr_z,bl_x,bl_y,bl_z,br_x,br_y,br_z";

/// Data rows as `(line number, fields)`. The first row is taken as a header
/// and skipped when its field `numeric` does not parse as a number.
fn rows(text: &str, numeric: usize) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(k, line)| (k + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
        .map(|(n, line)| (n, line.split(',').map(str::trim).collect::<Vec<_>>()))
        .enumerate()
        .filter(move |(k, (_, fields))| {
            *k != 0 || fields.get(numeric).is_some_and(|f| f.parse::<f64>().is_ok())
        })
        .map(|(_, row)| row)
}

fn expect_fields(line: usize, fields: &[&str], count: usize) -> Result<()> {
    if fields.len() != count {
        return Err(Error::Parse {
            line,
            reason: format!("expected {count} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

fn number(line: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            reason: format!("'{field}' is not a finite number"),
        }),
    }
}

fn index(line: usize, field: &str) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::Parse {
        line,
        reason: format!("'{field}' is not a non-negative integer"),
    })
}

fn matrix(line: usize, fields: &[&str]) -> Result<Matrix4<f64>> {
    let mut m = Matrix4::zeros();
    for (k, f) in fields.iter().enumerate() {
        m[(k / 4, k % 4)] = number(line, f)?;
    }
    Ok(m)
}

fn push_matrix(out: &mut String, t: &RigidTransform, exp: bool) {
    let m = t.to_homogeneous();
    for r in 0..4 {
        for c in 0..4 {
            if exp {
                let _ = write!(out, ",{:.16e}", m[(r, c)]);
            } else {
                let _ = write!(out, ",{}", m[(r, c)]);
            }
        }
    }
}

pub fn poses_to_string(scan: &ScanPoses) -> String {
    let mut out = String::from(POSE_HEADER);
    out.push('\n');
    for (k, (pose, ts)) in scan.poses().iter().zip(scan.timestamps()).enumerate() {
        let _ = write!(out, "{k},{ts:.16e}");
        push_matrix(&mut out, pose, true);
        out.push('\n');
    }
    out
}

pub fn poses_from_str(text: &str) -> Result<ScanPoses> {
    let mut poses = Vec::new();
    let mut timestamps = Vec::new();
    for (line, fields) in rows(text, 0) {
        expect_fields(line, &fields, 18)?;
        let frame = index(line, fields[0])?;
        if frame != poses.len() {
            return Err(Error::Validation {
                location: format!("frame {frame} (line {line})"),
                reason: format!("expected frame index {}", poses.len()),
            });
        }
        let ts = number(line, fields[1])?;
        let pose = RigidTransform::try_from_homogeneous(&matrix(line, &fields[2..])?, RIGIDITY_TOL)
            .map_err(|e| Error::Validation {
                location: format!("frame {frame} (line {line})"),
                reason: e.to_string(),
            })?;
        poses.push(pose);
        timestamps.push(ts);
    }
    ScanPoses::new(poses, timestamps)
}

pub fn write_poses(path: &Path, scan: &ScanPoses) -> Result<()> {
    write_text(path, &poses_to_string(scan))
}

pub fn read_poses(path: &Path) -> Result<ScanPoses> {
    poses_from_str(&read_text(path)?)
}

pub fn landmarks_to_string(set: &LandmarkSet) -> String {
    let mut out = String::from(LANDMARK_HEADER);
    out.push('\n');
    for lm in &set.entries {
        let _ = writeln!(out, "{},{},{}", lm.frame_index, lm.u, lm.v);
    }
    out
}

/// Parses landmarks. Bounds are checked later, against the scan they are
/// used with.
pub fn landmarks_from_str(text: &str) -> Result<LandmarkSet> {
    let entries = rows(text, 0)
        .map(|(line, fields)| {
            expect_fields(line, &fields, 3)?;
            Ok(Landmark {
                frame_index: index(line, fields[0])?,
                u: number(line, fields[1])?,
                v: number(line, fields[2])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LandmarkSet::new(entries))
}

pub fn write_landmarks(path: &Path, set: &LandmarkSet) -> Result<()> {
    write_text(path, &landmarks_to_string(set))
}

pub fn read_landmarks(path: &Path) -> Result<LandmarkSet> {
    landmarks_from_str(&read_text(path)?)
}

pub fn observations_to_string(obs: &[PinheadObservation]) -> String {
    let mut out = String::from(OBS_HEADER);
    out.push('\n');
    for o in obs {
        let _ = write!(out, "{},{}", o.u, o.v);
        push_matrix(&mut out, &o.t_cam_tool, false);
        out.push('\n');
    }
    out
}

pub fn observations_from_str(text: &str) -> Result<Vec<PinheadObservation>> {
    rows(text, 0)
        .map(|(line, fields)| {
            expect_fields(line, &fields, 18)?;
            let (u, v) = (number(line, fields[0])?, number(line, fields[1])?);
            let located = |e: Error| Error::Validation {
                location: format!("line {line}"),
                reason: e.to_string(),
            };
            let pose =
                RigidTransform::try_from_homogeneous(&matrix(line, &fields[2..])?, RIGIDITY_TOL)
                    .map_err(located)?;
            PinheadObservation::new(pose, u, v).map_err(located)
        })
        .collect()
}

pub fn write_observations(path: &Path, obs: &[PinheadObservation]) -> Result<()> {
    write_text(path, &observations_to_string(obs))
}

pub fn read_observations(path: &Path) -> Result<Vec<PinheadObservation>> {
    observations_from_str(&read_text(path)?)
}

/// Final score and runtime of one team on one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub team: String,
    pub scan: String,
    pub score: f64,
    pub runtime_s: f64,
}

pub fn scores_to_string(rows: &[ScoreRow]) -> String {
    let mut out = String::from(SCORE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.team, r.scan, r.score, r.runtime_s);
    }
    out
}

pub fn scores_from_str(text: &str) -> Result<Vec<ScoreRow>> {
    rows(text, 2)
        .map(|(line, fields)| {
            expect_fields(line, &fields, 4)?;
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::Parse {
                    line,
                    reason: "team and scan ids must be non-empty".into(),
                });
            }
            Ok(ScoreRow {
                team: fields[0].to_string(),
                scan: fields[1].to_string(),
                score: number(line, fields[2])?,
                runtime_s: number(line, fields[3])?,
            })
        })
        .collect()
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    scores_from_str(&read_text(path)?)
}

/// Two numeric columns, e.g. scan length against error.
pub fn pairs_from_str(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, fields) in rows(text, 0) {
        expect_fields(line, &fields, 2)?;
        xs.push(number(line, fields[0])?);
        ys.push(number(line, fields[1])?);
    }
    Ok((xs, ys))
}

pub fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    pairs_from_str(&read_text(path)?)
}

/// Per-frame corner coordinates as produced by [`crate::se3::corner_tracks`].
pub fn corner_tracks_to_string(tracks: &[[Vector3<f64>; 4]]) -> String {
    let mut out = String::from(TRACK_HEADER);
    out.push('\n');
    for (k, corners) in tracks.iter().enumerate() {
        let _ = write!(out, "{k}");
        for c in corners {
            let _ = write!(out, ",{},{},{}", c.x, c.y, c.z);
        }
        out.push('\n');
    }
    out
}
