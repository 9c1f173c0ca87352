//! Calibration files (TOML).

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::text::RIGIDITY_TOL;
use super::{read_text, write_text};
use crate::calib::CalibrationSolution;
use crate::error::{Error, Result};
use crate::se3::RigidTransform;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    sx: f64,
    sy: f64,
    /// Row-major image-to-tool rotation.
    rotation: Vec<f64>,
    /// Image-to-tool translation, mm.
    translation: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pin_world: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rms_residual: Option<f64>,
}

/// Serializes a calibration. `include_fit` adds the pin position and rms
/// residual of a solved calibration.
pub fn calibration_to_string(calib: &CalibrationSolution, include_fit: bool) -> String {
    let r = &calib.t_rigid.rotation;
    let file = CalibrationFile {
        sx: calib.sx,
        sy: calib.sy,
        rotation: (0..9).map(|k| r[(k / 3, k % 3)]).collect(),
        translation: calib.t_rigid.translation.iter().copied().collect(),
        pin_world: include_fit.then(|| calib.pin_world.iter().copied().collect()),
        rms_residual: include_fit.then_some(calib.rms_residual),
    };
    toml::to_string(&file).expect("plain numeric fields serialize")
}

fn line_of(text: &str, err: &toml::de::Error) -> usize {
    err.span().map_or(1, |s| {
        text[..s.start.min(text.len())].matches('\n').count() + 1
    })
}

fn vector(name: &str, values: &[f64], len: usize) -> Result<()> {
    if values.len() != len {
        return Err(Error::Schema(format!(
            "'{name}' needs {len} numbers, found {}",
            values.len()
        )));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation {
            location: name.to_string(),
            reason: "entries must be finite".into(),
        });
    }
    Ok(())
}

pub fn calibration_from_str(text: &str) -> Result<CalibrationSolution> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: line_of(text, &e),
        reason: e.message().to_string(),
    })?;
    let file: CalibrationFile = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Schema(e.message().to_string()))?;
    for (name, v) in [("sx", file.sx), ("sy", file.sy)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Validation {
                location: name.to_string(),
                reason: format!("scale must be positive, got {v}"),
            });
        }
    }
    vector("rotation", &file.rotation, 9)?;
    vector("translation", &file.translation, 3)?;
    if let Some(p) = &file.pin_world {
        vector("pin_world", p, 3)?;
    }
    let rotation = Matrix3::from_row_slice(&file.rotation);
    let translation = Vector3::from_column_slice(&file.translation);
    let t_rigid =
        RigidTransform::try_from_parts(rotation, translation, RIGIDITY_TOL).map_err(|e| {
            Error::Validation {
                location: "rotation".into(),
                reason: e.to_string(),
            }
        })?;
    let mut calib = CalibrationSolution::known(t_rigid, file.sx, file.sy);
    if let Some(p) = file.pin_world {
        calib.pin_world = Vector3::from_column_slice(&p);
    }
    if let Some(rms) = file.rms_residual {
        calib.rms_residual = rms;
    }
    Ok(calib)
}

pub fn write_calibration(
    path: &Path,
    calib: &CalibrationSolution,
    include_fit: bool,
) -> Result<()> {
    write_text(path, &calibration_to_string(calib, include_fit))
}

pub fn read_calibration(path: &Path) -> Result<CalibrationSolution> {
    calibration_from_str(&read_text(path)?)
}
