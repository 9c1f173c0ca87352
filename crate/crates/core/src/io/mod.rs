//! On-disk formats. See `FORMATS.md` at the repository root for the byte-level
//! description of each one.

mod calibration;
mod ddf_file;
mod report;
mod text;

pub use calibration::{
    calibration_from_str, calibration_to_string, read_calibration, write_calibration,
};
pub use ddf_file::{
    decode_ddf, encode_ddf, evaluate_ddf_files, read_ddf, write_ddf, DdfFile, FormatHeader,
    HEADER_LEN, MAGIC,
};
pub use report::{
    leaderboard_to_string, read_report, read_reports_dir, report_to_string, write_leaderboard,
    write_report, ReportRecord,
};
pub use text::{
    corner_tracks_to_string, landmarks_from_str, landmarks_to_string, observations_from_str,
    observations_to_string, pairs_from_str, poses_from_str, poses_to_string, read_landmarks,
    read_observations, read_pairs, read_poses, read_scores, scores_from_str, scores_to_string,
    write_landmarks, write_observations, write_poses, ScoreRow,
};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
