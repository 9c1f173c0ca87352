//! Metric reports and leaderboards (JSON).
//!
//! Keys are written in a fixed order so files diff cleanly. Raw metrics use
//! the shortest decimal that round-trips; leaderboard scores are printed
//! with exactly three decimals, the precision used for ranking.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_text};
use crate::error::{Error, Result};
use crate::metrics::ScanMetricReport;
use crate::ranking::{thousandths, LeaderboardEntry, OvertimePolicy};

/// A [`ScanMetricReport`] tagged with the team and scan it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub team: String,
    pub scan: String,
    #[serde(flatten)]
    pub report: ScanMetricReport,
}

pub fn report_to_string(record: &ReportRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(path: &Path, record: &ReportRecord) -> Result<()> {
    write_text(path, &report_to_string(record))
}

pub fn read_report(path: &Path) -> Result<ReportRecord> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        reason: format!("{}: {e}", path.display()),
    })
}

/// Every `*.json` report in `dir`, in file-name order.
pub fn read_reports_dir(dir: &Path) -> Result<Vec<ReportRecord>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths.iter().map(|p| read_report(p)).collect()
}

/// Three-decimal rendering consistent with the ranking's rounding.
fn fixed3(x: f64) -> String {
    let t = thousandths(x);
    let sign = if t < 0 { "-" } else { "" };
    format!("{sign}{}.{:03}", t.abs() / 1000, t.abs() % 1000)
}

fn number(x: f64) -> String {
    serde_json::to_string(&x).expect("number serializes")
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

pub fn leaderboard_to_string(
    entries: &[LeaderboardEntry],
    scans: usize,
    policy: OvertimePolicy,
) -> String {
    let policy = match policy {
        OvertimePolicy::Keep => "keep",
        OvertimePolicy::Fail => "fail",
    };
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"overtime_policy\": \"{policy}\",");
    let _ = writeln!(out, "  \"teams\": {},", entries.len());
    let _ = writeln!(out, "  \"scans\": {scans},");
    if entries.is_empty() {
        let _ = writeln!(out, "  \"entries\": []");
    } else {
        let _ = writeln!(out, "  \"entries\": [");
        for (k, e) in entries.iter().enumerate() {
            let raw = |i: usize| e.mean_raw.map_or("null".to_string(), |r| number(r[i]));
            let fields = [
                ("rank", e.rank.to_string()),
                ("team", quoted(&e.team)),
                ("overall", fixed3(e.overall)),
                ("gs", fixed3(e.gs)),
                ("ls", fixed3(e.ls)),
                ("ps", fixed3(e.ps)),
                ("lms", fixed3(e.lms)),
                ("gpe_norm", fixed3(e.mean_normalized[0])),
                ("gle_norm", fixed3(e.mean_normalized[1])),
                ("lpe_norm", fixed3(e.mean_normalized[2])),
                ("lle_norm", fixed3(e.mean_normalized[3])),
                ("gpe_mm", raw(0)),
                ("gle_mm", raw(1)),
                ("lpe_mm", raw(2)),
                ("lle_mm", raw(3)),
                ("mean_runtime_s", number(e.mean_runtime_s)),
                ("failed_scans", e.failed_scans.to_string()),
            ];
            let _ = writeln!(out, "    {{");
            for (i, (key, value)) in fields.iter().enumerate() {
                let comma = if i + 1 < fields.len() { "," } else { "" };
                let _ = writeln!(out, "      \"{key}\": {value}{comma}");
            }
            let comma = if k + 1 < entries.len() { "," } else { "" };
            let _ = writeln!(out, "    }}{comma}");
        }
        let _ = writeln!(out, "  ]");
    }
    let _ = writeln!(out, "}}");
    out
}

pub fn write_leaderboard(
    path: &Path,
    entries: &[LeaderboardEntry],
    scans: usize,
    policy: OvertimePolicy,
) -> Result<()> {
    write_text(path, &leaderboard_to_string(entries, scans, policy))
}
