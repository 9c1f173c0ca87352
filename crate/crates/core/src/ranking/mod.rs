//! Challenge scoring: per-scan min-max normalization, final and composite
//! scores, and the aggregate-then-rank leaderboard.
//!
//! For each scan and metric, `x* = (max − x)/(max − min)` over the teams
//! that produced a result. Teams that failed get 0 and do not enter the
//! min/max. When every non-failed team has the same value (range below
//! `1e-12`) they all get 1. The final score is the mean of the four
//! normalized metrics; teams are ranked by their mean final score over
//! scans, compared at three decimals, then by mean runtime, then by id.

mod power;
mod stats;

pub use power::{noncentral_t_cdf, paired_t_power, paired_t_sample_size, Tail};
pub use stats::{
    bootstrap_ranks, clt_distribution, pearson_r, BootstrapReport, CltEntry, CltReport,
    DEFAULT_RESAMPLES,
};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::metrics::{ScanMetricReport, ScanStatus};

/// Ranges below this are treated as a tie between all teams.
pub const ZERO_RANGE: f64 = 1e-12;

/// Normalizes one metric on one scan; lower raw values score higher.
pub fn normalize_metric(values: &[f64], failed: &[bool]) -> Vec<f64> {
    assert_eq!(values.len(), failed.len(), "one failure flag per team");
    let live = values
        .iter()
        .zip(failed)
        .filter(|(v, f)| !**f && v.is_finite())
        .map(|(v, _)| *v);
    let (min, max) = live.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    values
        .iter()
        .zip(failed)
        .map(|(&v, &f)| {
            if f || !v.is_finite() {
                0.0
            } else if max - min < ZERO_RANGE {
                1.0
            } else {
                ((max - v) / (max - min)).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Normalized metrics and derived scores of one team on one scan.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanScore {
    pub gpe_n: f64,
    pub gle_n: f64,
    pub lpe_n: f64,
    pub lle_n: f64,
    /// Final score.
    pub fs: f64,
    /// Global reconstruction score.
    pub gs: f64,
    /// Local reconstruction score.
    pub ls: f64,
    /// Pixel reconstruction score.
    pub ps: f64,
    /// Landmark reconstruction score.
    pub lms: f64,
}

impl ScanScore {
    pub fn from_normalized(gpe_n: f64, gle_n: f64, lpe_n: f64, lle_n: f64) -> Self {
        Self {
            gpe_n,
            gle_n,
            lpe_n,
            lle_n,
            fs: 0.25 * gpe_n + 0.25 * gle_n + 0.25 * lpe_n + 0.25 * lle_n,
            gs: 0.5 * gpe_n + 0.5 * gle_n,
            ls: 0.5 * lpe_n + 0.5 * lle_n,
            ps: 0.5 * gpe_n + 0.5 * lpe_n,
            lms: 0.5 * gle_n + 0.5 * lle_n,
        }
    }
}

/// What to do with scans whose prediction exceeded the runtime limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OvertimePolicy {
    #[default]
    Keep,
    Fail,
}

fn is_failed(report: Option<&ScanMetricReport>, policy: OvertimePolicy) -> bool {
    match report {
        None => true,
        Some(r) => {
            let status_failed = match r.status {
                ScanStatus::Failed => true,
                ScanStatus::Overtime => policy == OvertimePolicy::Fail,
                ScanStatus::Ok => false,
            };
            status_failed || r.values().is_none()
        }
    }
}

/// Scores every team on one scan. `None` marks a missing submission.
pub fn scan_scores(reports: &[Option<ScanMetricReport>], policy: OvertimePolicy) -> Vec<ScanScore> {
    let failed: Vec<bool> = reports
        .iter()
        .map(|r| is_failed(r.as_ref(), policy))
        .collect();
    let column = |k: usize| -> Vec<f64> {
        reports
            .iter()
            .map(|r| r.and_then(|r| r.values()).map_or(f64::NAN, |v| v[k]))
            .collect()
    };
    let norm: Vec<Vec<f64>> = (0..4)
        .map(|k| normalize_metric(&column(k), &failed))
        .collect();
    (0..reports.len())
        .map(|t| ScanScore::from_normalized(norm[0][t], norm[1][t], norm[2][t], norm[3][t]))
        .collect()
}

/// Score rounded to three decimals, as an integer number of thousandths.
pub fn thousandths(x: f64) -> i64 {
    (x * 1000.0).round() as i64
}

pub fn round3(x: f64) -> f64 {
    thousandths(x) as f64 / 1000.0
}

/// Ranking order: higher rounded overall first, then lower runtime, then id.
pub fn compare_teams(a: (f64, f64, &str), b: (f64, f64, &str)) -> Ordering {
    thousandths(b.0)
        .cmp(&thousandths(a.0))
        .then_with(|| a.1.total_cmp(&b.1))
        .then_with(|| a.2.cmp(b.2))
}

/// 1-based rank of each team.
pub fn assign_ranks(overall: &[f64], runtime: &[f64], ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..overall.len()).collect();
    order.sort_by(|&a, &b| {
        compare_teams(
            (overall[a], runtime[a], &ids[a]),
            (overall[b], runtime[b], &ids[b]),
        )
    });
    let mut ranks = vec![0; overall.len()];
    for (pos, &t) in order.iter().enumerate() {
        ranks[t] = pos + 1;
    }
    ranks
}

/// One leaderboard row. Score means are exact; rounding happens only for
/// comparison and display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub team: String,
    pub rank: usize,
    pub overall: f64,
    pub gs: f64,
    pub ls: f64,
    pub ps: f64,
    pub lms: f64,
    pub mean_runtime_s: f64,
    /// Mean normalized `[gpe, gle, lpe, lle]` over all scans.
    pub mean_normalized: [f64; 4],
    /// Mean raw `[gpe, gle, lpe, lle]` over the scans the team completed.
    pub mean_raw: Option<[f64; 4]>,
    pub failed_scans: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Ranks teams from per-scan scores (`scores[scan][team]`) and runtimes
/// (`runtimes[scan][team]`). Entries come back in rank order.
pub fn rank_teams(
    ids: &[String],
    scores: &[Vec<ScanScore>],
    runtimes: &[Vec<f64>],
) -> Vec<LeaderboardEntry> {
    let teams = ids.len();
    let col = |t: usize, f: fn(&ScanScore) -> f64| mean(scores.iter().map(|s| f(&s[t])));
    let overall: Vec<f64> = (0..teams).map(|t| col(t, |s| s.fs)).collect();
    let runtime: Vec<f64> = (0..teams)
        .map(|t| mean(runtimes.iter().map(|r| r[t])))
        .collect();
    let ranks = assign_ranks(&overall, &runtime, ids);
    let mut entries: Vec<LeaderboardEntry> = (0..teams)
        .map(|t| LeaderboardEntry {
            team: ids[t].clone(),
            rank: ranks[t],
            overall: overall[t],
            gs: col(t, |s| s.gs),
            ls: col(t, |s| s.ls),
            ps: col(t, |s| s.ps),
            lms: col(t, |s| s.lms),
            mean_runtime_s: runtime[t],
            mean_normalized: [
                col(t, |s| s.gpe_n),
                col(t, |s| s.gle_n),
                col(t, |s| s.lpe_n),
                col(t, |s| s.lle_n),
            ],
            mean_raw: None,
            failed_scans: 0,
        })
        .collect();
    entries.sort_by_key(|e| e.rank);
    entries
}

/// Reports for every (scan, team) pair of a challenge.
#[derive(Debug, Clone, Default)]
pub struct Tournament {
    pub teams: Vec<String>,
    pub scans: Vec<String>,
    /// `reports[scan][team]`; `None` is a missing submission.
    pub reports: Vec<Vec<Option<ScanMetricReport>>>,
}

impl Tournament {
    /// Assembles a tournament from `(team, scan, report)` records; teams and
    /// scans are sorted by id.
    pub fn from_records<I>(records: I) -> Self
    where
        I: IntoIterator<Item = (String, String, ScanMetricReport)>,
    {
        let records: Vec<_> = records.into_iter().collect();
        let mut teams: Vec<String> = records.iter().map(|r| r.0.clone()).collect();
        let mut scans: Vec<String> = records.iter().map(|r| r.1.clone()).collect();
        teams.sort();
        teams.dedup();
        scans.sort();
        scans.dedup();
        let mut reports = vec![vec![None; teams.len()]; scans.len()];
        for (team, scan, report) in records {
            let t = teams.binary_search(&team).expect("collected");
            let s = scans.binary_search(&scan).expect("collected");
            reports[s][t] = Some(report);
        }
        Self {
            teams,
            scans,
            reports,
        }
    }

    pub fn scores(&self, policy: OvertimePolicy) -> Vec<Vec<ScanScore>> {
        self.reports
            .iter()
            .map(|r| scan_scores(r, policy))
            .collect()
    }

    fn runtimes(&self) -> Vec<Vec<f64>> {
        self.reports
            .iter()
            .map(|row| row.iter().map(|r| r.map_or(0.0, |r| r.runtime_s)).collect())
            .collect()
    }

    /// Final-score matrix `fs[team][scan]`.
    pub fn final_scores(&self, policy: OvertimePolicy) -> Vec<Vec<f64>> {
        let scores = self.scores(policy);
        (0..self.teams.len())
            .map(|t| scores.iter().map(|s| s[t].fs).collect())
            .collect()
    }

    pub fn leaderboard(&self, policy: OvertimePolicy) -> Vec<LeaderboardEntry> {
        let mut entries = rank_teams(&self.teams, &self.scores(policy), &self.runtimes());
        for e in &mut entries {
            let t = self.teams.binary_search(&e.team).expect("known team");
            let completed: Vec<[f64; 4]> = self
                .reports
                .iter()
                .filter(|row| !is_failed(row[t].as_ref(), policy))
                .filter_map(|row| row[t].and_then(|r| r.values()))
                .collect();
            e.failed_scans = self.scans.len() - completed.len();
            if !completed.is_empty() {
                e.mean_raw = Some(std::array::from_fn(|k| {
                    mean(completed.iter().map(|v| v[k]))
                }));
            }
        }
        entries
    }
}
