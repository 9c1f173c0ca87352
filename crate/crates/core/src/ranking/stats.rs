//! Ranking stability and descriptive statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assign_ranks;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub const DEFAULT_RESAMPLES: usize = 2000;

/// Rank distribution of each team under bootstrap resampling of the scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub teams: Vec<String>,
    /// `frequencies[team][rank - 1]`: share of resamples with that rank.
    pub frequencies: Vec<Vec<f64>>,
    pub median_rank: Vec<f64>,
    pub resamples: usize,
    pub seed: u64,
}

impl BootstrapReport {
    /// Most frequent rank of each team (1-based), lowest rank on ties.
    pub fn modal_rank(&self) -> Vec<usize> {
        self.frequencies
            .iter()
            .map(|row| {
                let mut best = 0;
                for (k, f) in row.iter().enumerate() {
                    if *f > row[best] {
                        best = k;
                    }
                }
                best + 1
            })
            .collect()
    }
}

/// Bootstraps the leaderboard.
///
/// `fs[team][scan]` are final scores and `runtimes[team][scan]` the
/// matching runtimes used for tie-breaks. Resample `r` draws scan indices
/// with replacement from its own generator stream `(seed, r)`, so the
/// report does not depend on thread scheduling.
pub fn bootstrap_ranks(
    ids: &[String],
    fs: &[Vec<f64>],
    runtimes: &[Vec<f64>],
    resamples: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    let teams = ids.len();
    if fs.len() != teams || runtimes.len() != teams {
        return Err(Error::invalid(
            "score and runtime matrices need one row per team",
        ));
    }
    let scans = fs.first().map_or(0, Vec::len);
    if scans == 0 {
        return Err(Error::InsufficientData(
            "bootstrap needs at least one scan".into(),
        ));
    }
    if fs.iter().chain(runtimes).any(|row| row.len() != scans) {
        return Err(Error::invalid(
            "every team needs a score and runtime for every scan",
        ));
    }
    if resamples == 0 {
        return Err(Error::invalid("resample count must be positive"));
    }

    let ranks: Vec<Vec<usize>> = (0..resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = StreamRng::with_stream(seed, r);
            let picks: Vec<usize> = (0..scans)
                .map(|_| rng.below(scans as u64) as usize)
                .collect();
            let mean_of =
                |row: &Vec<f64>| picks.iter().map(|&s| row[s]).sum::<f64>() / scans as f64;
            let overall: Vec<f64> = fs.iter().map(mean_of).collect();
            let runtime: Vec<f64> = runtimes.iter().map(mean_of).collect();
            assign_ranks(&overall, &runtime, ids)
        })
        .collect();

    let mut counts = vec![vec![0usize; teams]; teams];
    for sample in &ranks {
        for (t, &rank) in sample.iter().enumerate() {
            counts[t][rank - 1] += 1;
        }
    }
    let frequencies = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / resamples as f64).collect())
        .collect();
    let median_rank = (0..teams)
        .map(|t| {
            let mut r: Vec<usize> = ranks.iter().map(|s| s[t]).collect();
            r.sort_unstable();
            let mid = r.len() / 2;
            if r.len() % 2 == 1 {
                r[mid] as f64
            } else {
                0.5 * (r[mid - 1] + r[mid]) as f64
            }
        })
        .collect();
    Ok(BootstrapReport {
        teams: ids.to_vec(),
        frequencies,
        median_rank,
        resamples,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltEntry {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    pub n: usize,
}

/// Normal approximation of each team's mean score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub teams: Vec<String>,
    pub entries: Vec<CltEntry>,
}

fn mean_and_stderr(values: &[f64]) -> Result<CltEntry> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 values, got {n}"
        )));
    }
    let rough = values.iter().sum::<f64>() / n as f64;
    // One correction pass; constant inputs come out exact.
    let mean = rough + values.iter().map(|v| v - rough).sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok(CltEntry {
        mean,
        stderr: sd / (n as f64).sqrt(),
        n,
    })
}

pub fn clt_distribution(ids: &[String], values: &[Vec<f64>]) -> Result<CltReport> {
    if ids.len() != values.len() {
        return Err(Error::invalid("one value row per team"));
    }
    let entries = values
        .iter()
        .map(|v| mean_and_stderr(v))
        .collect::<Result<_>>()?;
    Ok(CltReport {
        teams: ids.to_vec(),
        entries,
    })
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs at least 2 pairs".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx < 1e-300 || syy < 1e-300 {
        return Err(Error::DegenerateSignal(
            "correlation of a constant series".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
