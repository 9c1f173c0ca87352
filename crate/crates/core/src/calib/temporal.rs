//! Temporal calibration: the tracker-to-image lag maximizing correlation.

use crate::error::{Error, Result};

pub const DEFAULT_GRID: f64 = 0.005;
const VARIANCE_FLOOR: f64 = 1e-12;

/// A scalar signal sampled at strictly increasing times (s).
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSignal {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl MotionSignal {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(Error::InsufficientData(
                "a motion signal needs at least 2 samples".into(),
            ));
        }
        if timestamps.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::invalid("motion signal contains non-finite samples"));
        }
        if let Some(k) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "timestamps not strictly increasing at sample {}",
                k + 1
            )));
        }
        Ok(Self { timestamps, values })
    }

    pub fn from_fn(timestamps: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = timestamps.iter().map(|&t| f(t)).collect();
        Self::new(timestamps, values)
    }

    pub fn start(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn end(&self) -> f64 {
        *self.timestamps.last().expect("non-empty")
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// Linear interpolation; `None` outside the sampled span.
    pub fn sample(&self, t: f64) -> Option<f64> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let k = self.timestamps.partition_point(|&x| x <= t);
        if k == 0 {
            return Some(self.values[0]);
        }
        if k >= self.timestamps.len() {
            return Some(*self.values.last().expect("non-empty"));
        }
        let (t0, t1) = (self.timestamps[k - 1], self.timestamps[k]);
        let w = (t - t0) / (t1 - t0);
        Some(self.values[k - 1] + w * (self.values[k] - self.values[k - 1]))
    }

    fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }
}

/// Lag `τ` (s) such that `image(t + τ)` best matches `tracker(t)`.
///
/// Both signals are resampled by linear interpolation on a uniform grid of
/// step `grid` anchored at the tracker's first sample. Candidate lags are
/// the multiples of `grid` in `[−lag_range, lag_range]`; the one maximizing
/// the normalized cross-correlation wins, ties going to the smallest `|τ|`.
pub fn temporal_offset(
    tracker: &MotionSignal,
    image: &MotionSignal,
    lag_range: f64,
    grid: f64,
) -> Result<f64> {
    if !(grid > 0.0 && grid.is_finite()) || !(lag_range >= 0.0 && lag_range.is_finite()) {
        return Err(Error::invalid(format!(
            "bad lag search settings: range {lag_range}, grid {grid}"
        )));
    }
    for (name, s) in [("tracker", tracker), ("image", image)] {
        if s.variance() < VARIANCE_FLOOR {
            return Err(Error::DegenerateSignal(format!(
                "{name} signal is constant"
            )));
        }
    }

    let steps = (lag_range / grid + 1e-9).floor() as i64;
    let n_grid = (tracker.duration() / grid + 1e-9).floor() as usize + 1;
    let min_overlap = 0.5 * tracker.duration().min(image.duration());
    let mut best: Option<(f64, f64)> = None;

    // Candidate order: 0, −1, +1, −2, +2, … so a strict `>` keeps the smallest |lag|.
    let order = std::iter::once(0).chain((1..=steps).flat_map(|k| [-k, k]));
    for k in order {
        let lag = k as f64 * grid;
        let mut a = Vec::with_capacity(n_grid);
        let mut b = Vec::with_capacity(n_grid);
        for m in 0..n_grid {
            let t = tracker.start() + m as f64 * grid;
            if let (Some(x), Some(y)) = (tracker.sample(t), image.sample(t + lag)) {
                a.push(x);
                b.push(y);
            }
        }
        let overlap = if a.len() > 1 {
            (a.len() - 1) as f64 * grid
        } else {
            0.0
        };
        if overlap + 1e-9 < min_overlap || a.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "signals overlap for {overlap:.3} s at lag {lag:+.3} s, need {min_overlap:.3} s"
            )));
        }
        let score = normalized_correlation(&a, &b);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((lag, score));
        }
    }
    Ok(best.expect("at least the zero lag").0)
}

fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return f64::NEG_INFINITY;
    }
    sab / (saa * sbb).sqrt()
}
