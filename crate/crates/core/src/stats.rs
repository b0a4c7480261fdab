//! Streaming statistics with a worker-count independent merge.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Trials per chunk in [`parallel_accumulate`]. Chunks are merged in index
/// order, so results do not depend on how many workers ran them.
pub const CHUNK: u64 = 256;

/// Count, mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Self::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Runs `trial(i)` for `i in 0..trials` in parallel and accumulates the
/// `K` values each trial returns. NaN values are skipped, which gives
/// conditional means.
pub fn parallel_accumulate<const K: usize, F>(trials: u64, trial: F) -> Result<[Welford; K]>
where
    F: Fn(u64) -> Result<[f64; K]> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<[Welford; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [Welford::new(); K];
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let v = trial(i)?;
                for (a, x) in acc.iter_mut().zip(v) {
                    if !x.is_nan() {
                        a.push(x);
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [Welford::new(); K];
    for p in &parts {
        for (t, x) in total.iter_mut().zip(p) {
            t.merge(x);
        }
    }
    Ok(total)
}

/// Ordinary least squares of `y` on `0..len`: `(slope, stderr of slope)`.
pub fn ols_slope(y: &[f64]) -> (f64, f64) {
    let n = y.len();
    if n < 3 {
        return (0.0, f64::INFINITY);
    }
    let nf = n as f64;
    let xbar = (nf - 1.0) / 2.0;
    let ybar = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxx += dx * dx;
        sxy += dx * (v - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - intercept - slope * i as f64).powi(2))
        .sum();
    (slope, (rss / (nf - 2.0) / sxx).sqrt())
}
