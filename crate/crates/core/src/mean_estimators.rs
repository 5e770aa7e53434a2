//! One-dimensional mean estimators with subgaussian deviations under a finite variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default admissibility constant: `delta >= 2 exp(-c0 N)`.
pub const DEFAULT_C0: f64 = 1.0 / 16.0;
/// Default trimming constant: `ceil(c_trim ln(2/delta))` values cut per side.
pub const DEFAULT_C_TRIM: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MedianOfMeans,
    TrimmedMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub delta: f64,
    pub min_block: usize,
    pub c0: f64,
    pub c_trim: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec {
            kind: EstimatorKind::MedianOfMeans,
            delta: 0.01,
            min_block: 1,
            c0: DEFAULT_C0,
            c_trim: DEFAULT_C_TRIM,
        }
    }
}

impl EstimatorSpec {
    pub fn with_delta(self, delta: f64) -> Self {
        EstimatorSpec { delta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", format!("{} not in (0, 1)", self.delta)));
        }
        if self.min_block == 0 {
            return Err(Error::invalid("min_block", "must be at least 1"));
        }
        if !(self.c0 > 0.0) || !(self.c_trim > 0.0) {
            return Err(Error::invalid("c0/c_trim", "must be positive"));
        }
        Ok(())
    }
}

/// `ceil(8 * log_term)` where `log_term = ln(2/delta)`, guarded against rounding up
/// exact integers.
pub fn blocks_for_log(log_term: f64, min_block: usize) -> usize {
    let raw = 8.0 * log_term;
    let k = (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as usize;
    k.max(min_block)
}

pub fn block_count(delta: f64, min_block: usize) -> usize {
    blocks_for_log((2.0 / delta).ln(), min_block)
}

/// Rejects `delta` below `2 exp(-c0 n)`.
pub fn check_delta(delta: f64, n: usize, c0: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} not in (0, 1)")));
    }
    let floor = 2.0 * (-c0 * n as f64).exp();
    if delta < floor * (1.0 - 1e-12) {
        return Err(Error::DeltaBelowFloor { delta, floor, n });
    }
    Ok(())
}

fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Start offsets of `k` contiguous blocks over `n` samples, plus `n`; the last block
/// takes the remainder.
pub fn block_bounds(n: usize, k: usize) -> Vec<usize> {
    let b = n / k;
    let mut out: Vec<usize> = (0..k).map(|j| j * b).collect();
    out.push(n);
    out
}

/// Median of `buf` (reordered in place); even lengths average the two middle values.
pub fn median_in_place(buf: &mut [f64]) -> f64 {
    let k = buf.len();
    debug_assert!(k > 0);
    let mid = k / 2;
    let (lower, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *m;
    if k % 2 == 1 {
        hi
    } else {
        let lo = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Median of the means of `k` contiguous blocks.
pub fn median_of_means_blocks(samples: &[f64], k: usize) -> Result<f64> {
    let n = samples.len();
    if k == 0 || n < k {
        return Err(Error::InsufficientSamples {
            needed: k,
            available: n,
        });
    }
    check_finite(samples)?;
    let bounds = block_bounds(n, k);
    let mut means: Vec<f64> = bounds
        .windows(2)
        .map(|w| samples[w[0]..w[1]].iter().sum::<f64>() / (w[1] - w[0]) as f64)
        .collect();
    Ok(median_in_place(&mut means))
}

/// Median-of-means with `k = ceil(8 ln(2/delta))` blocks and the default floor.
pub fn median_of_means(samples: &[f64], delta: f64) -> Result<f64> {
    psi_delta(samples, &EstimatorSpec::default().with_delta(delta))
}

/// Trimmed mean with the default trimming constant and floor.
pub fn trimmed_mean(samples: &[f64], delta: f64) -> Result<f64> {
    let spec = EstimatorSpec {
        kind: EstimatorKind::TrimmedMean,
        ..EstimatorSpec::default().with_delta(delta)
    };
    psi_delta(samples, &spec)
}

fn trimmed_mean_count(samples: &[f64], trim: usize) -> Result<f64> {
    let n = samples.len();
    if 2 * trim >= n {
        return Err(Error::TrimTooLarge { trim, n });
    }
    check_finite(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[trim..n - trim];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Dispatches on `spec.kind`.
pub fn psi_delta(samples: &[f64], spec: &EstimatorSpec) -> Result<f64> {
    spec.validate()?;
    check_delta(spec.delta, samples.len(), spec.c0)?;
    let log_term = (2.0 / spec.delta).ln();
    match spec.kind {
        EstimatorKind::MedianOfMeans => {
            median_of_means_blocks(samples, blocks_for_log(log_term, spec.min_block))
        }
        EstimatorKind::TrimmedMean => {
            let trim = (spec.c_trim * log_term - 1e-9).ceil().max(0.0) as usize;
            trimmed_mean_count(samples, trim)
        }
    }
}

/// `psi_delta` at `delta = 2 exp(-log_term)`, without forming `delta` (it underflows
/// for the confidence levels used by chaining).
pub fn psi_log(samples: &[f64], log_term: f64, spec: &EstimatorSpec) -> Result<f64> {
    spec.validate()?;
    check_log_term(log_term, samples.len(), spec.c0)?;
    match spec.kind {
        EstimatorKind::MedianOfMeans => {
            median_of_means_blocks(samples, blocks_for_log(log_term, spec.min_block))
        }
        EstimatorKind::TrimmedMean => {
            let trim = (spec.c_trim * log_term - 1e-9).ceil().max(0.0) as usize;
            trimmed_mean_count(samples, trim)
        }
    }
}

/// Log form of [`check_delta`]: requires `0 < log_term <= c0 n`.
pub fn check_log_term(log_term: f64, n: usize, c0: f64) -> Result<()> {
    if !(log_term > 2f64.ln()) || !log_term.is_finite() {
        return Err(Error::invalid("log_term", format!("{log_term} must exceed ln 2")));
    }
    if log_term > c0 * n as f64 * (1.0 + 1e-12) {
        return Err(Error::DeltaBelowFloor {
            delta: 2.0 * (-log_term).exp(),
            floor: 2.0 * (-c0 * n as f64).exp(),
            n,
        });
    }
    Ok(())
}

/// Applies a seeded Fisher-Yates shuffle before estimating.
pub fn psi_delta_shuffled<R: rand::Rng + ?Sized>(
    samples: &[f64],
    spec: &EstimatorSpec,
    rng: &mut R,
) -> Result<f64> {
    use rand::seq::SliceRandom;
    let mut s = samples.to_vec();
    s.shuffle(rng);
    psi_delta(&s, spec)
}
