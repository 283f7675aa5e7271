//! Error aggregation: trimmed MAE/MSE, error histograms, and growth slopes.

use thiserror::Error;

use crate::protocol::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trim fraction must lie in [0, 1), got {0}")]
    InvalidTrimFraction(f64),
    #[error("no samples remain after trimming at {0} s")]
    EmptyAfterTrim(f64),
    #[error("slope is undefined: {0}")]
    DegenerateSlope(String),
    #[error("invalid histogram parameters: {0}")]
    InvalidHistogram(String),
}

/// One measurement's estimation error: estimated reference time minus the
/// true reference time of the event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub node: NodeId,
    pub hop: u16,
    /// True reference time of the measurement event, seconds.
    pub event_ref_time: f64,
    /// Estimated reference time, seconds.
    pub estimate: f64,
    /// `estimate - truth`, seconds.
    pub error: f64,
}

/// Trimmed mean absolute error and mean squared error of a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mae: f64,
    pub mse: f64,
    pub count: usize,
    pub trim_fraction: f64,
}

/// Compute MAE/MSE over the samples whose event time falls at or after
/// `trim_fraction * duration`, discarding the transient at the start of the
/// run.
pub fn trimmed_stats(
    samples: &[ErrorSample],
    duration: f64,
    trim_fraction: f64,
) -> Result<ErrorStats, MetricsError> {
    if !(0.0..1.0).contains(&trim_fraction) {
        return Err(MetricsError::InvalidTrimFraction(trim_fraction));
    }
    let cutoff = trim_fraction * duration;
    let mut count = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for s in samples {
        if s.event_ref_time < cutoff {
            continue;
        }
        count += 1;
        abs_sum += s.error.abs();
        sq_sum += s.error * s.error;
    }
    if count == 0 {
        return Err(MetricsError::EmptyAfterTrim(cutoff));
    }
    Ok(ErrorStats {
        mae: abs_sum / count as f64,
        mse: sq_sum / count as f64,
        count,
        trim_fraction,
    })
}

/// Histogram of error values over `(lo, hi)` with fixed-width bins.
///
/// Bin probabilities are normalized by the total sample count, so they sum
/// to at most 1; the mass falling outside the range is reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `(bin_center, probability)` pairs, left to right.
    pub bins: Vec<(f64, f64)>,
    pub below_range: f64,
    pub above_range: f64,
    pub total_count: usize,
}

impl Histogram {
    /// Fraction of all samples captured inside the range.
    pub fn captured(&self) -> f64 {
        self.bins.iter().map(|(_, p)| p).sum()
    }
}

pub fn histogram(
    samples: &[ErrorSample],
    bin_width: f64,
    range: (f64, f64),
) -> Result<Histogram, MetricsError> {
    let (lo, hi) = range;
    if !bin_width.is_finite() || bin_width <= 0.0 {
        return Err(MetricsError::InvalidHistogram(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(MetricsError::InvalidHistogram(format!(
            "range must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    let ratio = (hi - lo) / bin_width;
    // Snap to the integer bin count when the division is off by float dust.
    let n_bins = if (ratio - ratio.round()).abs() < 1e-9 * ratio.abs().max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);
    let mut counts = vec![0usize; n_bins];
    let mut below = 0usize;
    let mut above = 0usize;
    for s in samples {
        if s.error < lo {
            below += 1;
        } else if s.error >= hi {
            above += 1;
        } else {
            let idx = (((s.error - lo) / bin_width) as usize).min(n_bins - 1);
            counts[idx] += 1;
        }
    }
    let total = samples.len();
    let norm = if total == 0 { 1.0 } else { total as f64 };
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (lo + (i as f64 + 0.5) * bin_width, c as f64 / norm))
        .collect();
    Ok(Histogram {
        bins,
        below_range: below as f64 / norm,
        above_range: above as f64 / norm,
        total_count: total,
    })
}

/// Least-squares slope of error versus event time, in seconds of error per
/// second of elapsed time. Validates how fast estimation error accumulates.
pub fn error_growth_slope(samples: &[ErrorSample]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::DegenerateSlope(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|s| s.event_ref_time).sum::<f64>() / n;
    let mean_e = samples.iter().map(|s| s.error).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for s in samples {
        let dt = s.event_ref_time - mean_t;
        sxx += dt * dt;
        sxy += dt * (s.error - mean_e);
    }
    if sxx == 0.0 {
        return Err(MetricsError::DegenerateSlope(
            "all samples share the same event time".into(),
        ));
    }
    Ok(sxy / sxx)
}
