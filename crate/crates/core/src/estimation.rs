//! Frequency-ratio, offset, and delay estimators plus timestamp translation.
//!
//! One synchronization round between an upper node and a lower node yields
//! four timestamps: `t1` (upper transmit, beacon), `t2` (lower receive),
//! `t3` (lower transmit, report), `t4` (upper receive). Writing the lower
//! hardware clock as `T_low(u) = ratio * u + theta` against upper-frame time
//! `u`, with forward one-way delay `d_f` and reverse delay `d_r` (propagation
//! plus interrupt latency, upper-frame seconds):
//!
//! ```text
//! t2 = ratio * (u1 + d_f) + theta
//! t3 = ratio *  u3         + theta
//! t4 = u3 + d_r
//!
//! turnaround = (t3 - t2) / ratio   = u3 - u1 - d_f
//! round_trip = (t4 - t1)           = u3 - u1 + d_r
//! round_trip - turnaround          = d_f + d_r
//!
//! delay_est  = (round_trip - turnaround) / 2 = (d_f + d_r) / 2
//! offset_est = t2 - ratio * (t1 + delay_est) = theta + ratio * (d_f - delay_est)
//! ```
//!
//! When the two one-way delays are equal, `delay_est = d_f = d_r` and
//! `offset_est = theta` exactly; with quantized timestamps the residual is
//! bounded by a couple of ticks. Interrupt latencies enter `d_f`/`d_r`
//! additively, so their symmetric mean is compensated and only asymmetric
//! jitter survives as estimation error.
//!
//! The frequency ratio comes from the cumulative-ratio estimator anchored at
//! the first exchange: `(t2_k - t2_0) / (t1_k - t1_0)`. Tick differences are
//! formed exactly in integer arithmetic before any float conversion. Under
//! single precision the rate offset `(t2_k - t2_0) - (t1_k - t1_0)` is kept
//! as an exactly-representable small integer and divided by the elapsed
//! ticks, so the only loss the narrow width inflicts is where the analysis
//! places it: storing a ratio that sits next to 1.0.

use thiserror::Error;

use crate::clockcore::{Ticks, SECONDS_PER_TICK, TICKS_PER_SECOND};
use crate::precision::{FpOp, FpOpCounter, PrecisionError, PrecisionLoss, PrecisionMode};

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("frequency ratio undefined: t1_k ({t1_k}) must exceed t1_zero ({t1_zero})")]
    RatioUndefined { t1_zero: u64, t1_k: u64 },
    #[error("timestamp ordering violation: {0}")]
    OrderingViolation(String),
    #[error("negative round trip: turnaround {turnaround_s} s exceeds round-trip {round_trip_s} s")]
    NegativeRoundTrip { round_trip_s: f64, turnaround_s: f64 },
    #[error("measurement tick {t_m} precedes anchor {t2_zero}")]
    MeasurementBeforeAnchor { t_m: u64, t2_zero: u64 },
    #[error("translation chain hop {hop} has no usable estimates yet")]
    MissingEstimates { hop: usize },
    #[error("invalid ratio estimate {0}")]
    InvalidRatio(f64),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// Per-link estimator state: first-round anchors plus the latest
/// frequency-ratio and offset/delay estimates.
///
/// Anchors are immutable once set; `update` only replaces the estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    t1_zero: Ticks,
    t2_zero: Ticks,
    ratio_est: f64,
    offset_est: f64,
    delay_est: f64,
    last_round: u32,
    updated: bool,
}

impl EstimatorState {
    pub fn new(t1_zero: Ticks, t2_zero: Ticks, anchor_round: u32) -> Self {
        Self {
            t1_zero,
            t2_zero,
            ratio_est: 1.0,
            offset_est: 0.0,
            delay_est: 0.0,
            last_round: anchor_round,
            updated: false,
        }
    }

    pub fn t1_zero(&self) -> Ticks {
        self.t1_zero
    }

    pub fn t2_zero(&self) -> Ticks {
        self.t2_zero
    }

    pub fn ratio_est(&self) -> f64 {
        self.ratio_est
    }

    pub fn offset_est(&self) -> f64 {
        self.offset_est
    }

    pub fn delay_est(&self) -> f64 {
        self.delay_est
    }

    pub fn last_round(&self) -> u32 {
        self.last_round
    }

    /// True once at least one post-anchor round has produced estimates.
    pub fn is_ready(&self) -> bool {
        self.updated
    }

    pub fn set_estimates(
        &mut self,
        ratio: f64,
        offset: f64,
        delay: f64,
        round: u32,
    ) -> Result<(), EstimationError> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(EstimationError::InvalidRatio(ratio));
        }
        if delay < 0.0 {
            return Err(EstimationError::NegativeRoundTrip {
                round_trip_s: delay,
                turnaround_s: 0.0,
            });
        }
        self.ratio_est = ratio;
        self.offset_est = offset;
        self.delay_est = delay;
        self.last_round = round;
        self.updated = true;
        Ok(())
    }

    /// Copy of this state with the rate already applied (ratio 1), used when
    /// the lower node pre-divided its timestamps through its own logical
    /// clock and only the anchor/delay bookkeeping remains.
    pub fn with_unit_ratio(&self) -> Self {
        let mut s = self.clone();
        s.ratio_est = 1.0;
        s
    }
}

/// Cumulative-ratio frequency estimator `(t2_k - t2_0) / (t1_k - t1_0)`,
/// evaluated under `mode`.
pub fn cr_ratio(
    t1_zero: Ticks,
    t2_zero: Ticks,
    t1_k: Ticks,
    t2_k: Ticks,
    mode: PrecisionMode,
) -> Result<f64, EstimationError> {
    let scratch = FpOpCounter::new();
    cr_ratio_counted(t1_zero, t2_zero, t1_k, t2_k, mode, &scratch)
}

/// [`cr_ratio`] with the float operations charged to a node's counter.
pub fn cr_ratio_counted(
    t1_zero: Ticks,
    t2_zero: Ticks,
    t1_k: Ticks,
    t2_k: Ticks,
    mode: PrecisionMode,
    fp: &FpOpCounter,
) -> Result<f64, EstimationError> {
    if t1_k <= t1_zero {
        return Err(EstimationError::RatioUndefined {
            t1_zero: t1_zero.value(),
            t1_k: t1_k.value(),
        });
    }
    let d1 = t1_k.value() - t1_zero.value();
    let d2 = t2_k.signed_delta(t2_zero);
    if d2 <= 0 {
        return Err(EstimationError::OrderingViolation(format!(
            "t2_k - t2_zero must be positive, got {d2}"
        )));
    }
    let ratio = match mode {
        PrecisionMode::Double => fp.op(FpOp::Div, d2 as f64, d1 as f64, mode)?,
        PrecisionMode::Single => {
            // Form the small rate offset exactly in integer ticks: a direct
            // near-unity quotient of two large binary32 operands would lose
            // the offset in their conversion error.
            let rate_offset = d2 - d1 as i64;
            let skew = fp.op(FpOp::Div, rate_offset as f64, d1 as f64, mode)?;
            fp.op(FpOp::Add, 1.0, skew, mode)?
        }
    };
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(EstimationError::InvalidRatio(ratio));
    }
    Ok(ratio)
}

/// Estimate the one-way delay and the clock offset of a completed two-way
/// round, given the current frequency-ratio estimate. Returns
/// `(offset_est, delay_est)` in seconds. See the module docs for the algebra
/// and its exactness under constant symmetric delay.
pub fn offset_delay(
    t1: Ticks,
    t2: Ticks,
    t3: Ticks,
    t4: Ticks,
    ratio: f64,
) -> Result<(f64, f64), EstimationError> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(EstimationError::InvalidRatio(ratio));
    }
    if t3 < t2 {
        return Err(EstimationError::OrderingViolation(format!(
            "t3 ({}) precedes t2 ({}) on the lower clock",
            t3.value(),
            t2.value()
        )));
    }
    if t4 <= t1 {
        return Err(EstimationError::OrderingViolation(format!(
            "t4 ({}) does not follow t1 ({}) on the upper clock",
            t4.value(),
            t1.value()
        )));
    }
    let turnaround_s = (t3.value() - t2.value()) as f64 * SECONDS_PER_TICK / ratio;
    let round_trip_s = (t4.value() - t1.value()) as f64 * SECONDS_PER_TICK;
    let delay_est = (round_trip_s - turnaround_s) / 2.0;
    if delay_est < 0.0 {
        return Err(EstimationError::NegativeRoundTrip {
            round_trip_s,
            turnaround_s,
        });
    }
    let offset_est = t2.as_secs() - ratio * (t1.as_secs() + delay_est);
    Ok((offset_est, delay_est))
}

/// Translate a lower-clock tick value into the upper clock's frame, as a
/// real-valued tick coordinate (never re-quantized).
pub fn translate_to_upper_ticks(x_lower: f64, est: &EstimatorState) -> Result<f64, EstimationError> {
    if x_lower < est.t2_zero.value() as f64 {
        return Err(EstimationError::MeasurementBeforeAnchor {
            t_m: x_lower as u64,
            t2_zero: est.t2_zero.value(),
        });
    }
    Ok(est.t1_zero.value() as f64
        + est.delay_est * TICKS_PER_SECOND
        + (x_lower - est.t2_zero.value() as f64) / est.ratio_est)
}

/// Translate a measurement timestamp across a single hop into the upper
/// frame, in seconds. When the upper node is the head this is reference time.
pub fn translate_timestamp(t_m: Ticks, est: &EstimatorState) -> Result<f64, EstimationError> {
    Ok(translate_to_upper_ticks(t_m.value() as f64, est)? * SECONDS_PER_TICK)
}

/// Translate a measurement timestamp through a chain of per-hop estimators
/// into reference seconds.
///
/// The chain is ordered from the head's direct child down to the
/// measurement's origin node; the fold runs from the origin upward, carrying
/// a real-valued tick coordinate between hops.
pub fn translate_chain(t_m: Ticks, chain: &[EstimatorState]) -> Result<f64, EstimationError> {
    if chain.is_empty() {
        return Err(EstimationError::MissingEstimates { hop: 0 });
    }
    let mut x = t_m.value() as f64;
    for (idx, est) in chain.iter().enumerate().rev() {
        if !est.is_ready() {
            return Err(EstimationError::MissingEstimates { hop: idx });
        }
        x = translate_to_upper_ticks(x, est)?;
    }
    Ok(x * SECONDS_PER_TICK)
}

/// Computational error a stored-ratio precision loss inflicts on a logical
/// clock after `elapsed_ticks` of hardware time, in seconds: the error grows
/// linearly with the elapsed time since the first synchronization.
pub fn predicted_error(elapsed_ticks: u64, eps: &PrecisionLoss) -> f64 {
    -(elapsed_ticks as f64) * eps.epsilon * SECONDS_PER_TICK
}
