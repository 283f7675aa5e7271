//! Reference clock, imperfect hardware clocks, and logical clock updates.
//!
//! Every node's hardware clock is a first-order affine function of the
//! reference clock: `T(t) = (1 + skew) * t + offset`, read out as an integer
//! microsecond tick counter (floor quantization, matching a counting hardware
//! timer). An optional random-walk perturbation of the skew models oscillator
//! drift over long runs; with drift disabled the affine formula holds exactly.
//!
//! On top of the hardware clock sits a logical clock that divides elapsed
//! hardware ticks by an estimated frequency ratio. Two update rules are
//! provided: a recursive one that advances from the previous synchronization
//! point, and an anchored one that always reaches back to the first
//! synchronization point. With a constant ratio the anchored form is the
//! closed form of the recursive one.
//!
//! Logical clock values are carried in seconds. Tick differences are formed
//! exactly in integer arithmetic; the precision mode governs the width of the
//! stored frequency ratio, the lone floating-point parameter of the update
//! (timestamps on the modelled platforms are integer microsecond counters and
//! never pass through a narrow float register).

use thiserror::Error;

use crate::precision::{constrain, FpOpCounter, PrecisionError, PrecisionMode};

pub const TICKS_PER_SECOND: f64 = 1e6;
pub const SECONDS_PER_TICK: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ClockError {
    #[error("reference time moved backwards: {now} < {last}")]
    TimeReversed { now: f64, last: f64 },
    #[error("reference time must be finite and non-negative, got {0}")]
    InvalidReferenceTime(f64),
    #[error("local timestamp {now} precedes the clock state at {prev}")]
    TicksReversed { now: u64, prev: u64 },
    #[error("invalid clock parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// Real-valued seconds since the simulation epoch on the reference clock.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ReferenceTime {
    secs: f64,
}

impl ReferenceTime {
    pub fn new(secs: f64) -> Result<Self, ClockError> {
        if !secs.is_finite() || secs < 0.0 {
            return Err(ClockError::InvalidReferenceTime(secs));
        }
        Ok(Self { secs })
    }

    pub const ZERO: ReferenceTime = ReferenceTime { secs: 0.0 };

    pub fn secs(self) -> f64 {
        self.secs
    }
}

/// Integer count of microseconds on some node's hardware clock.
///
/// Always derived from a real-valued time by flooring to the tick grid;
/// no fractional ticks are ever stored. A 64-bit microsecond counter wraps
/// after roughly 584,000 years, so wraparound handling is out of scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ticks(pub u64);

impl Ticks {
    /// Floor a real-valued second count onto the microsecond grid.
    pub fn from_secs_floor(secs: f64) -> Ticks {
        debug_assert!(secs >= 0.0 && secs.is_finite());
        Ticks((secs * TICKS_PER_SECOND).floor() as u64)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * SECONDS_PER_TICK
    }

    /// Exact elapsed ticks since `earlier`; errors if `self` is older.
    pub fn elapsed_since(self, earlier: Ticks) -> Result<u64, ClockError> {
        self.0.checked_sub(earlier.0).ok_or(ClockError::TicksReversed {
            now: self.0,
            prev: earlier.0,
        })
    }

    /// Signed tick difference, exact for all in-range values.
    pub fn signed_delta(self, other: Ticks) -> i64 {
        self.0 as i64 - other.0 as i64
    }
}

/// Oscillator parameters of one node's hardware clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockParams {
    /// Dimensionless skew; the clock runs at frequency ratio `1 + skew`
    /// relative to the reference. Quartz oscillators sit in the tens of ppm.
    pub skew: f64,
    /// Offset in seconds at reference time zero.
    pub offset: f64,
    /// Random-walk intensity of the skew in ppm per sqrt(second);
    /// zero disables drift.
    pub drift_rate_std: f64,
}

impl ClockParams {
    pub fn new(skew: f64, offset: f64, drift_rate_std: f64) -> Result<Self, ClockError> {
        if !(skew.is_finite() && offset.is_finite() && drift_rate_std.is_finite()) {
            return Err(ClockError::InvalidParams("non-finite parameter".into()));
        }
        if 1.0 + skew <= 0.0 {
            return Err(ClockError::InvalidParams(format!(
                "frequency ratio 1 + skew must be positive, got skew {skew}"
            )));
        }
        if drift_rate_std < 0.0 {
            return Err(ClockError::InvalidParams(format!(
                "drift_rate_std must be >= 0, got {drift_rate_std}"
            )));
        }
        Ok(Self {
            skew,
            offset,
            drift_rate_std,
        })
    }

    pub fn ideal() -> Self {
        Self {
            skew: 0.0,
            offset: 0.0,
            drift_rate_std: 0.0,
        }
    }
}

/// One node's hardware clock: an affine (optionally drifting) view of the
/// reference clock, read out in integer microseconds.
#[derive(Debug, Clone)]
pub struct HardwareClock {
    params: ClockParams,
    current_skew: f64,
    last_update: f64,
    /// Reference time of the last drift step; local time accrues piecewise
    /// linearly from here at rate `1 + current_skew`.
    base_ref: f64,
    /// Local microseconds accumulated up to `base_ref` (offset excluded).
    base_local_us: f64,
}

impl HardwareClock {
    pub fn new(params: ClockParams) -> Self {
        Self {
            params,
            current_skew: params.skew,
            last_update: 0.0,
            base_ref: 0.0,
            base_local_us: 0.0,
        }
    }

    pub fn params(&self) -> &ClockParams {
        &self.params
    }

    pub fn current_skew(&self) -> f64 {
        self.current_skew
    }

    /// Read the tick counter at reference time `t`.
    ///
    /// Rejects `t` moving backwards (a simulation ordering bug). Reading
    /// twice at the same reference time returns identical ticks.
    pub fn read(&mut self, t: ReferenceTime) -> Result<Ticks, ClockError> {
        let now = t.secs();
        if now < self.last_update {
            return Err(ClockError::TimeReversed {
                now,
                last: self.last_update,
            });
        }
        self.last_update = now;
        let elapsed_us = (now - self.base_ref) * TICKS_PER_SECOND;
        let raw = self.base_local_us
            + elapsed_us
            + self.current_skew * elapsed_us
            + self.params.offset * TICKS_PER_SECOND;
        debug_assert!(raw >= 0.0, "hardware clock value went negative: {raw}");
        Ok(Ticks(raw.floor() as u64))
    }

    /// Advance the skew random walk to reference time `now` using a unit
    /// normal draw supplied by the caller. A no-op when drift is disabled or
    /// no time has passed since the last step.
    pub fn apply_drift_step(&mut self, now: ReferenceTime, unit_normal: f64) -> Result<(), ClockError> {
        let t = now.secs();
        if t < self.base_ref || t < self.last_update {
            return Err(ClockError::TimeReversed {
                now: t,
                last: self.base_ref.max(self.last_update),
            });
        }
        let dt = t - self.base_ref;
        if self.params.drift_rate_std == 0.0 || dt == 0.0 {
            return Ok(());
        }
        let elapsed_us = dt * TICKS_PER_SECOND;
        self.base_local_us += elapsed_us + self.current_skew * elapsed_us;
        self.base_ref = t;
        let step = self.params.drift_rate_std * 1e-6 * dt.sqrt() * unit_normal;
        let next = self.current_skew + step;
        // The walk must never push the frequency ratio to zero; at sane
        // intensities this branch is unreachable.
        if 1.0 + next <= 0.0 {
            return Err(ClockError::InvalidParams(format!(
                "drift walked the frequency ratio non-positive (skew {next})"
            )));
        }
        self.current_skew = next;
        Ok(())
    }
}

/// State of a node's logical clock: the first-synchronization anchor, the
/// previous synchronization point, and the current frequency ratio estimate.
///
/// The anchor fields are immutable after construction; only the previous
/// point and the ratio are replaced at later synchronization rounds.
#[derive(Debug, Clone)]
pub struct LogicalClockState {
    anchor_local: Ticks,
    anchor_logical: f64,
    prev_local: Ticks,
    prev_logical: f64,
    ratio_est: f64,
}

impl LogicalClockState {
    /// Anchor the logical clock: at hardware time `anchor_local` the logical
    /// clock reads `anchor_logical` seconds. The ratio starts at 1.
    pub fn anchored_at(anchor_local: Ticks, anchor_logical: f64) -> Self {
        Self {
            anchor_local,
            anchor_logical,
            prev_local: anchor_local,
            prev_logical: anchor_logical,
            ratio_est: 1.0,
        }
    }

    pub fn anchor_local(&self) -> Ticks {
        self.anchor_local
    }

    pub fn anchor_logical(&self) -> f64 {
        self.anchor_logical
    }

    pub fn ratio_est(&self) -> f64 {
        self.ratio_est
    }

    pub fn set_ratio(&mut self, ratio: f64) -> Result<(), ClockError> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(ClockError::InvalidParams(format!(
                "frequency ratio estimate must be positive, got {ratio}"
            )));
        }
        self.ratio_est = ratio;
        Ok(())
    }

    /// Commit a synchronization point for the recursive update rule.
    pub fn commit(&mut self, local: Ticks, logical: f64) -> Result<(), ClockError> {
        if local < self.prev_local {
            return Err(ClockError::TicksReversed {
                now: local.0,
                prev: self.prev_local.0,
            });
        }
        self.prev_local = local;
        self.prev_logical = logical;
        Ok(())
    }

    /// Recursive update rule: advance from the previous synchronization
    /// point by the elapsed hardware ticks divided by the ratio estimate.
    /// The caller commits the result at synchronization rounds.
    pub fn logical_recursive(&self, local_now: Ticks, mode: PrecisionMode) -> Result<f64, ClockError> {
        let delta = local_now.elapsed_since(self.prev_local)?;
        Ok(self.prev_logical + scaled_elapsed(delta, self.ratio_est, mode)?)
    }

    /// Anchored update rule: always reach back to the first synchronization
    /// point, removing the recursive dependence on prior results.
    pub fn logical_anchored(&self, local_now: Ticks, mode: PrecisionMode) -> Result<f64, ClockError> {
        let delta = local_now.elapsed_since(self.anchor_local)?;
        Ok(self.anchor_logical + scaled_elapsed(delta, self.ratio_est, mode)?)
    }

    /// Anchored update with the division charged to a node's op counter.
    pub fn logical_anchored_counted(
        &self,
        local_now: Ticks,
        mode: PrecisionMode,
        fp: &FpOpCounter,
    ) -> Result<f64, ClockError> {
        let delta = local_now.elapsed_since(self.anchor_local)?;
        let elapsed_s = delta as f64 * SECONDS_PER_TICK;
        let q = fp.div_by_constrained(elapsed_s, self.ratio_est, mode)?;
        Ok(self.anchor_logical + q)
    }
}

fn scaled_elapsed(delta_ticks: u64, ratio: f64, mode: PrecisionMode) -> Result<f64, PrecisionError> {
    let ratio_stored = constrain(ratio, mode)?;
    if ratio_stored <= 0.0 {
        return Err(PrecisionError::DivisionByZero);
    }
    Ok(delta_ticks as f64 * SECONDS_PER_TICK / ratio_stored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::predicted_error;
    use crate::precision::compute_precision_loss;
    use proptest::prelude::*;

    fn clock(skew: f64, offset: f64) -> HardwareClock {
        HardwareClock::new(ClockParams::new(skew, offset, 0.0).unwrap())
    }

    #[test]
    fn identity_clock_reads_reference() {
        let mut c = clock(0.0, 0.0);
        let t = ReferenceTime::new(1.0).unwrap();
        assert_eq!(c.read(t).unwrap(), Ticks(1_000_000));
    }

    #[test]
    fn skewed_offset_clock_evaluates_affine_model() {
        // (1 + 50e-6) * 10.0 + 0.5 = 10.5005 s exactly.
        let mut c = clock(50e-6, 0.5);
        let t = ReferenceTime::new(10.0).unwrap();
        assert_eq!(c.read(t).unwrap(), Ticks(10_500_500));
    }

    #[test]
    fn sub_tick_remainder_floors() {
        let mut c = clock(0.0, 0.0);
        let t = ReferenceTime::new(1.000_000_4).unwrap();
        assert_eq!(c.read(t).unwrap(), Ticks(1_000_000));
    }

    #[test]
    fn read_rejects_time_reversal_but_allows_equal() {
        let mut c = clock(10e-6, 0.1);
        let t1 = ReferenceTime::new(5.0).unwrap();
        let first = c.read(t1).unwrap();
        assert_eq!(c.read(t1).unwrap(), first);
        let earlier = ReferenceTime::new(4.9).unwrap();
        assert!(matches!(c.read(earlier), Err(ClockError::TimeReversed { .. })));
    }

    #[test]
    fn drift_disabled_matches_affine_formula_exactly() {
        let mut c = clock(-30e-6, 0.25);
        for k in 1..200u64 {
            let t = k as f64 * 1.7;
            let got = c.read(ReferenceTime::new(t).unwrap()).unwrap();
            let t_us = t * TICKS_PER_SECOND;
            let expect = (t_us + (-30e-6) * t_us + 0.25 * TICKS_PER_SECOND).floor() as u64;
            assert_eq!(got.value(), expect);
        }
    }

    #[test]
    fn drift_step_moves_skew_and_keeps_monotonicity() {
        let params = ClockParams::new(20e-6, 0.0, 0.05).unwrap();
        let mut c = HardwareClock::new(params);
        let mut prev = c.read(ReferenceTime::new(0.0).unwrap()).unwrap();
        for k in 1..100u64 {
            let t = ReferenceTime::new(k as f64).unwrap();
            c.apply_drift_step(t, if k % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
            let now = c.read(t).unwrap();
            assert!(now >= prev);
            prev = now;
        }
        assert_ne!(c.current_skew(), 20e-6);
    }

    #[test]
    fn logical_recursive_unit_ratio() {
        let state = LogicalClockState::anchored_at(Ticks(0), 0.0);
        let v = state.logical_recursive(Ticks(5_000_000), PrecisionMode::Double).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn logical_recursive_reference_value() {
        let mut state = LogicalClockState::anchored_at(Ticks(0), 0.0);
        state.commit(Ticks(10_000_000), 10.0).unwrap();
        state.set_ratio(1.00005).unwrap();
        let v = state.logical_recursive(Ticks(20_000_000), PrecisionMode::Double).unwrap();
        let expect = 10.0 + 10.0 / 1.00005;
        assert_eq!(v, expect);
        assert!((v - 19.999_500_024_998_75).abs() < 1e-9);
    }

    #[test]
    fn logical_recursive_single_matches_loss_prediction() {
        let mut state = LogicalClockState::anchored_at(Ticks(0), 0.0);
        state.commit(Ticks(10_000_000), 10.0).unwrap();
        state.set_ratio(1.00005).unwrap();
        let full = state.logical_recursive(Ticks(20_000_000), PrecisionMode::Double).unwrap();
        let single = state.logical_recursive(Ticks(20_000_000), PrecisionMode::Single).unwrap();
        let observed = single - full;
        let eps = compute_precision_loss(1.00005);
        let predicted = predicted_error(10_000_000, &eps);
        assert!(observed.abs() > 0.0);
        // Same order of magnitude as the loss-driven prediction.
        let ratio = observed.abs() / predicted.abs();
        assert!((0.1..10.0).contains(&ratio), "observed {observed}, predicted {predicted}");
    }

    #[test]
    fn logical_anchored_small_elapsed() {
        let state = LogicalClockState::anchored_at(Ticks(0), 0.0);
        let v = state.logical_anchored(Ticks(123), PrecisionMode::Double).unwrap();
        assert!((v - 123e-6).abs() < 1e-15);
    }

    #[test]
    fn logical_anchored_reference_value() {
        let mut state = LogicalClockState::anchored_at(Ticks(0), 0.0);
        state.set_ratio(1.000_000_1).unwrap();
        let v = state.logical_anchored(Ticks(10_000_000), PrecisionMode::Double).unwrap();
        assert_eq!(v, 10.0 / 1.000_000_1);
        assert!((v - 9.999_999).abs() < 1e-6);
    }

    #[test]
    fn logical_anchored_deterministic() {
        let mut state = LogicalClockState::anchored_at(Ticks(77), 77e-6);
        state.set_ratio(1.000_033).unwrap();
        let a = state.logical_anchored(Ticks(9_999_999), PrecisionMode::Double).unwrap();
        let b = state.logical_anchored(Ticks(9_999_999), PrecisionMode::Double).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn logical_rejects_backwards_ticks() {
        let mut state = LogicalClockState::anchored_at(Ticks(1000), 1e-3);
        state.commit(Ticks(2000), 2e-3).unwrap();
        assert!(state.logical_recursive(Ticks(1999), PrecisionMode::Double).is_err());
        assert!(state.logical_anchored(Ticks(999), PrecisionMode::Double).is_err());
    }

    #[test]
    fn anchored_is_closed_form_of_recursive_with_constant_ratio() {
        // 50 rounds of 1 s: committing the recursive value each round must
        // stay within 1e-12 s of the anchored closed form.
        let ratio = 1.0 + 47e-6;
        let mut rec = LogicalClockState::anchored_at(Ticks(0), 0.0);
        rec.set_ratio(ratio).unwrap();
        let mut anch = LogicalClockState::anchored_at(Ticks(0), 0.0);
        anch.set_ratio(ratio).unwrap();
        for k in 1..=50u64 {
            let local = Ticks(k * 1_000_047);
            let r = rec.logical_recursive(local, PrecisionMode::Double).unwrap();
            let a = anch.logical_anchored(local, PrecisionMode::Double).unwrap();
            assert!((r - a).abs() <= 1e-12, "round {k}: {r} vs {a}");
            rec.commit(local, r).unwrap();
        }
    }

    #[test]
    fn anchored_with_true_ratio_tracks_reference_within_two_ticks() {
        let skew = 83e-6;
        let mut hw = clock(skew, 0.37);
        let t0 = ReferenceTime::new(0.5).unwrap();
        let anchor = hw.read(t0).unwrap();
        let mut state = LogicalClockState::anchored_at(anchor, 0.0);
        state.set_ratio(1.0 + skew).unwrap();
        for k in 1..=3600u64 {
            let t = 0.5 + k as f64;
            let local = hw.read(ReferenceTime::new(t).unwrap()).unwrap();
            let logical = state.logical_anchored(local, PrecisionMode::Double).unwrap();
            let err = logical - (t - 0.5);
            assert!(err.abs() <= 2e-6, "t {t}: error {err}");
        }
    }

    #[test]
    fn single_mode_anchored_error_slope_bounded_by_loss() {
        let ratio = 1.0 + 61e-6;
        let eps = compute_precision_loss(ratio).epsilon.abs();
        assert!(eps > 0.0);
        let mut state = LogicalClockState::anchored_at(Ticks(0), 0.0);
        state.set_ratio(ratio).unwrap();
        for k in [1u64, 10, 100, 1000, 3600] {
            let local = Ticks(k * 1_000_000);
            let full = state.logical_anchored(local, PrecisionMode::Double).unwrap();
            let single = state.logical_anchored(local, PrecisionMode::Single).unwrap();
            let err = (single - full).abs();
            let elapsed_s = local.as_secs();
            assert!(
                err <= eps * elapsed_s * 1.001,
                "elapsed {elapsed_s}: error {err} exceeds loss bound {}",
                eps * elapsed_s
            );
        }
    }

    proptest! {
        #[test]
        fn quantization_error_within_one_tick(
            skew in -100e-6f64..100e-6,
            offset in 0.0f64..2.0,
            t in 0.0f64..10_000.0,
        ) {
            let mut c = clock(skew, offset);
            let ticks = c.read(ReferenceTime::new(t).unwrap()).unwrap();
            let exact_us = (1.0 + skew) * t * TICKS_PER_SECOND + offset * TICKS_PER_SECOND;
            let err = exact_us - ticks.value() as f64;
            // Floor quantization: error in [0, 1) tick up to f64 evaluation dust.
            prop_assert!((-1e-6..1.0 + 1e-6).contains(&err), "err {err}");
        }

        #[test]
        fn reads_are_monotone(
            skew in -100e-6f64..100e-6,
            offset in 0.0f64..1.0,
            times in proptest::collection::vec(0.0f64..1000.0, 1..20),
        ) {
            let mut sorted = times.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut c = clock(skew, offset);
            let mut prev = Ticks(0);
            for t in sorted {
                let now = c.read(ReferenceTime::new(t).unwrap()).unwrap();
                prop_assert!(now >= prev);
                prev = now;
            }
        }
    }
}
