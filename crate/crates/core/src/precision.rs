//! Emulation of reduced-precision floating-point arithmetic.
//!
//! Low-cost sensor MCUs typically provide only IEEE 754 binary32 ("single")
//! floating point, while the head node computes in binary64. This module
//! provides the primitives to evaluate the same arithmetic under either
//! width so the two placements can be compared: [`round_single`] constrains a
//! value to the binary32 grid, [`fp_op`] evaluates one arithmetic operation
//! with operands and result constrained to the selected width, and
//! [`compute_precision_loss`] measures how much of a frequency ratio is lost
//! when it is stored in binary32.
//!
//! All functions are pure; nodes that need to account for how many
//! floating-point operations they performed route their calls through an
//! [`FpOpCounter`].

use std::cell::Cell;

use thiserror::Error;

/// Floating-point width a computation is evaluated under.
///
/// `Double` is the identity on the artifact's native `f64` values; `Single`
/// constrains values to IEEE 754 binary32 (round to nearest, ties to even).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionMode {
    Single,
    Double,
}

/// Arithmetic operation selector for [`fp_op`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Error, PartialEq)]
pub enum PrecisionError {
    #[error("value {0} overflows the binary32 range")]
    Binary32Overflow(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("operation produced a non-finite result")]
    NonFinite,
}

/// Precision loss of a frequency ratio stored in binary32: the difference
/// between the full-precision ratio and its nearest binary32 neighbour.
///
/// For ratios near 1 the magnitude is bounded by half a ULP at 1.0,
/// about 6e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionLoss {
    pub epsilon: f64,
}

/// Round `x` to the nearest binary32-representable value (ties to even) and
/// widen it back to `f64`. Idempotent.
///
/// Values whose magnitude exceeds the binary32 range are rejected rather than
/// mapped to infinity; in-domain ratios and tick counts never get there.
pub fn round_single(x: f64) -> Result<f64, PrecisionError> {
    if !x.is_finite() {
        return Err(PrecisionError::NonFinite);
    }
    let narrowed = x as f32;
    if narrowed.is_infinite() {
        return Err(PrecisionError::Binary32Overflow(x));
    }
    Ok(f64::from(narrowed))
}

/// Evaluate `a op b` under `mode`.
///
/// In `Double` mode this is native `f64` arithmetic, bit-identical to writing
/// the expression inline. In `Single` mode both operands and the result are
/// constrained to binary32, matching correctly-rounded single-precision
/// hardware that stores every intermediate in a 32-bit register.
pub fn fp_op(op: FpOp, a: f64, b: f64, mode: PrecisionMode) -> Result<f64, PrecisionError> {
    match mode {
        PrecisionMode::Double => {
            if matches!(op, FpOp::Div) && b == 0.0 {
                return Err(PrecisionError::DivisionByZero);
            }
            let r = apply(op, a, b);
            if r.is_finite() {
                Ok(r)
            } else {
                Err(PrecisionError::NonFinite)
            }
        }
        PrecisionMode::Single => {
            let a32 = round_single(a)?;
            let b32 = round_single(b)?;
            if matches!(op, FpOp::Div) && b32 == 0.0 {
                return Err(PrecisionError::DivisionByZero);
            }
            // Rounding the f64 result of two binary32 operands to binary32
            // yields the correctly-rounded binary32 operation: the exact
            // result fits in f64 (add/sub/mul exactly, div within half an
            // f64 ULP), so no double-rounding anomaly can occur.
            let r = round_single(apply(op, a32, b32))?;
            if r.is_finite() {
                Ok(r)
            } else {
                Err(PrecisionError::NonFinite)
            }
        }
    }
}

/// Precision loss of storing `ratio_full` in binary32:
/// `ratio_full - round_single(ratio_full)`.
pub fn compute_precision_loss(ratio_full: f64) -> PrecisionLoss {
    let stored = f64::from(ratio_full as f32);
    PrecisionLoss {
        epsilon: ratio_full - stored,
    }
}

/// Constrain a stored value to `mode`'s width.
///
/// This is what happens to a parameter (e.g. an estimated frequency ratio)
/// when a node writes it into a variable of its native float type.
pub fn constrain(x: f64, mode: PrecisionMode) -> Result<f64, PrecisionError> {
    match mode {
        PrecisionMode::Double => Ok(x),
        PrecisionMode::Single => round_single(x),
    }
}

fn apply(op: FpOp, a: f64, b: f64) -> f64 {
    match op {
        FpOp::Add => a + b,
        FpOp::Sub => a - b,
        FpOp::Mul => a * b,
        FpOp::Div => a / b,
    }
}

/// Per-node floating-point operation counter.
///
/// Every estimation-related float operation a node performs is routed through
/// its counter, so a run can assert afterwards which nodes did floating-point
/// work at all (sensors under the head-side scheme must show zero).
#[derive(Debug, Default)]
pub struct FpOpCounter {
    ops: Cell<u64>,
}

impl FpOpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.ops.get()
    }

    pub fn op(&self, op: FpOp, a: f64, b: f64, mode: PrecisionMode) -> Result<f64, PrecisionError> {
        self.ops.set(self.ops.get() + 1);
        fp_op(op, a, b, mode)
    }

    pub fn constrain(&self, x: f64, mode: PrecisionMode) -> Result<f64, PrecisionError> {
        self.ops.set(self.ops.get() + 1);
        constrain(x, mode)
    }

    /// Native-width division by a mode-constrained divisor, counted as one
    /// operation. Used by the logical clock, whose tick bookkeeping stays in
    /// exact integer arithmetic while its rate parameter lives in a float
    /// register of the node's width.
    pub fn div_by_constrained(
        &self,
        numerator: f64,
        divisor: f64,
        mode: PrecisionMode,
    ) -> Result<f64, PrecisionError> {
        self.ops.set(self.ops.get() + 1);
        let d = constrain(divisor, mode)?;
        if d == 0.0 {
            return Err(PrecisionError::DivisionByZero);
        }
        let r = numerator / d;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(PrecisionError::NonFinite)
        }
    }
}
