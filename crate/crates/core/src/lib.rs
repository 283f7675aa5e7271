//! Deterministic simulation and estimation library for propagation-delay-
//! and clock-skew-compensated time synchronization in multi-hop wireless
//! sensor networks.
//!
//! The library compares two placements of the synchronization pipeline over
//! the same reverse two-way message exchange: sensor-side estimation under
//! single-precision arithmetic (`EeAscfr`) and head-side estimation at full
//! precision with timestamping-only sensors (`Ahts`).
//!
//! Modules:
//! - [`clockcore`]: reference time, microsecond tick counters, affine
//!   hardware clocks with optional drift, logical clock update rules.
//! - [`precision`]: binary32 arithmetic emulation and precision-loss
//!   measurement.
//! - [`estimation`]: cumulative-ratio frequency estimation, two-way
//!   offset/delay estimation, single- and multi-hop timestamp translation.
//! - [`protocol`]: message formats, head/sensor/gateway state machines, and
//!   the canonical wire encoding.
//! - [`simnet`]: the discrete-event engine and scenario configuration.
//! - [`metrics`]: trimmed MAE/MSE, histograms, and error growth slopes.

pub mod clockcore;
pub mod estimation;
pub mod metrics;
pub mod precision;
pub mod protocol;
pub mod simnet;

pub use clockcore::{ClockParams, HardwareClock, LogicalClockState, ReferenceTime, Ticks};
pub use estimation::{
    cr_ratio, offset_delay, predicted_error, translate_chain, translate_timestamp, EstimatorState,
};
pub use metrics::{error_growth_slope, histogram, trimmed_stats, ErrorSample, ErrorStats};
pub use precision::{compute_precision_loss, fp_op, round_single, FpOp, PrecisionLoss, PrecisionMode};
pub use protocol::{
    BeaconRequest, HeadNode, Measurement, NodeId, ReportResponse, SchemeMode, SensorNode,
    SyncRecord,
};
pub use simnet::{
    run, sample_delay, ClockSetup, DelayModel, JitterSpec, MsgKind, RunResult, ScenarioConfig,
    SimError,
};
