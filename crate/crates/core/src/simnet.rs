//! Deterministic discrete-event engine over a static chain topology.
//!
//! A single global reference clock drives the event queue; node hardware
//! clocks are read-through affine views of it. Events with equal fire time
//! are processed in scheduling order via a sequence tiebreaker, so a run is a
//! pure function of its configuration (including the RNG seed): repeating it
//! bit-reproduces every sample and log record.
//!
//! Per round, the head's beacon cascades down the chain (each hop re-stamps
//! with its own clock), measurement events fire inside the interval, the
//! deepest node's report triggers on its filled bundle, and each gateway
//! forwards upward as soon as its child's report lands. Message latency is
//! propagation plus transmit- and receive-side interrupt latencies, sampled
//! per message from dedicated per-link streams.
//!
//! Ground truth (the reference time of every measurement event, and every
//! clock's true parameters) lives only in the engine's ledger; protocol and
//! estimation code see nothing but message contents and local clock reads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::clockcore::{ClockError, ClockParams, HardwareClock, ReferenceTime, Ticks};
use crate::estimation::{cr_ratio, EstimationError};
use crate::metrics::ErrorSample;
use crate::precision::PrecisionMode;
use crate::protocol::{
    BeaconOutcome, BeaconRequest, HeadNode, NodeId, ProtocolError, ReportResponse, SchemeMode,
    SensorNode,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("event causality violated: {next} fired after {prev}")]
    Causality { prev: f64, next: f64 },
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Per-message jitter component of the delay model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JitterSpec {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
    /// Normal distribution with negative draws clamped to zero.
    Gaussian { mean: f64, std: f64 },
}

impl JitterSpec {
    fn validate(&self, what: &str) -> Result<(), SimError> {
        let ok = match *self {
            JitterSpec::Constant(c) => c >= 0.0 && c.is_finite(),
            JitterSpec::Uniform { lo, hi } => lo >= 0.0 && hi >= lo && hi.is_finite(),
            JitterSpec::Gaussian { mean, std } => mean >= 0.0 && std >= 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!("{what}: {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            JitterSpec::Constant(c) => c,
            JitterSpec::Uniform { lo, hi } => {
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            }
            JitterSpec::Gaussian { mean, std } => {
                if std == 0.0 {
                    mean
                } else {
                    let n = Normal::new(mean, std).expect("validated");
                    n.sample(rng).max(0.0)
                }
            }
        }
    }
}

/// One-way message delay: constant propagation plus interrupt latencies at
/// the transmitting and receiving side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub propagation_seconds: f64,
    pub interrupt_tx: JitterSpec,
    pub interrupt_rx: JitterSpec,
}

impl DelayModel {
    /// Calibration used when a scenario does not pin its own delays:
    /// 1 us propagation, 5 us mean interrupt latency each side with
    /// 1.5 us jitter.
    pub fn default_calibration() -> Self {
        Self {
            propagation_seconds: 1e-6,
            interrupt_tx: JitterSpec::Gaussian { mean: 5e-6, std: 1.5e-6 },
            interrupt_rx: JitterSpec::Gaussian { mean: 5e-6, std: 1.5e-6 },
        }
    }

    /// Fully deterministic delays for exactness oracles.
    pub fn constant(propagation_seconds: f64, interrupt_each_side: f64) -> Self {
        Self {
            propagation_seconds,
            interrupt_tx: JitterSpec::Constant(interrupt_each_side),
            interrupt_rx: JitterSpec::Constant(interrupt_each_side),
        }
    }
}

/// Sample one message's total delay: propagation + tx interrupt + rx
/// interrupt. Always non-negative.
pub fn sample_delay(model: &DelayModel, rng: &mut ChaCha8Rng) -> f64 {
    model.propagation_seconds + model.interrupt_tx.sample(rng) + model.interrupt_rx.sample(rng)
}

/// How node clocks get their oscillator parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClockSetup {
    /// Per-node skew uniform in +/- `skew_ppm_max` ppm, offset uniform in
    /// [0, `offset_max_seconds`], shared drift intensity.
    Sampled {
        skew_ppm_max: f64,
        offset_max_seconds: f64,
        drift_ppm_per_sqrt_s: f64,
    },
    /// Explicit parameters, one entry per sensor node, head-adjacent first.
    Explicit(Vec<ClockParams>),
}

impl ClockSetup {
    pub fn default_sampled() -> Self {
        ClockSetup::Sampled {
            skew_ppm_max: 50.0,
            offset_max_seconds: 0.5,
            drift_ppm_per_sqrt_s: 0.0,
        }
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: SchemeMode,
    pub si_seconds: f64,
    pub duration_seconds: f64,
    pub bundle_size: u16,
    pub measurements_per_si: u16,
    /// Number of sensor nodes in the chain (hop count of the deepest node).
    pub hops: u16,
    pub clocks: ClockSetup,
    pub delay: DelayModel,
    pub rng_seed: u64,
    pub trim_fraction: f64,
    pub loss_probability: f64,
    /// Optional head-side estimator re-anchoring period, in rounds.
    pub re_anchor_rounds: Option<u32>,
}

impl ScenarioConfig {
    pub fn new(scheme: SchemeMode, si_seconds: f64, duration_seconds: f64) -> Self {
        Self {
            scheme,
            si_seconds,
            duration_seconds,
            bundle_size: 5,
            measurements_per_si: 5,
            hops: 1,
            clocks: ClockSetup::default_sampled(),
            delay: DelayModel::default_calibration(),
            rng_seed: 1,
            trim_fraction: 0.1,
            loss_probability: 0.0,
            re_anchor_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.si_seconds > 0.0 && self.si_seconds.is_finite()) {
            return fail(format!("si_seconds must be > 0, got {}", self.si_seconds));
        }
        if self.duration_seconds.is_nan() || self.duration_seconds < 10.0 * self.si_seconds {
            return fail(format!(
                "duration_seconds ({}) must be at least 10 * si_seconds ({})",
                self.duration_seconds, self.si_seconds
            ));
        }
        if self.bundle_size == 0 {
            return fail("bundle_size must be >= 1".into());
        }
        if self.hops == 0 {
            return fail("hops must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return fail(format!("trim_fraction must be in [0, 1), got {}", self.trim_fraction));
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return fail(format!(
                "loss_probability must be in [0, 1], got {}",
                self.loss_probability
            ));
        }
        if !self.delay.propagation_seconds.is_finite() || self.delay.propagation_seconds <= 0.0 {
            return fail(format!(
                "propagation_seconds must be > 0 to keep arrivals causal, got {}",
                self.delay.propagation_seconds
            ));
        }
        self.delay.interrupt_tx.validate("interrupt_tx")?;
        self.delay.interrupt_rx.validate("interrupt_rx")?;
        match &self.clocks {
            ClockSetup::Sampled {
                skew_ppm_max,
                offset_max_seconds,
                drift_ppm_per_sqrt_s,
            } => {
                if !(*skew_ppm_max >= 0.0 && *offset_max_seconds >= 0.0 && *drift_ppm_per_sqrt_s >= 0.0) {
                    return fail("sampled clock parameters must be non-negative".into());
                }
            }
            ClockSetup::Explicit(params) => {
                if params.len() != self.hops as usize {
                    return fail(format!(
                        "explicit clock list has {} entries for {} hops",
                        params.len(),
                        self.hops
                    ));
                }
                for p in params {
                    ClockParams::new(p.skew, p.offset, p.drift_rate_std)
                        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// Number of beacon rounds the run executes.
    pub fn rounds(&self) -> u32 {
        (self.duration_seconds / self.si_seconds).floor() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgKind {
    Beacon,
    Report,
}

/// One delivered message, with reference-clock send and receive times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageRecord {
    pub kind: MsgKind,
    pub from: NodeId,
    pub to: NodeId,
    pub round: u32,
    pub send_ref: f64,
    pub recv_ref: f64,
}

/// End-of-run diagnostics for one sensor node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRunStats {
    pub node: NodeId,
    pub hop: u16,
    /// Floating-point operations the node performed during the run.
    pub fp_ops: u64,
    /// The node's stored (width-constrained) frequency ratio, if it keeps one.
    pub stored_ratio: Option<f64>,
    /// Double-precision cumulative ratio over the node's final sync window.
    pub converged_ratio_full: Option<f64>,
    pub true_final_skew: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub samples: Vec<ErrorSample>,
    pub messages: Vec<MessageRecord>,
    pub node_stats: Vec<NodeRunStats>,
    pub rounds: u32,
    /// Reports or measurements the head could not process.
    pub rejected: u64,
    /// Messages dropped by the loss model.
    pub lost_messages: u64,
}

impl RunResult {
    pub fn count_messages(&self, kind: MsgKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }
}

#[derive(Debug, Clone)]
enum Msg {
    Beacon(BeaconRequest),
    Report(ReportResponse),
}

#[derive(Debug, Clone)]
enum EventKind {
    BeaconDue { round: u32 },
    MeasurementDue { node_idx: usize, seq: u32 },
    MsgArrival { to_idx: usize, from: NodeId, send_ref: f64, msg: Msg },
    DriftUpdate,
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert to pop earliest (time, seq) first.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Engine {
    cfg: ScenarioConfig,
    now: f64,
    queue: BinaryHeap<Event>,
    next_seq: u64,
    head: HeadNode,
    sensors: Vec<SensorNode>,
    clocks: Vec<HardwareClock>,
    link_rngs: Vec<ChaCha8Rng>,
    drift_rngs: Vec<ChaCha8Rng>,
    loss_rng: ChaCha8Rng,
    /// True reference time of each (sensor, seq) measurement event.
    truth: Vec<Vec<f64>>,
    /// Last round each sensor reported, for straggler flushing.
    emitted_round: Vec<Option<u32>>,
    samples: Vec<ErrorSample>,
    messages: Vec<MessageRecord>,
    rejected: u64,
    lost: u64,
}

/// Execute one scenario. Fully deterministic given the configuration.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult, SimError> {
    cfg.validate()?;
    let mut engine = Engine::new(cfg.clone())?;
    engine.schedule_static();
    engine.drain()?;
    Ok(engine.finish())
}

impl Engine {
    fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        let mut master = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        // Derivation order is part of the reproducibility contract.
        let mut clock_rng = ChaCha8Rng::seed_from_u64(master.gen());
        let link_rngs: Vec<ChaCha8Rng> = (0..cfg.hops)
            .map(|_| ChaCha8Rng::seed_from_u64(master.gen()))
            .collect();
        let drift_rngs: Vec<ChaCha8Rng> = (0..cfg.hops)
            .map(|_| ChaCha8Rng::seed_from_u64(master.gen()))
            .collect();
        let loss_rng = ChaCha8Rng::seed_from_u64(master.gen());

        let mut clocks = Vec::with_capacity(cfg.hops as usize + 1);
        // The head's hardware clock is the reference.
        clocks.push(HardwareClock::new(ClockParams::ideal()));
        match &cfg.clocks {
            ClockSetup::Sampled {
                skew_ppm_max,
                offset_max_seconds,
                drift_ppm_per_sqrt_s,
            } => {
                for _ in 0..cfg.hops {
                    let skew = if *skew_ppm_max > 0.0 {
                        clock_rng.gen_range(-skew_ppm_max * 1e-6..skew_ppm_max * 1e-6)
                    } else {
                        0.0
                    };
                    let offset = if *offset_max_seconds > 0.0 {
                        clock_rng.gen_range(0.0..*offset_max_seconds)
                    } else {
                        0.0
                    };
                    let params = ClockParams::new(skew, offset, *drift_ppm_per_sqrt_s)
                        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
                    clocks.push(HardwareClock::new(params));
                }
            }
            ClockSetup::Explicit(params) => {
                for p in params {
                    clocks.push(HardwareClock::new(*p));
                }
            }
        }

        let chain: Vec<NodeId> = (1..=cfg.hops).map(NodeId).collect();
        let head = HeadNode::new(NodeId(0), cfg.scheme, chain.clone(), cfg.re_anchor_rounds);
        let sensors: Vec<SensorNode> = chain
            .iter()
            .map(|&id| SensorNode::new(id, cfg.scheme, cfg.bundle_size as usize))
            .collect();
        let truth = vec![Vec::new(); cfg.hops as usize];
        let emitted_round = vec![None; cfg.hops as usize];

        Ok(Self {
            cfg,
            now: 0.0,
            queue: BinaryHeap::new(),
            next_seq: 0,
            head,
            sensors,
            clocks,
            link_rngs,
            drift_rngs,
            loss_rng,
            truth,
            emitted_round,
            samples: Vec::new(),
            messages: Vec::new(),
            rejected: 0,
            lost: 0,
        })
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event { time, seq, kind });
    }

    fn schedule_static(&mut self) {
        let rounds = self.cfg.rounds();
        let si = self.cfg.si_seconds;
        for k in 0..rounds {
            self.push(k as f64 * si, EventKind::BeaconDue { round: k });
        }
        let rate = self.cfg.measurements_per_si as u32;
        if rate > 0 {
            for node_idx in 1..=self.cfg.hops as usize {
                for k in 0..rounds {
                    for j in 0..rate {
                        // Uniform spacing inside the interval, clear of the
                        // round boundaries.
                        let t = k as f64 * si + (j as f64 + 0.5) * si / rate as f64;
                        let seq = k * rate + j;
                        self.push(t, EventKind::MeasurementDue { node_idx, seq });
                    }
                }
            }
        }
        let drift_enabled = self.clocks.iter().any(|c| c.params().drift_rate_std > 0.0);
        if drift_enabled {
            // Fixed 1 Hz cadence on a dedicated stream, offset to avoid the
            // beacon grid: skew paths are then identical across scenarios
            // that share a seed, whatever their SI.
            let mut t = 0.25;
            while t < self.cfg.duration_seconds {
                self.push(t, EventKind::DriftUpdate);
                t += 1.0;
            }
        }
    }

    fn drain(&mut self) -> Result<(), SimError> {
        while let Some(ev) = self.queue.pop() {
            if ev.time < self.now {
                return Err(SimError::Causality {
                    prev: self.now,
                    next: ev.time,
                });
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::BeaconDue { round } => self.on_beacon_due(round)?,
                EventKind::MeasurementDue { node_idx, seq } => {
                    self.on_measurement_due(node_idx, seq)?
                }
                EventKind::MsgArrival { to_idx, from, send_ref, msg } => {
                    self.on_arrival(to_idx, from, send_ref, msg)?
                }
                EventKind::DriftUpdate => self.on_drift_update()?,
            }
        }
        Ok(())
    }

    fn ref_now(&self) -> ReferenceTime {
        ReferenceTime::new(self.now).expect("event times are finite and non-negative")
    }

    fn read_clock(&mut self, idx: usize) -> Result<Ticks, ClockError> {
        let now = self.ref_now();
        self.clocks[idx].read(now)
    }

    /// Send a message from `from_idx` over the link below it (toward
    /// `to_idx`); draws the delay and schedules the arrival.
    fn send(&mut self, from_idx: usize, to_idx: usize, msg: Msg) {
        let link = from_idx.min(to_idx);
        if self.cfg.loss_probability > 0.0 {
            let u: f64 = self.loss_rng.gen();
            if u < self.cfg.loss_probability {
                self.lost += 1;
                return;
            }
        }
        let delay = sample_delay(&self.cfg.delay, &mut self.link_rngs[link]);
        let from = if from_idx == 0 { NodeId(0) } else { NodeId(from_idx as u16) };
        self.push(
            self.now + delay,
            EventKind::MsgArrival {
                to_idx,
                from,
                send_ref: self.now,
                msg,
            },
        );
    }

    fn on_beacon_due(&mut self, round: u32) -> Result<(), SimError> {
        let t1 = self.read_clock(0)?;
        let beacon = self.head.emit_beacon(t1);
        debug_assert_eq!(beacon.round, round);
        self.send(0, 1, Msg::Beacon(beacon));
        Ok(())
    }

    fn on_measurement_due(&mut self, node_idx: usize, seq: u32) -> Result<(), SimError> {
        let t_m = self.read_clock(node_idx)?;
        let sensor_slot = node_idx - 1;
        debug_assert_eq!(self.truth[sensor_slot].len(), seq as usize);
        self.truth[sensor_slot].push(self.now);
        self.sensors[sensor_slot].on_measurement(seq, t_m)?;
        // The deepest node's report triggers on a filled bundle; gateways
        // wait for their child's report instead.
        let is_leaf = node_idx == self.cfg.hops as usize;
        if is_leaf
            && self.sensors[sensor_slot].staged_measurements() >= self.cfg.bundle_size as usize
            && self.sensors[sensor_slot].has_round_staged()
        {
            self.emit_report(node_idx)?;
        }
        Ok(())
    }

    fn on_arrival(
        &mut self,
        to_idx: usize,
        from: NodeId,
        send_ref: f64,
        msg: Msg,
    ) -> Result<(), SimError> {
        match msg {
            Msg::Beacon(beacon) => self.on_beacon_arrival(to_idx, from, send_ref, beacon),
            Msg::Report(report) => self.on_report_arrival(to_idx, from, send_ref, report),
        }
    }

    fn on_beacon_arrival(
        &mut self,
        to_idx: usize,
        from: NodeId,
        send_ref: f64,
        beacon: BeaconRequest,
    ) -> Result<(), SimError> {
        let local_rx = self.read_clock(to_idx)?;
        let sensor_slot = to_idx - 1;
        // A node that still holds an unreported round (possible when the
        // bundle never fills) flushes it before adopting the new round.
        self.maybe_flush_stale_round(to_idx)?;
        let outcome = self.sensors[sensor_slot].on_beacon(&beacon, local_rx)?;
        self.messages.push(MessageRecord {
            kind: MsgKind::Beacon,
            from,
            to: NodeId(to_idx as u16),
            round: beacon.round,
            send_ref,
            recv_ref: self.now,
        });
        if outcome == BeaconOutcome::DuplicateDropped {
            return Ok(());
        }
        let is_leaf = to_idx == self.cfg.hops as usize;
        if !is_leaf {
            // Cascade downward, re-stamped against this node's own clock.
            let t1 = self.read_clock(to_idx)?;
            self.sensors[sensor_slot].record_child_beacon(beacon.round, t1);
            let forwarded = BeaconRequest {
                round: beacon.round,
                t1,
                hop_origin: NodeId(to_idx as u16),
            };
            self.send(to_idx, to_idx + 1, Msg::Beacon(forwarded));
        } else if self.cfg.measurements_per_si == 0 {
            // Pure synchronization traffic: answer the beacon directly.
            self.emit_report(to_idx)?;
        }
        Ok(())
    }

    fn on_report_arrival(
        &mut self,
        to_idx: usize,
        from: NodeId,
        send_ref: f64,
        report: ReportResponse,
    ) -> Result<(), SimError> {
        let local_rx = self.read_clock(to_idx)?;
        self.messages.push(MessageRecord {
            kind: MsgKind::Report,
            from,
            to: NodeId(to_idx as u16),
            round: report.round,
            send_ref,
            recv_ref: self.now,
        });
        if to_idx == 0 {
            match self.head.on_report(&report, local_rx) {
                Ok(translated) => {
                    for t in translated {
                        let slot = t.origin.0 as usize - 1;
                        let truth = self.truth[slot][t.seq as usize];
                        self.samples.push(ErrorSample {
                            node: t.origin,
                            hop: t.origin.0,
                            event_ref_time: truth,
                            estimate: t.est_ref_seconds,
                            error: t.est_ref_seconds - truth,
                        });
                    }
                }
                Err(ProtocolError::MissingAnchor { .. }) => self.rejected += 1,
                Err(e) => return Err(e.into()),
            }
            return Ok(());
        }
        let sensor_slot = to_idx - 1;
        self.sensors[sensor_slot].on_child_report(&report, local_rx)?;
        if self.sensors[sensor_slot].has_round_staged() {
            self.emit_report(to_idx)?;
        }
        Ok(())
    }

    fn on_drift_update(&mut self) -> Result<(), SimError> {
        let now = self.ref_now();
        for (slot, clock) in self.clocks.iter_mut().skip(1).enumerate() {
            if clock.params().drift_rate_std > 0.0 {
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                let draw = normal.sample(&mut self.drift_rngs[slot]);
                clock.apply_drift_step(now, draw)?;
            }
        }
        Ok(())
    }

    fn emit_report(&mut self, node_idx: usize) -> Result<(), SimError> {
        let t3 = self.read_clock(node_idx)?;
        let sensor_slot = node_idx - 1;
        let report = self.sensors[sensor_slot].build_report(t3)?;
        self.emitted_round[sensor_slot] = Some(report.round);
        self.send(node_idx, node_idx - 1, Msg::Report(report));
        Ok(())
    }

    fn maybe_flush_stale_round(&mut self, node_idx: usize) -> Result<(), SimError> {
        let sensor_slot = node_idx - 1;
        let is_leaf = node_idx == self.cfg.hops as usize;
        if !is_leaf || !self.sensors[sensor_slot].has_round_staged() {
            return Ok(());
        }
        let staged = self.sensors[sensor_slot].staged_round();
        if staged.is_some() && staged != self.emitted_round[sensor_slot] {
            self.emit_report(node_idx)?;
        }
        Ok(())
    }

    fn finish(mut self) -> RunResult {
        if self.cfg.scheme == SchemeMode::Ahts {
            // Timestamping-only contract: under the head-side scheme no
            // sensor may have touched floating point.
            for sensor in &self.sensors {
                debug_assert_eq!(
                    sensor.fp_ops(),
                    0,
                    "sensor {:?} performed float ops in head-side mode",
                    sensor.id()
                );
            }
        }
        let mut node_stats = Vec::with_capacity(self.sensors.len());
        for (slot, sensor) in self.sensors.iter().enumerate() {
            let converged = sensor.ratio_window().and_then(|(t1z, t2z, t1k, t2k)| {
                cr_ratio(t1z, t2z, t1k, t2k, PrecisionMode::Double).ok()
            });
            node_stats.push(NodeRunStats {
                node: sensor.id(),
                hop: (slot + 1) as u16,
                fp_ops: sensor.fp_ops(),
                stored_ratio: sensor.stored_ratio(),
                converged_ratio_full: converged,
                true_final_skew: self.clocks[slot + 1].current_skew(),
            });
        }
        self.rejected += self.head.rejected_reports();
        RunResult {
            samples: self.samples,
            messages: self.messages,
            node_stats,
            rounds: self.cfg.rounds(),
            rejected: self.rejected,
            lost_messages: self.lost,
        }
    }
}
