//! Message formats and per-role state machines for the reverse two-way
//! exchange with measurement bundling.
//!
//! The head periodically transmits a `BeaconRequest` carrying its transmit
//! timestamp `t1`. Each sensor records its receive timestamp `t2`, and its
//! eventual `ReportResponse` carries `t2`, the transmit timestamp `t3`, and
//! the staged measurement bundle; the head records `t4` on reception,
//! completing the four-timestamp round. Intermediate nodes (gateways) cascade
//! beacons downward with their own `t1`, complete their child link's
//! `SyncRecord` when the child's report arrives, and forward everything
//! upward verbatim inside their own report: a gateway never performs
//! translation arithmetic, so an n-hop chain costs n beacons and n reports
//! per round, the same message count as one-way dissemination.
//!
//! Two computation placements are supported. Under [`SchemeMode::Ahts`] all
//! estimation runs at the head in double precision and sensors only
//! timestamp. Under [`SchemeMode::EeAscfr`] each sensor estimates its own
//! frequency ratio in single precision and pre-translates measurement times
//! through its logical clock before transmission; the head contributes only
//! anchor and delay bookkeeping for those values.
//!
//! # Wire layout
//!
//! Canonical little-endian encoding, used for logs and golden tests:
//!
//! ```text
//! BeaconRequest:  [0x01][origin u16][round u32][t1 u64]
//! ReportResponse: [0x02][origin u16][round u32][t2 u64][t3 u64]
//!                 [anchor u16: 0|1][{anchor_round u32}{t2_zero u64} if 1]
//!                 [bundle u16][{seq u32}{t_m u64} ...]
//!                 [relayed_sync u16]
//!                 [{round u32}{upper u16}{lower u16}{t1..t4 u64 x4} ...]
//!                 [relayed_bundles u16][{node u16}{count u16}{seq,t_m} ...]
//! ```
//!
//! Timestamps are u64 microsecond ticks, counts u16, ids u16, rounds u32.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clockcore::{ClockError, LogicalClockState, Ticks};
use crate::estimation::{
    cr_ratio_counted, offset_delay, translate_chain, EstimationError, EstimatorState,
};
use crate::precision::{FpOpCounter, PrecisionMode};

/// Node identifier; 0 is conventionally the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

/// Computation placement of the synchronization pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeMode {
    /// Ratio estimation and the logical clock run on the sensor at single
    /// precision; the head only compensates offset and delay.
    EeAscfr,
    /// Sensors only timestamp; every estimate is computed at the head at
    /// double precision.
    Ahts,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("report for round {round} from {node:?} does not match any staged beacon")]
    UnknownRound { node: NodeId, round: u32 },
    #[error("report from {node:?} rejected: anchors unknown and no t2_zero present")]
    MissingAnchor { node: NodeId },
    #[error("sync record references unknown link {upper:?} -> {lower:?}")]
    UnknownLink { upper: NodeId, lower: NodeId },
    #[error("report emission with no staged synchronization data")]
    EmptyRoundEmit,
    #[error("gateway has no beacon staged for child round {round}")]
    MissingChildBeacon { round: u32 },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Clock(#[from] ClockError),
}

/// Head-initiated synchronization trigger carrying the transmit timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconRequest {
    pub round: u32,
    pub t1: Ticks,
    pub hop_origin: NodeId,
}

/// One measurement as it travels on the wire: sequence id and the timestamp
/// the origin node recorded (raw hardware ticks, or the sensor's logical
/// time when the sensor-side scheme pre-translates). Ground truth about the
/// event lives only in the simulator's ledger, never in messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub seq: u32,
    pub t_m: Ticks,
}

/// Four collected timestamps of one round on one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncRecord {
    pub round: u32,
    pub upper: NodeId,
    pub lower: NodeId,
    pub t1: Ticks,
    pub t2: Ticks,
    pub t3: Ticks,
    pub t4: Ticks,
}

/// Sensor-to-head report: the node's own sync timestamps and bundle, plus
/// everything relayed on behalf of lower nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportResponse {
    pub origin: NodeId,
    pub round: u32,
    pub t2: Ticks,
    pub t3: Ticks,
    /// First-round anchor `(anchor_round, T2_0)`, present until the next
    /// beacon round implicitly acknowledges delivery.
    pub t2_zero: Option<(u32, Ticks)>,
    pub bundle: Vec<Measurement>,
    /// At most one record per upstream hop per round, deepest link last.
    pub relayed_sync: Vec<SyncRecord>,
    pub relayed_bundles: Vec<(NodeId, Vec<Measurement>)>,
}

/// A measurement translated to reference time by the head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslatedMeasurement {
    pub origin: NodeId,
    pub seq: u32,
    pub est_ref_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeaconOutcome {
    /// Beacon accepted and staged for this round.
    Accepted,
    /// Same or older round already processed; kept the first.
    DuplicateDropped,
}

#[derive(Debug, Clone, Copy)]
struct OwnAnchors {
    round: u32,
    t1_zero: Ticks,
    t2_zero: Ticks,
}

#[derive(Debug, Clone, Copy)]
struct RoundStage {
    round: u32,
    t2: Ticks,
}

/// Sensor state machine; a node with a child additionally acts as gateway
/// for everything arriving from below.
#[derive(Debug)]
pub struct SensorNode {
    id: NodeId,
    scheme: SchemeMode,
    bundle_size: usize,
    anchors: Option<OwnAnchors>,
    anchor_delivered: bool,
    current: Option<RoundStage>,
    latest_round: Option<u32>,
    logical: Option<LogicalClockState>,
    staged: Vec<Measurement>,
    relayed_sync: Vec<SyncRecord>,
    relayed_bundles: Vec<(NodeId, Vec<Measurement>)>,
    child_beacon_t1: BTreeMap<u32, Ticks>,
    /// Latest own-link (t1, t2) pair, kept for end-of-run ratio diagnostics.
    latest_t1_t2: Option<(Ticks, Ticks)>,
    fp: FpOpCounter,
}

impl SensorNode {
    pub fn new(id: NodeId, scheme: SchemeMode, bundle_size: usize) -> Self {
        Self {
            id,
            scheme,
            bundle_size: bundle_size.max(1),
            anchors: None,
            anchor_delivered: false,
            current: None,
            latest_round: None,
            logical: None,
            staged: Vec::new(),
            relayed_sync: Vec::new(),
            relayed_bundles: Vec::new(),
            child_beacon_t1: BTreeMap::new(),
            latest_t1_t2: None,
            fp: FpOpCounter::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    /// Number of floating-point operations this node has performed.
    pub fn fp_ops(&self) -> u64 {
        self.fp.count()
    }

    pub fn staged_measurements(&self) -> usize {
        self.staged.len()
    }

    pub fn has_round_staged(&self) -> bool {
        self.current.is_some()
    }

    pub fn staged_round(&self) -> Option<u32> {
        self.current.map(|c| c.round)
    }

    /// Stored single-precision frequency ratio, when this node estimates one.
    pub fn stored_ratio(&self) -> Option<f64> {
        self.logical.as_ref().map(|l| l.ratio_est())
    }

    /// Anchors and latest sync timestamps for end-of-run diagnostics:
    /// `(t1_zero, t2_zero, t1_latest, t2_latest)`.
    pub fn ratio_window(&self) -> Option<(Ticks, Ticks, Ticks, Ticks)> {
        let a = self.anchors?;
        let latest = self.latest_t1_t2?;
        Some((a.t1_zero, a.t2_zero, latest.0, latest.1))
    }

    /// Handle a beacon from the upper node at local receive time `local_rx`.
    pub fn on_beacon(
        &mut self,
        beacon: &BeaconRequest,
        local_rx: Ticks,
    ) -> Result<BeaconOutcome, ProtocolError> {
        if let Some(latest) = self.latest_round {
            if beacon.round <= latest {
                return Ok(BeaconOutcome::DuplicateDropped);
            }
        }
        self.latest_round = Some(beacon.round);

        match self.anchors {
            None => {
                self.anchors = Some(OwnAnchors {
                    round: beacon.round,
                    t1_zero: beacon.t1,
                    t2_zero: local_rx,
                });
                if self.scheme == SchemeMode::EeAscfr {
                    // The logical clock starts equal to the hardware clock at
                    // the anchor; only its rate gets corrected later.
                    self.logical =
                        Some(LogicalClockState::anchored_at(local_rx, local_rx.as_secs()));
                }
            }
            Some(a) => {
                if beacon.round > a.round {
                    // A later beacon implies the first report went out.
                    self.anchor_delivered = true;
                }
                if self.scheme == SchemeMode::EeAscfr && beacon.round > a.round {
                    let ratio = cr_ratio_counted(
                        a.t1_zero,
                        a.t2_zero,
                        beacon.t1,
                        local_rx,
                        PrecisionMode::Single,
                        &self.fp,
                    )?;
                    if let Some(logical) = self.logical.as_mut() {
                        logical.set_ratio(ratio)?;
                    }
                }
            }
        }
        self.latest_t1_t2 = Some((beacon.t1, local_rx));
        self.current = Some(RoundStage {
            round: beacon.round,
            t2: local_rx,
        });
        Ok(BeaconOutcome::Accepted)
    }

    /// Record the transmit timestamp of this node's own beacon toward its
    /// child for `round`.
    pub fn record_child_beacon(&mut self, round: u32, t1: Ticks) {
        self.child_beacon_t1.insert(round, t1);
        // Staged beacons older than the relaying horizon are dead.
        while self.child_beacon_t1.len() > 8 {
            let oldest = *self.child_beacon_t1.keys().next().unwrap();
            self.child_beacon_t1.remove(&oldest);
        }
    }

    /// Timestamp a measurement event. Under the sensor-side scheme the value
    /// is translated through this node's logical clock at single precision
    /// right away; otherwise the raw hardware ticks are staged untouched.
    pub fn on_measurement(&mut self, seq: u32, t_m: Ticks) -> Result<(), ProtocolError> {
        let wire_value = match (self.scheme, self.logical.as_ref()) {
            (SchemeMode::EeAscfr, Some(logical)) => {
                let secs = logical.logical_anchored_counted(t_m, PrecisionMode::Single, &self.fp)?;
                Ticks::from_secs_floor(secs)
            }
            // Before the first beacon the logical clock is the identity on
            // the hardware clock, so raw ticks are the same thing.
            _ => t_m,
        };
        self.staged.push(Measurement {
            seq,
            t_m: wire_value,
        });
        Ok(())
    }

    /// Absorb a child's report: complete the child link's four-timestamp
    /// record with our receive time and stage everything for forwarding.
    /// The child's bundle is carried bit-identically; no arithmetic happens.
    pub fn on_child_report(
        &mut self,
        report: &ReportResponse,
        local_rx: Ticks,
    ) -> Result<(), ProtocolError> {
        let t1 = *self
            .child_beacon_t1
            .get(&report.round)
            .ok_or(ProtocolError::MissingChildBeacon {
                round: report.round,
            })?;
        let rec = SyncRecord {
            round: report.round,
            upper: self.id,
            lower: report.origin,
            t1,
            t2: report.t2,
            t3: report.t3,
            t4: local_rx,
        };
        self.relayed_sync.push(rec);
        self.relayed_sync.extend(report.relayed_sync.iter().copied());
        self.relayed_bundles
            .push((report.origin, report.bundle.clone()));
        self.relayed_bundles
            .extend(report.relayed_bundles.iter().cloned());
        Ok(())
    }

    /// Build this node's report for the current round, transmitted at local
    /// time `t3`. Drains at most one bundle's worth of own measurements and
    /// all relayed state.
    pub fn build_report(&mut self, t3: Ticks) -> Result<ReportResponse, ProtocolError> {
        let current = self.current.ok_or(ProtocolError::EmptyRoundEmit)?;
        let take = self.staged.len().min(self.bundle_size);
        let bundle: Vec<Measurement> = self.staged.drain(..take).collect();
        let t2_zero = match (self.anchor_delivered, self.anchors) {
            (false, Some(a)) => Some((a.round, a.t2_zero)),
            _ => None,
        };
        Ok(ReportResponse {
            origin: self.id,
            round: current.round,
            t2: current.t2,
            t3,
            t2_zero,
            bundle,
            relayed_sync: std::mem::take(&mut self.relayed_sync),
            relayed_bundles: std::mem::take(&mut self.relayed_bundles),
        })
    }
}

#[derive(Debug)]
struct LinkState {
    upper: NodeId,
    lower: NodeId,
    est: Option<EstimatorState>,
    anchor_round: Option<u32>,
}

/// Head state machine: stages its own beacons, completes the direct link's
/// records, ingests relayed records, maintains one estimator per link, and
/// translates every delivered measurement into reference time.
#[derive(Debug)]
pub struct HeadNode {
    id: NodeId,
    scheme: SchemeMode,
    /// Sensors ordered from the direct child down to the chain tail.
    chain: Vec<NodeId>,
    links: Vec<LinkState>,
    beacon_t1: BTreeMap<u32, Ticks>,
    next_round: u32,
    /// Bundles whose translation chain was not ready on arrival.
    pending: Vec<(NodeId, Vec<Measurement>)>,
    re_anchor_rounds: Option<u32>,
    fp: FpOpCounter,
    rejected_reports: u64,
    skipped_rounds: u64,
}

impl HeadNode {
    pub fn new(id: NodeId, scheme: SchemeMode, chain: Vec<NodeId>, re_anchor_rounds: Option<u32>) -> Self {
        let mut links = Vec::with_capacity(chain.len());
        let mut upper = id;
        for &lower in &chain {
            links.push(LinkState {
                upper,
                lower,
                est: None,
                anchor_round: None,
            });
            upper = lower;
        }
        Self {
            id,
            scheme,
            chain,
            links,
            beacon_t1: BTreeMap::new(),
            next_round: 0,
            pending: Vec::new(),
            re_anchor_rounds,
            fp: FpOpCounter::new(),
            rejected_reports: 0,
            skipped_rounds: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn fp_ops(&self) -> u64 {
        self.fp.count()
    }

    pub fn rejected_reports(&self) -> u64 {
        self.rejected_reports
    }

    /// Rounds whose delay sample was rejected as an outlier.
    pub fn skipped_rounds(&self) -> u64 {
        self.skipped_rounds
    }

    pub fn link_estimator(&self, lower: NodeId) -> Option<&EstimatorState> {
        self.links
            .iter()
            .find(|l| l.lower == lower)
            .and_then(|l| l.est.as_ref())
    }

    /// Emit the next beacon at head transmit time `now`. The round counter
    /// increments by exactly one per beacon.
    pub fn emit_beacon(&mut self, now: Ticks) -> BeaconRequest {
        let round = self.next_round;
        self.next_round += 1;
        self.beacon_t1.insert(round, now);
        BeaconRequest {
            round,
            t1: now,
            hop_origin: self.id,
        }
    }

    /// Ingest a report received at head time `t4`; returns the reference-time
    /// estimate of every measurement that became translatable.
    pub fn on_report(
        &mut self,
        report: &ReportResponse,
        t4: Ticks,
    ) -> Result<Vec<TranslatedMeasurement>, ProtocolError> {
        let t1 = *self
            .beacon_t1
            .get(&report.round)
            .ok_or(ProtocolError::UnknownRound {
                node: report.origin,
                round: report.round,
            })?;
        let direct = self.chain.first().copied();
        if direct != Some(report.origin) {
            return Err(ProtocolError::UnknownLink {
                upper: self.id,
                lower: report.origin,
            });
        }

        // Direct link anchors come from the embedded first-round anchor.
        if self.links[0].est.is_none() {
            match report.t2_zero {
                Some((anchor_round, t2_zero)) => {
                    let t1_zero = *self.beacon_t1.get(&anchor_round).ok_or(
                        ProtocolError::UnknownRound {
                            node: report.origin,
                            round: anchor_round,
                        },
                    )?;
                    self.links[0].est = Some(EstimatorState::new(t1_zero, t2_zero, anchor_round));
                    self.links[0].anchor_round = Some(anchor_round);
                }
                None => {
                    self.rejected_reports += 1;
                    return Err(ProtocolError::MissingAnchor {
                        node: report.origin,
                    });
                }
            }
        }

        let own_rec = SyncRecord {
            round: report.round,
            upper: self.id,
            lower: report.origin,
            t1,
            t2: report.t2,
            t3: report.t3,
            t4,
        };
        self.apply_sync_record(0, &own_rec)?;

        for rec in &report.relayed_sync {
            let idx = self
                .links
                .iter()
                .position(|l| l.upper == rec.upper && l.lower == rec.lower)
                .ok_or(ProtocolError::UnknownLink {
                    upper: rec.upper,
                    lower: rec.lower,
                })?;
            if self.links[idx].est.is_none() {
                self.links[idx].est = Some(EstimatorState::new(rec.t1, rec.t2, rec.round));
                self.links[idx].anchor_round = Some(rec.round);
            }
            self.apply_sync_record(idx, rec)?;
        }

        let mut out = Vec::new();
        // Deferred bundles first: they are older than this report's.
        let pending = std::mem::take(&mut self.pending);
        for (origin, bundle) in pending {
            self.translate_bundle(origin, bundle, &mut out);
        }
        self.translate_bundle(report.origin, report.bundle.clone(), &mut out);
        for (origin, bundle) in report.relayed_bundles.clone() {
            self.translate_bundle(origin, bundle, &mut out);
        }
        Ok(out)
    }

    fn apply_sync_record(&mut self, idx: usize, rec: &SyncRecord) -> Result<(), ProtocolError> {
        let link = &mut self.links[idx];
        let Some(est) = link.est.as_mut() else {
            return Ok(());
        };
        // Keep-first: ignore records at or before the round already applied.
        if est.is_ready() && rec.round <= est.last_round() {
            return Ok(());
        }
        if let Some(period) = self.re_anchor_rounds {
            let anchor_round = link.anchor_round.unwrap_or(0);
            if rec.round.saturating_sub(anchor_round) >= period {
                *est = EstimatorState::new(rec.t1, rec.t2, rec.round);
                link.anchor_round = Some(rec.round);
                return Ok(());
            }
        }
        if rec.round <= link.anchor_round.unwrap_or(0) {
            // The anchor exchange itself carries no rate information yet.
            return Ok(());
        }
        let ratio = cr_ratio_counted(
            est.t1_zero(),
            est.t2_zero(),
            rec.t1,
            rec.t2,
            PrecisionMode::Double,
            &self.fp,
        )?;
        // A drifting oscillator can push the skew-corrected turnaround past
        // the measured round trip on a long interval; such a round carries
        // no usable delay sample, so keep the previous estimates.
        match offset_delay(rec.t1, rec.t2, rec.t3, rec.t4, ratio) {
            Ok((offset, delay)) => est.set_estimates(ratio, offset, delay, rec.round)?,
            Err(EstimationError::NegativeRoundTrip { .. }) => self.skipped_rounds += 1,
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn chain_to(&self, origin: NodeId) -> Option<Vec<EstimatorState>> {
        let depth = self.chain.iter().position(|&n| n == origin)? + 1;
        let mut states = Vec::with_capacity(depth);
        for link in &self.links[..depth] {
            let est = link.est.as_ref()?;
            if !est.is_ready() {
                return None;
            }
            states.push(est.clone());
        }
        if self.scheme == SchemeMode::EeAscfr {
            // The origin already divided its measurement times by its own
            // ratio estimate; only anchor and delay bookkeeping remains on
            // that hop.
            let last = states.len() - 1;
            states[last] = states[last].with_unit_ratio();
        }
        Some(states)
    }

    fn translate_bundle(
        &mut self,
        origin: NodeId,
        bundle: Vec<Measurement>,
        out: &mut Vec<TranslatedMeasurement>,
    ) {
        if bundle.is_empty() {
            return;
        }
        match self.chain_to(origin) {
            Some(states) => {
                for m in bundle {
                    match translate_chain(m.t_m, &states) {
                        Ok(est_ref_seconds) => out.push(TranslatedMeasurement {
                            origin,
                            seq: m.seq,
                            est_ref_seconds,
                        }),
                        Err(_) => self.rejected_reports += 1,
                    }
                }
            }
            None => self.pending.push((origin, bundle)),
        }
    }
}

// ---------------------------------------------------------------------------
// Wire codec
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("message truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown message tag {0:#04x}")]
    BadTag(u8),
    #[error("trailing bytes after message body")]
    TrailingBytes,
}

pub const TAG_BEACON: u8 = 0x01;
pub const TAG_REPORT: u8 = 0x02;

pub fn encode_beacon(b: &BeaconRequest) -> Vec<u8> {
    let mut out = Vec::with_capacity(15);
    out.push(TAG_BEACON);
    out.extend_from_slice(&b.hop_origin.0.to_le_bytes());
    out.extend_from_slice(&b.round.to_le_bytes());
    out.extend_from_slice(&b.t1.value().to_le_bytes());
    out
}

pub fn decode_beacon(bytes: &[u8]) -> Result<BeaconRequest, WireError> {
    let mut r = Reader::new(bytes);
    if r.u8()? != TAG_BEACON {
        return Err(WireError::BadTag(bytes[0]));
    }
    let origin = NodeId(r.u16()?);
    let round = r.u32()?;
    let t1 = Ticks(r.u64()?);
    r.finish()?;
    Ok(BeaconRequest {
        round,
        t1,
        hop_origin: origin,
    })
}

pub fn encode_report(rep: &ReportResponse) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(TAG_REPORT);
    out.extend_from_slice(&rep.origin.0.to_le_bytes());
    out.extend_from_slice(&rep.round.to_le_bytes());
    out.extend_from_slice(&rep.t2.value().to_le_bytes());
    out.extend_from_slice(&rep.t3.value().to_le_bytes());
    match rep.t2_zero {
        Some((anchor_round, t2_zero)) => {
            out.extend_from_slice(&1u16.to_le_bytes());
            out.extend_from_slice(&anchor_round.to_le_bytes());
            out.extend_from_slice(&t2_zero.value().to_le_bytes());
        }
        None => out.extend_from_slice(&0u16.to_le_bytes()),
    }
    out.extend_from_slice(&(rep.bundle.len() as u16).to_le_bytes());
    for m in &rep.bundle {
        out.extend_from_slice(&m.seq.to_le_bytes());
        out.extend_from_slice(&m.t_m.value().to_le_bytes());
    }
    out.extend_from_slice(&(rep.relayed_sync.len() as u16).to_le_bytes());
    for rec in &rep.relayed_sync {
        out.extend_from_slice(&rec.round.to_le_bytes());
        out.extend_from_slice(&rec.upper.0.to_le_bytes());
        out.extend_from_slice(&rec.lower.0.to_le_bytes());
        for t in [rec.t1, rec.t2, rec.t3, rec.t4] {
            out.extend_from_slice(&t.value().to_le_bytes());
        }
    }
    out.extend_from_slice(&(rep.relayed_bundles.len() as u16).to_le_bytes());
    for (node, bundle) in &rep.relayed_bundles {
        out.extend_from_slice(&node.0.to_le_bytes());
        out.extend_from_slice(&(bundle.len() as u16).to_le_bytes());
        for m in bundle {
            out.extend_from_slice(&m.seq.to_le_bytes());
            out.extend_from_slice(&m.t_m.value().to_le_bytes());
        }
    }
    out
}

pub fn decode_report(bytes: &[u8]) -> Result<ReportResponse, WireError> {
    let mut r = Reader::new(bytes);
    if r.u8()? != TAG_REPORT {
        return Err(WireError::BadTag(bytes[0]));
    }
    let origin = NodeId(r.u16()?);
    let round = r.u32()?;
    let t2 = Ticks(r.u64()?);
    let t3 = Ticks(r.u64()?);
    let t2_zero = match r.u16()? {
        0 => None,
        _ => {
            let anchor_round = r.u32()?;
            let ticks = Ticks(r.u64()?);
            Some((anchor_round, ticks))
        }
    };
    let n = r.u16()? as usize;
    let mut bundle = Vec::with_capacity(n);
    for _ in 0..n {
        bundle.push(Measurement {
            seq: r.u32()?,
            t_m: Ticks(r.u64()?),
        });
    }
    let n = r.u16()? as usize;
    let mut relayed_sync = Vec::with_capacity(n);
    for _ in 0..n {
        relayed_sync.push(SyncRecord {
            round: r.u32()?,
            upper: NodeId(r.u16()?),
            lower: NodeId(r.u16()?),
            t1: Ticks(r.u64()?),
            t2: Ticks(r.u64()?),
            t3: Ticks(r.u64()?),
            t4: Ticks(r.u64()?),
        });
    }
    let n = r.u16()? as usize;
    let mut relayed_bundles = Vec::with_capacity(n);
    for _ in 0..n {
        let node = NodeId(r.u16()?);
        let m = r.u16()? as usize;
        let mut inner = Vec::with_capacity(m);
        for _ in 0..m {
            inner.push(Measurement {
                seq: r.u32()?,
                t_m: Ticks(r.u64()?),
            });
        }
        relayed_bundles.push((node, inner));
    }
    r.finish()?;
    Ok(ReportResponse {
        origin,
        round,
        t2,
        t3,
        t2_zero,
        bundle,
        relayed_sync,
        relayed_bundles,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.bytes.len() {
            return Err(WireError::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<(), WireError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes)
        }
    }
}
