//! Interval metrics (throughput, delivery ratio, loss) per traffic class,
//! computed either from a finished trace or incrementally during a run.

use std::collections::HashSet;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::packet::{PacketKind, PacketPriority};
use crate::time::{SimDuration, SimTime};
use crate::trace::{DropReason, TraceAction, TraceRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty interval [{t0}, {t1})")]
    EmptyInterval { t0: SimTime, t1: SimTime },
    #[error("no transmissions in window")]
    NoTransmissions,
    #[error("output sink unwritable: {0}")]
    SinkUnwritable(#[source] io::Error),
    #[error("metrics csv line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn check_interval(t0: SimTime, t1: SimTime) -> Result<(), MetricsError> {
    if t1 <= t0 {
        return Err(MetricsError::EmptyInterval { t0, t1 });
    }
    Ok(())
}

fn data_class(kind: PacketKind) -> Option<PacketPriority> {
    kind.is_data().then(|| kind.data_class()).flatten()
}

fn is_delivery(r: &TraceRecord) -> bool {
    r.action == TraceAction::Received && r.dst == Some(r.node)
}

fn is_origination(r: &TraceRecord) -> bool {
    r.action == TraceAction::Sent && r.node == r.src
}

/// Data packets of `class` received at their destination during `[t0, t1)`, per second.
pub fn throughput(trace: &[TraceRecord], class: PacketPriority, t0: SimTime, t1: SimTime) -> Result<f64, MetricsError> {
    check_interval(t0, t1)?;
    let n = trace
        .iter()
        .filter(|r| r.time >= t0 && r.time < t1 && is_delivery(r) && data_class(r.kind) == Some(class))
        .count();
    Ok(n as f64 / t1.since(t0).as_secs_f64())
}

/// Bits per second counterpart of [`throughput`].
pub fn throughput_bps(trace: &[TraceRecord], class: PacketPriority, t0: SimTime, t1: SimTime) -> Result<f64, MetricsError> {
    check_interval(t0, t1)?;
    let bytes: u64 = trace
        .iter()
        .filter(|r| r.time >= t0 && r.time < t1 && is_delivery(r) && data_class(r.kind) == Some(class))
        .map(|r| u64::from(r.size))
        .sum();
    Ok(bytes as f64 * 8.0 / t1.since(t0).as_secs_f64())
}

/// Fraction of the data packets of `class` originated during `[t0, t1)` that
/// reached their destination at any point in the trace.
pub fn delivery_ratio(trace: &[TraceRecord], class: PacketPriority, t0: SimTime, t1: SimTime) -> Result<f64, MetricsError> {
    check_interval(t0, t1)?;
    let sent: Vec<_> = trace
        .iter()
        .filter(|r| r.time >= t0 && r.time < t1 && is_origination(r) && data_class(r.kind) == Some(class))
        .map(|r| r.pkt_id)
        .collect();
    if sent.is_empty() {
        return Err(MetricsError::NoTransmissions);
    }
    let delivered: HashSet<_> = trace.iter().filter(|r| is_delivery(r)).map(|r| r.pkt_id).collect();
    let got = sent.iter().filter(|id| delivered.contains(id)).count();
    Ok(got as f64 / sent.len() as f64)
}

/// Drops of data packets of `class` during `[t0, t1)`, by reason.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LossBreakdown {
    pub by_reason: [u64; 4],
}

impl LossBreakdown {
    pub fn total(&self) -> u64 {
        self.by_reason.iter().sum()
    }

    pub fn get(&self, reason: DropReason) -> u64 {
        self.by_reason[reason.index()]
    }

    fn add(&mut self, reason: DropReason) {
        self.by_reason[reason.index()] += 1;
    }
}

pub fn packet_loss(
    trace: &[TraceRecord],
    class: PacketPriority,
    t0: SimTime,
    t1: SimTime,
) -> Result<LossBreakdown, MetricsError> {
    check_interval(t0, t1)?;
    let mut out = LossBreakdown::default();
    for r in trace.iter().filter(|r| r.time >= t0 && r.time < t1 && data_class(r.kind) == Some(class)) {
        if let (TraceAction::Dropped, Some(reason)) = (r.action, r.reason) {
            out.add(reason);
        }
    }
    Ok(out)
}

/// How an undefined delivery ratio is written to CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AbsentRatio {
    #[default]
    Zero,
    Empty,
}

impl std::str::FromStr for AbsentRatio {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "zero" | "0" => Ok(AbsentRatio::Zero),
            "empty" | "absent" => Ok(AbsentRatio::Empty),
            other => Err(format!("unknown ratio rendering `{other}` (expected zero or empty)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMetrics {
    pub start: SimTime,
    pub end: SimTime,
    pub class: PacketPriority,
    pub throughput_pps: f64,
    pub delivery_ratio: Option<f64>,
    pub losses: LossBreakdown,
    pub throughput_bps: f64,
}

impl IntervalMetrics {
    pub fn loss_count(&self) -> u64 {
        self.losses.total()
    }
}

/// Per-interval metric series for one run, rows ordered by interval then class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub interval_length: SimDuration,
    pub rows: Vec<IntervalMetrics>,
}

/// Interval boundaries `[k*len, min((k+1)*len, horizon))`.
pub fn intervals(len: SimDuration, horizon: SimTime) -> Vec<(SimTime, SimTime)> {
    let step = len.as_micros();
    if step == 0 {
        return Vec::new();
    }
    let end = horizon.as_micros();
    (0..end.div_ceil(step))
        .map(|k| (SimTime::from_micros(k * step), SimTime::from_micros(((k + 1) * step).min(end))))
        .collect()
}

impl MetricsReport {
    /// Recomputes every interval from a trace.
    pub fn from_trace(trace: &[TraceRecord], interval: SimDuration, horizon: SimTime) -> Self {
        let mut rows = Vec::new();
        for (t0, t1) in intervals(interval, horizon) {
            for class in PacketPriority::ALL {
                let bad = "interval bounds are increasing by construction";
                rows.push(IntervalMetrics {
                    start: t0,
                    end: t1,
                    class,
                    throughput_pps: throughput(trace, class, t0, t1).expect(bad),
                    delivery_ratio: delivery_ratio(trace, class, t0, t1).ok(),
                    losses: packet_loss(trace, class, t0, t1).expect(bad),
                    throughput_bps: throughput_bps(trace, class, t0, t1).expect(bad),
                });
            }
        }
        MetricsReport { interval_length: interval, rows }
    }

    pub fn series(&self, class: PacketPriority) -> impl Iterator<Item = &IntervalMetrics> {
        self.rows.iter().filter(move |r| r.class == class)
    }

    /// Writes the report as CSV and returns the number of data rows.
    pub fn emit_csv<W: Write>(&self, sink: W, absent: AbsentRatio) -> Result<usize, MetricsError> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["interval_start", "interval_end", "class", "throughput_pps", "delivery_ratio", "loss_count", "throughput_bps"];
        let reason_cols: Vec<String> = DropReason::ALL.iter().map(|r| format!("loss_{}", r.token())).collect();
        header.extend(reason_cols.iter().map(String::as_str));
        w.write_record(&header).map_err(csv_io)?;
        for r in &self.rows {
            let ratio = match (r.delivery_ratio, absent) {
                (Some(v), _) => v.to_string(),
                (None, AbsentRatio::Zero) => "0".to_string(),
                (None, AbsentRatio::Empty) => String::new(),
            };
            let mut fields = vec![
                r.start.to_string(),
                r.end.to_string(),
                r.class.token().to_string(),
                r.throughput_pps.to_string(),
                ratio,
                r.loss_count().to_string(),
                r.throughput_bps.to_string(),
            ];
            fields.extend(r.losses.by_reason.iter().map(u64::to_string));
            w.write_record(&fields).map_err(csv_io)?;
        }
        w.flush().map_err(MetricsError::SinkUnwritable)?;
        Ok(self.rows.len())
    }

    /// Parses CSV written by [`emit_csv`](Self::emit_csv). An empty ratio cell reads back as absent.
    pub fn parse_csv<R: Read>(source: R) -> Result<Self, MetricsError> {
        let mut rd = csv::Reader::from_reader(source);
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let err = |message: String| MetricsError::Parse { line, message };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() != 7 + DropReason::ALL.len() {
                return Err(err(format!("expected {} fields, found {}", 7 + DropReason::ALL.len(), rec.len())));
            }
            let time = |s: &str| SimTime::parse(s).ok_or_else(|| err(format!("bad time `{s}`")));
            let float = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
            let count = |s: &str| s.parse::<u64>().map_err(|e| err(format!("bad count `{s}`: {e}")));
            let mut losses = LossBreakdown::default();
            for (slot, s) in losses.by_reason.iter_mut().zip(rec.iter().skip(7)) {
                *slot = count(s)?;
            }
            if count(&rec[5])? != losses.total() {
                return Err(err("loss_count disagrees with per-reason columns".into()));
            }
            rows.push(IntervalMetrics {
                start: time(&rec[0])?,
                end: time(&rec[1])?,
                class: PacketPriority::from_token(&rec[2]).ok_or_else(|| err(format!("bad class `{}`", &rec[2])))?,
                throughput_pps: float(&rec[3])?,
                delivery_ratio: if rec[4].is_empty() { None } else { Some(float(&rec[4])?) },
                losses,
                throughput_bps: float(&rec[6])?,
            });
        }
        let interval_length = rows.first().map_or(SimDuration::ZERO, |r| r.end.since(r.start));
        Ok(MetricsReport { interval_length, rows })
    }
}

fn csv_io(e: csv::Error) -> MetricsError {
    MetricsError::SinkUnwritable(io::Error::other(e))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Bucket {
    received: u64,
    received_bytes: u64,
    sent: u64,
    delivered_of_sent: u64,
    losses: LossBreakdown,
}

/// In-run metrics. Event-time counters go to the current interval, which the
/// event loop advances with [`tick`](Self::tick) at each interval boundary.
/// Records at or after the final boundary land in an overflow slot that is
/// not reported.
#[derive(Clone, Debug)]
pub struct MetricsAccumulator {
    bounds: Vec<(SimTime, SimTime)>,
    interval: SimDuration,
    current: usize,
    // index: interval * 2 + class
    buckets: Vec<Bucket>,
}

fn class_slot(c: PacketPriority) -> usize {
    match c {
        PacketPriority::Realtime => 0,
        PacketPriority::Normal => 1,
    }
}

impl MetricsAccumulator {
    pub fn new(interval: SimDuration, horizon: SimTime) -> Self {
        let bounds = intervals(interval, horizon);
        let buckets = vec![Bucket::default(); (bounds.len() + 1) * 2];
        MetricsAccumulator { bounds, interval, current: 0, buckets }
    }

    /// Boundaries at which the event loop must call [`tick`](Self::tick).
    pub fn tick_times(&self) -> Vec<SimTime> {
        self.bounds.iter().map(|&(_, t1)| t1).collect()
    }

    pub fn tick(&mut self, t: SimTime) {
        debug_assert_eq!(self.bounds.get(self.current).map(|b| b.1), Some(t), "tick out of step");
        self.current = (self.current + 1).min(self.bounds.len());
    }

    fn bucket(&mut self, interval: usize, class: PacketPriority) -> &mut Bucket {
        &mut self.buckets[interval * 2 + class_slot(class)]
    }

    fn interval_of(&self, t: SimTime) -> usize {
        let step = self.interval.as_micros().max(1);
        ((t.as_micros() / step) as usize).min(self.bounds.len())
    }

    pub fn on_originated(&mut self, kind: PacketKind) {
        if let Some(c) = data_class(kind) {
            let i = self.current;
            self.bucket(i, c).sent += 1;
        }
    }

    pub fn on_delivered(&mut self, kind: PacketKind, size: u32, created_at: SimTime) {
        if let Some(c) = data_class(kind) {
            let i = self.current;
            let b = self.bucket(i, c);
            b.received += 1;
            b.received_bytes += u64::from(size);
            let origin = self.interval_of(created_at);
            self.bucket(origin, c).delivered_of_sent += 1;
        }
    }

    pub fn on_dropped(&mut self, kind: PacketKind, reason: DropReason) {
        if let Some(c) = data_class(kind) {
            let i = self.current;
            self.bucket(i, c).losses.add(reason);
        }
    }

    pub fn report(&self) -> MetricsReport {
        let mut rows = Vec::new();
        for (i, &(t0, t1)) in self.bounds.iter().enumerate() {
            let secs = t1.since(t0).as_secs_f64();
            for class in PacketPriority::ALL {
                let b = self.buckets[i * 2 + class_slot(class)];
                rows.push(IntervalMetrics {
                    start: t0,
                    end: t1,
                    class,
                    throughput_pps: b.received as f64 / secs,
                    delivery_ratio: (b.sent > 0).then(|| b.delivered_of_sent as f64 / b.sent as f64),
                    losses: b.losses,
                    throughput_bps: b.received_bytes as f64 * 8.0 / secs,
                });
            }
        }
        MetricsReport { interval_length: self.interval, rows }
    }
}

/// Payload accounting for one class: every generated packet is either
/// delivered, dropped, or still inside the network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassBalance {
    pub generated: u64,
    pub received: u64,
    pub dropped: LossBreakdown,
    pub in_flight: u64,
}

impl ClassBalance {
    pub fn holds(&self) -> bool {
        self.generated == self.received + self.dropped.total() + self.in_flight
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Conservation {
    pub realtime: ClassBalance,
    pub normal: ClassBalance,
}

impl Conservation {
    /// Counts payload packets in a trace. `in_flight` comes from the caller,
    /// indexed by [`PacketPriority::ALL`] order.
    pub fn from_trace(trace: &[TraceRecord], in_flight: [u64; 2]) -> Self {
        let mut c = Conservation::default();
        c.realtime.in_flight = in_flight[0];
        c.normal.in_flight = in_flight[1];
        for r in trace.iter().filter(|r| r.kind.is_payload()) {
            let Some(class) = r.kind.data_class() else { continue };
            let b = c.class_mut(class);
            match r.action {
                TraceAction::Sent if r.node == r.src => b.generated += 1,
                TraceAction::Received if r.dst == Some(r.node) => b.received += 1,
                TraceAction::Dropped => b.dropped.add(r.reason.expect("drop records carry a reason")),
                _ => {}
            }
        }
        c
    }

    pub fn class(&self, class: PacketPriority) -> &ClassBalance {
        match class {
            PacketPriority::Realtime => &self.realtime,
            PacketPriority::Normal => &self.normal,
        }
    }

    pub fn class_mut(&mut self, class: PacketPriority) -> &mut ClassBalance {
        match class {
            PacketPriority::Realtime => &mut self.realtime,
            PacketPriority::Normal => &mut self.normal,
        }
    }

    pub fn total(&self) -> ClassBalance {
        let (a, b) = (self.realtime, self.normal);
        let mut dropped = a.dropped;
        for (d, x) in dropped.by_reason.iter_mut().zip(b.dropped.by_reason) {
            *d += x;
        }
        ClassBalance {
            generated: a.generated + b.generated,
            received: a.received + b.received,
            dropped,
            in_flight: a.in_flight + b.in_flight,
        }
    }

    pub fn holds(&self) -> bool {
        self.realtime.holds() && self.normal.holds() && self.total().holds()
    }
}
