//! Traffic sources: constant-rate UDP and a stop-and-wait reliable flow.

use std::fmt;
use std::str::FromStr;

use crate::packet::{Packet, PacketId, PacketPriority, Payload, ACK_SIZE};
use crate::time::{SimDuration, SimTime, MICROS_PER_SEC};
use crate::{FlowId, NodeId};

pub const DEFAULT_CBR_RATE: f64 = 4.0;
pub const DEFAULT_PACKET_SIZE: u32 = 512;
pub const TCP_RETRANSMIT_TIMEOUT: SimDuration = SimDuration::from_secs(1);
pub const TCP_MAX_RETRANSMITS: u32 = 5;
/// How long a stalled sender waits before probing the path again.
pub const TCP_STALL_PROBE: SimDuration = SimDuration::from_secs(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowKind {
    TcpLike,
    CbrUdp,
}

impl FlowKind {
    pub fn class(self) -> PacketPriority {
        match self {
            FlowKind::CbrUdp => PacketPriority::Realtime,
            FlowKind::TcpLike => PacketPriority::Normal,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FlowKind::TcpLike => "tcp",
            FlowKind::CbrUdp => "cbr",
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FlowKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tcp" | "tcplike" | "tcp_like" => Ok(FlowKind::TcpLike),
            "cbr" | "udp" | "cbrudp" | "cbr_udp" => Ok(FlowKind::CbrUdp),
            other => Err(format!("unknown flow kind `{other}` (expected tcp or cbr)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec {
    pub id: FlowId,
    pub source: NodeId,
    pub destination: NodeId,
    pub kind: FlowKind,
    pub start_time: SimTime,
    /// Traffic generation stops at this instant, if set.
    pub stop_time: Option<SimTime>,
    pub packet_size: u32,
    /// Packets per second; only used by CBR flows.
    pub rate: f64,
}

impl FlowSpec {
    pub fn class(&self) -> PacketPriority {
        self.kind.class()
    }

    fn active_at(&self, t: SimTime) -> bool {
        t >= self.start_time && self.stop_time.is_none_or(|stop| t < stop)
    }
}

/// Monotone packet id source shared by everything in a run.
#[derive(Debug, Default, Clone)]
pub struct PacketIds {
    next: u64,
}

impl PacketIds {
    pub fn next_id(&mut self) -> PacketId {
        let id = PacketId(self.next);
        self.next += 1;
        id
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

#[derive(Debug, Clone)]
pub struct CbrSource {
    flow: FlowSpec,
    next_seq: u64,
}

impl CbrSource {
    pub fn new(flow: FlowSpec) -> Self {
        debug_assert_eq!(flow.kind, FlowKind::CbrUdp);
        CbrSource { flow, next_seq: 0 }
    }

    pub fn flow(&self) -> &FlowSpec {
        &self.flow
    }

    pub fn emission_time(&self, index: u64) -> SimTime {
        let offset = (index as f64 * MICROS_PER_SEC as f64 / self.flow.rate).round() as u64;
        self.flow.start_time + SimDuration::from_micros(offset)
    }

    /// When the next packet is due.
    pub fn next_emission(&self) -> SimTime {
        self.emission_time(self.next_seq)
    }

    /// Emits the next packet if the flow is running at `t`.
    pub fn cbr_tick(&mut self, t: SimTime, ids: &mut PacketIds) -> Option<Packet> {
        if !self.flow.active_at(t) || self.flow.rate <= 0.0 {
            return None;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        Some(Packet {
            id: ids.next_id(),
            flow: Some(self.flow.id),
            payload: Payload::Cbr { seq },
            class: PacketPriority::Realtime,
            src: self.flow.source,
            dst: Some(self.flow.destination),
            size: self.flow.packet_size,
            created_at: t,
            hops_traversed: 0,
        })
    }

    pub fn emitted(&self) -> u64 {
        self.next_seq
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcpEvent {
    Start,
    Ack { seq: u64 },
    /// The sender's single timer fired (retransmission or stall probe).
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcpState {
    Idle,
    AwaitingAck,
    Stalled,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerAction {
    Keep,
    Arm(SimTime),
    Cancel,
}

#[derive(Debug, PartialEq)]
pub struct TcpStep {
    pub packets: Vec<Packet>,
    pub timer: TimerAction,
}

impl TcpStep {
    fn none() -> Self {
        TcpStep { packets: Vec::new(), timer: TimerAction::Keep }
    }
}

/// Stop-and-wait sender: one segment outstanding, fixed retransmission
/// timeout, and a stall after too many consecutive retransmissions.
#[derive(Debug, Clone)]
pub struct TcpSender {
    flow: FlowSpec,
    state: TcpState,
    seq: u64,
    attempt: u32,
    retransmits: u32,
    acked: u64,
}

impl TcpSender {
    pub fn new(flow: FlowSpec) -> Self {
        debug_assert_eq!(flow.kind, FlowKind::TcpLike);
        TcpSender { flow, state: TcpState::Idle, seq: 0, attempt: 0, retransmits: 0, acked: 0 }
    }

    pub fn state(&self) -> TcpState {
        self.state
    }

    pub fn outstanding_seq(&self) -> u64 {
        self.seq
    }

    pub fn acked(&self) -> u64 {
        self.acked
    }

    pub fn tcp_step(&mut self, event: TcpEvent, now: SimTime, ids: &mut PacketIds) -> TcpStep {
        if self.state == TcpState::Done {
            return TcpStep::none();
        }
        if !self.flow.active_at(now) {
            if now >= self.flow.start_time {
                self.state = TcpState::Done;
                return TcpStep { packets: Vec::new(), timer: TimerAction::Cancel };
            }
            return TcpStep::none();
        }
        match (self.state, event) {
            (TcpState::Idle, TcpEvent::Start) => {
                self.seq = 0;
                self.attempt = 0;
                self.send(now, ids)
            }
            (TcpState::AwaitingAck | TcpState::Stalled, TcpEvent::Ack { seq }) if seq == self.seq => {
                self.acked += 1;
                self.seq += 1;
                self.attempt = 0;
                self.retransmits = 0;
                self.send(now, ids)
            }
            (TcpState::AwaitingAck, TcpEvent::Timeout) => {
                if self.retransmits < TCP_MAX_RETRANSMITS {
                    self.retransmits += 1;
                    self.attempt += 1;
                    self.send(now, ids)
                } else {
                    self.state = TcpState::Stalled;
                    TcpStep { packets: Vec::new(), timer: TimerAction::Arm(now + TCP_STALL_PROBE) }
                }
            }
            (TcpState::Stalled, TcpEvent::Timeout) => {
                self.retransmits = 0;
                self.attempt += 1;
                self.send(now, ids)
            }
            _ => TcpStep::none(),
        }
    }

    fn send(&mut self, now: SimTime, ids: &mut PacketIds) -> TcpStep {
        self.state = TcpState::AwaitingAck;
        let pkt = Packet {
            id: ids.next_id(),
            flow: Some(self.flow.id),
            payload: Payload::TcpData { seq: self.seq, attempt: self.attempt },
            class: PacketPriority::Normal,
            src: self.flow.source,
            dst: Some(self.flow.destination),
            size: self.flow.packet_size,
            created_at: now,
            hops_traversed: 0,
        };
        TcpStep { packets: vec![pkt], timer: TimerAction::Arm(now + TCP_RETRANSMIT_TIMEOUT) }
    }
}

/// Receiving end: acknowledges every segment, hands each sequence number to
/// the application once, in order.
#[derive(Debug, Clone)]
pub struct TcpReceiver {
    flow: FlowSpec,
    expected: u64,
    duplicates: u64,
}

impl TcpReceiver {
    pub fn new(flow: FlowSpec) -> Self {
        TcpReceiver { flow, expected: 0, duplicates: 0 }
    }

    /// Application-level deliveries so far.
    pub fn delivered(&self) -> u64 {
        self.expected
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    /// Processes a data segment and returns the acknowledgement to send back.
    pub fn on_data(&mut self, seq: u64, now: SimTime, ids: &mut PacketIds) -> Packet {
        if seq == self.expected {
            self.expected += 1;
        } else {
            self.duplicates += 1;
        }
        Packet {
            id: ids.next_id(),
            flow: Some(self.flow.id),
            payload: Payload::TcpAck { seq },
            class: PacketPriority::Normal,
            src: self.flow.destination,
            dst: Some(self.flow.source),
            size: ACK_SIZE,
            created_at: now,
            hops_traversed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cbr(start: u64, rate: f64) -> FlowSpec {
        FlowSpec {
            id: FlowId(2),
            source: NodeId(5),
            destination: NodeId(8),
            kind: FlowKind::CbrUdp,
            start_time: SimTime::from_secs(start),
            stop_time: None,
            packet_size: DEFAULT_PACKET_SIZE,
            rate,
        }
    }

    fn tcp() -> FlowSpec {
        FlowSpec {
            id: FlowId(0),
            source: NodeId(1),
            destination: NodeId(3),
            kind: FlowKind::TcpLike,
            start_time: SimTime::from_secs(5),
            stop_time: None,
            packet_size: DEFAULT_PACKET_SIZE,
            rate: 0.0,
        }
    }

    #[test]
    fn cbr_emission_schedule() {
        let src = CbrSource::new(cbr(60, 4.0));
        let times: Vec<String> = (0..3).map(|k| src.emission_time(k).to_string()).collect();
        assert_eq!(times, ["60.000000", "60.250000", "60.500000"]);
    }

    #[test]
    fn cbr_silent_before_start() {
        let mut src = CbrSource::new(cbr(60, 4.0));
        let mut ids = PacketIds::default();
        assert!(src.cbr_tick(SimTime::from_secs(59), &mut ids).is_none());
        assert_eq!(ids.issued(), 0);
    }

    #[test]
    fn ninety_seconds_at_four_per_second() {
        let mut src = CbrSource::new(cbr(60, 4.0));
        let mut ids = PacketIds::default();
        let end = SimTime::from_secs(150);
        let mut count = 0;
        while src.next_emission() < end {
            let t = src.next_emission();
            let p = src.cbr_tick(t, &mut ids).unwrap();
            assert_eq!(p.size, 512);
            assert_eq!(p.class, PacketPriority::Realtime);
            count += 1;
        }
        assert_eq!(count, 360);
    }

    #[test]
    fn cbr_respects_stop_time() {
        let mut f = cbr(0, 2.0);
        f.stop_time = Some(SimTime::from_secs(1));
        let mut src = CbrSource::new(f);
        let mut ids = PacketIds::default();
        assert!(src.cbr_tick(SimTime::ZERO, &mut ids).is_some());
        assert!(src.cbr_tick(SimTime::from_micros(500_000), &mut ids).is_some());
        assert!(src.cbr_tick(SimTime::from_secs(1), &mut ids).is_none());
    }

    fn data_seq(p: &Packet) -> (u64, u32) {
        match p.payload {
            Payload::TcpData { seq, attempt } => (seq, attempt),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ack_releases_next_segment_immediately() {
        let mut s = TcpSender::new(tcp());
        let mut ids = PacketIds::default();
        let t0 = SimTime::from_secs(5);
        let first = s.tcp_step(TcpEvent::Start, t0, &mut ids);
        assert_eq!(data_seq(&first.packets[0]), (0, 0));
        let t1 = SimTime::from_micros(5_020_000);
        let next = s.tcp_step(TcpEvent::Ack { seq: 0 }, t1, &mut ids);
        assert_eq!(data_seq(&next.packets[0]), (1, 0));
        assert_eq!(next.timer, TimerAction::Arm(t1 + TCP_RETRANSMIT_TIMEOUT));
        // stale ack is ignored
        assert!(s.tcp_step(TcpEvent::Ack { seq: 0 }, t1, &mut ids).packets.is_empty());
    }

    #[test]
    fn timeout_retransmits_same_sequence_then_stalls() {
        let mut s = TcpSender::new(tcp());
        let mut ids = PacketIds::default();
        let mut now = SimTime::from_secs(5);
        s.tcp_step(TcpEvent::Start, now, &mut ids);
        for attempt in 1..=TCP_MAX_RETRANSMITS {
            now = now + TCP_RETRANSMIT_TIMEOUT;
            let step = s.tcp_step(TcpEvent::Timeout, now, &mut ids);
            assert_eq!(data_seq(&step.packets[0]), (0, attempt));
        }
        now = now + TCP_RETRANSMIT_TIMEOUT;
        let stalled = s.tcp_step(TcpEvent::Timeout, now, &mut ids);
        assert!(stalled.packets.is_empty());
        assert_eq!(s.state(), TcpState::Stalled);
        assert_eq!(stalled.timer, TimerAction::Arm(now + TCP_STALL_PROBE));
        let probe = s.tcp_step(TcpEvent::Timeout, now + TCP_STALL_PROBE, &mut ids);
        assert_eq!(data_seq(&probe.packets[0]).0, 0);
        assert_eq!(s.state(), TcpState::AwaitingAck);
    }

    #[test]
    fn receiver_delivers_in_order_once() {
        let mut r = TcpReceiver::new(tcp());
        let mut ids = PacketIds::default();
        let now = SimTime::from_secs(6);
        for seq in [0, 0, 1, 2, 2, 2, 3] {
            let ack = r.on_data(seq, now, &mut ids);
            assert_eq!(ack.payload, Payload::TcpAck { seq });
            assert_eq!((ack.src, ack.dst), (NodeId(3), Some(NodeId(1))));
        }
        assert_eq!(r.delivered(), 4);
        assert_eq!(r.duplicates(), 3);
    }

    #[test]
    fn steady_alternation_over_a_working_path() {
        // Lossless echo with a 20 ms round trip: data and acks strictly alternate.
        let mut s = TcpSender::new(tcp());
        let mut r = TcpReceiver::new(tcp());
        let mut ids = PacketIds::default();
        let mut now = SimTime::from_secs(5);
        let mut log = Vec::new();
        let mut step = s.tcp_step(TcpEvent::Start, now, &mut ids);
        for _ in 0..50 {
            let data = step.packets.pop().expect("one segment per step");
            log.push('d');
            now = now + SimDuration::from_millis(10);
            let ack = r.on_data(data_seq(&data).0, now, &mut ids);
            log.push('a');
            now = now + SimDuration::from_millis(10);
            let Payload::TcpAck { seq } = ack.payload else { unreachable!() };
            step = s.tcp_step(TcpEvent::Ack { seq }, now, &mut ids);
        }
        assert_eq!(log.iter().collect::<String>(), "da".repeat(50));
        assert_eq!(r.delivered(), 50);
        assert_eq!(s.acked(), 50);
    }
}
