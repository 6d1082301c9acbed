//! The unified frame type carried by the simulated radio.

use std::fmt;

use crate::aodv::{HelloMessage, RerrMessage, RrepMessage, RreqMessage};
use crate::engine::mix_key;
use crate::time::SimTime;
use crate::{FlowId, NodeId};

/// Traffic class. `Realtime` sorts above `Normal`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketPriority {
    #[default]
    Normal,
    Realtime,
}

impl PacketPriority {
    pub const ALL: [PacketPriority; 2] = [PacketPriority::Realtime, PacketPriority::Normal];

    pub fn token(self) -> &'static str {
        match self {
            PacketPriority::Realtime => "realtime",
            PacketPriority::Normal => "normal",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "realtime" => Some(PacketPriority::Realtime),
            "normal" => Some(PacketPriority::Normal),
            _ => None,
        }
    }
}

impl fmt::Display for PacketPriority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketKind {
    CbrData,
    TcpData,
    TcpAck,
    Rreq,
    Rrep,
    Rerr,
    Hello,
}

impl PacketKind {
    pub fn token(self) -> &'static str {
        match self {
            PacketKind::CbrData => "CBR",
            PacketKind::TcpData => "TCP",
            PacketKind::TcpAck => "ACK",
            PacketKind::Rreq => "RREQ",
            PacketKind::Rrep => "RREP",
            PacketKind::Rerr => "RERR",
            PacketKind::Hello => "HELLO",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        Some(match s {
            "CBR" => PacketKind::CbrData,
            "TCP" => PacketKind::TcpData,
            "ACK" => PacketKind::TcpAck,
            "RREQ" => PacketKind::Rreq,
            "RREP" => PacketKind::Rrep,
            "RERR" => PacketKind::Rerr,
            "HELLO" => PacketKind::Hello,
            _ => return None,
        })
    }

    /// Application data counted by the throughput / delivery / loss metrics.
    pub fn is_data(self) -> bool {
        matches!(self, PacketKind::CbrData | PacketKind::TcpData)
    }

    /// End-to-end user-plane packets, tracked by the conservation check.
    pub fn is_payload(self) -> bool {
        matches!(self, PacketKind::CbrData | PacketKind::TcpData | PacketKind::TcpAck)
    }

    pub fn is_control(self) -> bool {
        !self.is_payload()
    }

    /// Traffic class implied by the kind alone, where it is fixed.
    pub fn data_class(self) -> Option<PacketPriority> {
        match self {
            PacketKind::CbrData => Some(PacketPriority::Realtime),
            PacketKind::TcpData | PacketKind::TcpAck => Some(PacketPriority::Normal),
            _ => None,
        }
    }

    fn ordinal(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Cbr { seq: u64 },
    TcpData { seq: u64, attempt: u32 },
    TcpAck { seq: u64 },
    Rreq(RreqMessage),
    Rrep(RrepMessage),
    Rerr(RerrMessage),
    Hello(HelloMessage),
}

impl Payload {
    pub fn kind(&self) -> PacketKind {
        match self {
            Payload::Cbr { .. } => PacketKind::CbrData,
            Payload::TcpData { .. } => PacketKind::TcpData,
            Payload::TcpAck { .. } => PacketKind::TcpAck,
            Payload::Rreq(_) => PacketKind::Rreq,
            Payload::Rrep(_) => PacketKind::Rrep,
            Payload::Rerr(_) => PacketKind::Rerr,
            Payload::Hello(_) => PacketKind::Hello,
        }
    }
}

pub const RREQ_SIZE: u32 = 48;
pub const RREP_SIZE: u32 = 44;
pub const RERR_BASE_SIZE: u32 = 32;
pub const HELLO_SIZE: u32 = 44;
pub const ACK_SIZE: u32 = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    /// Flow that produced this packet, or that triggered it for control traffic.
    pub flow: Option<FlowId>,
    pub payload: Payload,
    pub class: PacketPriority,
    pub src: NodeId,
    /// `None` for link-local broadcast.
    pub dst: Option<NodeId>,
    pub size: u32,
    pub created_at: SimTime,
    pub hops_traversed: u32,
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        self.payload.kind()
    }

    /// Identity of the packet's content, independent of run-global id
    /// allocation. Two runs that emit the same logical packet agree on it.
    pub fn content_key(&self) -> u64 {
        let (a, b) = match &self.payload {
            Payload::Cbr { seq } => (*seq, 0),
            Payload::TcpData { seq, attempt } => (*seq, u64::from(*attempt)),
            Payload::TcpAck { seq } => (*seq, 0),
            Payload::Rreq(m) => (u64::from(m.broadcast_id), u64::from(m.origin.0)),
            Payload::Rrep(m) => (u64::from(m.dest_seq), u64::from(m.origin.0)),
            Payload::Rerr(m) => (m.unreachable.len() as u64, 0),
            Payload::Hello(m) => (u64::from(m.seq), 0),
        };
        mix_key(&[
            self.kind().ordinal(),
            u64::from(self.src.0),
            self.dst.map_or(u64::MAX, |d| u64::from(d.0)),
            self.flow.map_or(u64::MAX, |f| u64::from(f.0)),
            self.created_at.as_micros(),
            a,
            b,
        ])
    }
}

/// Priority class of a packet: CBR data is realtime, TCP data and acks are
/// normal, HELLO and RERR are normal, and other control packets carry the class
/// of the flow that triggered them.
pub fn classify(packet: &Packet) -> PacketPriority {
    match packet.kind() {
        PacketKind::CbrData => PacketPriority::Realtime,
        PacketKind::TcpData | PacketKind::TcpAck => PacketPriority::Normal,
        PacketKind::Hello | PacketKind::Rerr => PacketPriority::Normal,
        PacketKind::Rreq | PacketKind::Rrep => packet.class,
    }
}
