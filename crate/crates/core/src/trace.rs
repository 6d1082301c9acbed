//! Per-event packet trace.
//!
//! One record per line:
//! `<action> <time> <node> <pkt_kind> <pkt_id> <size> <src> <dst> <reason>`
//! where `dst` is `*` for link-local broadcasts and `reason` is `-` unless the
//! action is a drop.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::packet::{PacketId, PacketKind};
use crate::time::SimTime;
use crate::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceAction {
    Sent,
    Received,
    Forwarded,
    Dropped,
}

impl TraceAction {
    pub fn symbol(self) -> char {
        match self {
            TraceAction::Sent => 's',
            TraceAction::Received => 'r',
            TraceAction::Forwarded => 'f',
            TraceAction::Dropped => 'd',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    /// Interface queue or origin buffer overflow, or a busy node refusing an RREQ.
    Queue,
    NoRoute,
    /// Normal traffic refused during a realtime session.
    Priority,
    Ttl,
}

impl DropReason {
    pub const ALL: [DropReason; 4] = [DropReason::Queue, DropReason::NoRoute, DropReason::Priority, DropReason::Ttl];

    pub fn token(self) -> &'static str {
        match self {
            DropReason::Queue => "queue",
            DropReason::NoRoute => "noroute",
            DropReason::Priority => "priority",
            DropReason::Ttl => "ttl",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for DropReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DropReason::ALL
            .into_iter()
            .find(|r| r.token() == s)
            .ok_or_else(|| format!("unknown drop reason `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub action: TraceAction,
    pub time: SimTime,
    pub node: NodeId,
    pub kind: PacketKind,
    pub pkt_id: PacketId,
    pub size: u32,
    pub src: NodeId,
    pub dst: Option<NodeId>,
    pub reason: Option<DropReason>,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {} ",
            self.action.symbol(),
            self.time,
            self.node,
            self.kind,
            self.pkt_id,
            self.size,
            self.src
        )?;
        match self.dst {
            Some(d) => write!(f, "{d} ")?,
            None => f.write_str("* ")?,
        }
        f.write_str(self.reason.map_or("-", DropReason::token))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl FromStr for TraceRecord {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        let [action, time, node, kind, id, size, src, dst, reason] = fields[..] else {
            return Err(format!("expected 9 fields, found {}", fields.len()));
        };
        let action = match action {
            "s" => TraceAction::Sent,
            "r" => TraceAction::Received,
            "f" => TraceAction::Forwarded,
            "d" => TraceAction::Dropped,
            other => return Err(format!("unknown action `{other}`")),
        };
        let node_id = |s: &str| s.parse::<u32>().map(NodeId).map_err(|e| format!("bad node id `{s}`: {e}"));
        let reason = match reason {
            "-" => None,
            r => Some(r.parse()?),
        };
        if (action == TraceAction::Dropped) != reason.is_some() {
            return Err("drop reason must be present exactly on drop records".into());
        }
        Ok(TraceRecord {
            action,
            time: SimTime::parse(time).ok_or_else(|| format!("bad time `{time}`"))?,
            node: node_id(node)?,
            kind: PacketKind::from_token(kind).ok_or_else(|| format!("unknown packet kind `{kind}`"))?,
            pkt_id: PacketId(id.parse().map_err(|e| format!("bad packet id `{id}`: {e}"))?),
            size: size.parse().map_err(|e| format!("bad size `{size}`: {e}"))?,
            src: node_id(src)?,
            dst: if dst == "*" { None } else { Some(node_id(dst)?) },
            reason,
        })
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.parse().map_err(|message| TraceParseError { line: i + 1, message }))
        .collect()
}

/// Accumulates trace lines in memory and keeps a running digest of them.
#[derive(Clone)]
pub struct TraceLog {
    buf: String,
    keep_text: bool,
    hasher: Sha256,
    records: u64,
    last_time: SimTime,
}

impl fmt::Debug for TraceLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TraceLog").field("records", &self.records).finish()
    }
}

impl TraceLog {
    pub fn new(keep_text: bool) -> Self {
        TraceLog { buf: String::new(), keep_text, hasher: Sha256::new(), records: 0, last_time: SimTime::ZERO }
    }

    pub fn push(&mut self, rec: &TraceRecord) {
        use std::fmt::Write;
        debug_assert!(rec.time >= self.last_time, "trace times must be non-decreasing");
        self.last_time = rec.time;
        let start = self.buf.len();
        writeln!(self.buf, "{rec}").expect("writing to a String cannot fail");
        self.hasher.update(&self.buf.as_bytes()[start..]);
        if !self.keep_text {
            self.buf.clear();
        }
        self.records += 1;
    }

    pub fn len(&self) -> u64 {
        self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }

    /// Full text, if it was retained.
    pub fn text(&self) -> Option<&str> {
        self.keep_text.then_some(self.buf.as_str())
    }

    pub fn into_text(self) -> Option<String> {
        self.keep_text.then_some(self.buf)
    }

    pub fn sha256_hex(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
