//! Real-time priority extension to AODV.
//!
//! Two behaviours are layered on top of the base protocol:
//! realtime route requests are admitted even by nodes whose interface queue is
//! full, and the start of a realtime session expires every route serving
//! normal traffic and blocks normal data for the session's duration.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::aodv::{AodvNode, RreqMessage};
use crate::packet::{Packet, PacketPriority};
use crate::time::SimTime;
use crate::FlowId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Protocol {
    #[default]
    Aodv,
    Eaodv,
}

impl Protocol {
    pub const BOTH: [Protocol; 2] = [Protocol::Aodv, Protocol::Eaodv];

    pub fn token(self) -> &'static str {
        match self {
            Protocol::Aodv => "aodv",
            Protocol::Eaodv => "eaodv",
        }
    }

    /// Interface queue band used for a packet of the given class. Plain AODV
    /// has a single band.
    pub fn queue_band(self, class: PacketPriority) -> PacketPriority {
        match self {
            Protocol::Aodv => PacketPriority::Normal,
            Protocol::Eaodv => class,
        }
    }

    /// Priority carried in an RREQ triggered by traffic of `class`.
    pub fn rreq_priority(self, class: PacketPriority) -> PacketPriority {
        self.queue_band(class)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "eaodv" => Ok(Protocol::Eaodv),
            other => Err(format!("unknown protocol `{other}` (expected aodv or eaodv)")),
        }
    }
}

/// Where the normal-route expiry takes effect when a realtime session begins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ExpiryScope {
    /// Every node at once, at the session start instant.
    #[default]
    Network,
    /// Each node on its own, the first time it handles a realtime packet.
    PerNode,
}

impl FromStr for ExpiryScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "network" | "global" => Ok(ExpiryScope::Network),
            "per_node" | "per-node" | "node" => Ok(ExpiryScope::PerNode),
            other => Err(format!("unknown expiry scope `{other}` (expected network or per_node)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RreqAdmission {
    AcceptPriority,
    AcceptNormal,
    RejectBusy,
}

/// Whether a node accepts an incoming RREQ given its interface queue state.
/// A busy node only accepts realtime requests.
pub fn admit_rreq(msg: &RreqMessage, queue_full: bool) -> RreqAdmission {
    match (msg.priority, queue_full) {
        (PacketPriority::Realtime, _) => RreqAdmission::AcceptPriority,
        (PacketPriority::Normal, false) => RreqAdmission::AcceptNormal,
        (PacketPriority::Normal, true) => RreqAdmission::RejectBusy,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardDecision {
    Forward,
    DropLowPriority,
}

/// While a realtime session is active, normal-class user data is not carried.
pub fn forwarding_policy(session_active: bool, packet: &Packet) -> ForwardDecision {
    let normal_payload = packet.kind().is_payload() && packet.class == PacketPriority::Normal;
    if session_active && normal_payload {
        ForwardDecision::DropLowPriority
    } else {
        ForwardDecision::Forward
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RealtimeSessionState {
    active: bool,
    started_at: Option<SimTime>,
    flows: BTreeSet<FlowId>,
}

impl RealtimeSessionState {
    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn started_at(&self) -> Option<SimTime> {
        self.started_at
    }

    pub fn flows(&self) -> &BTreeSet<FlowId> {
        &self.flows
    }

    /// Registers a starting realtime flow. Returns true on the inactive to active transition.
    pub fn begin(&mut self, flow: FlowId, t: SimTime) -> bool {
        self.flows.insert(flow);
        if self.active {
            return false;
        }
        self.active = true;
        self.started_at = Some(t);
        true
    }

    /// Removes a finished flow. Returns true when the last one ends the session.
    pub fn end(&mut self, flow: FlowId) -> bool {
        if !self.flows.remove(&flow) || !self.flows.is_empty() {
            return false;
        }
        self.active = false;
        self.started_at = None;
        true
    }
}

/// Starts realtime flow `flow` at `t`. On the session's first flow every
/// normal-class route held by `nodes` is invalidated; later calls while the
/// session is active change nothing. Returns the number of routes expired.
pub fn on_realtime_start<'a, I>(session: &mut RealtimeSessionState, flow: FlowId, nodes: I, t: SimTime) -> usize
where
    I: IntoIterator<Item = &'a mut AodvNode>,
{
    if !session.begin(flow, t) {
        return 0;
    }
    nodes.into_iter().map(AodvNode::expire_normal_routes).sum()
}
