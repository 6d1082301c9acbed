//! Per-node AODV state machine.
//!
//! [`AodvNode`] holds one node's routing table, duplicate-RREQ cache, pending
//! discoveries, origin-side data buffers and neighbour liveness. Its handlers
//! are pure state transitions that return what should be transmitted; the
//! network simulation owns the radio and the timers.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::packet::{Packet, PacketPriority};
use crate::time::{SimDuration, SimTime};
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AodvError {
    #[error("route discovery to {0} already pending")]
    DiscoveryAlreadyPending(NodeId),
    #[error("valid route to {0} already present")]
    RouteAlreadyValid(NodeId),
    #[error("no reverse route towards {0}")]
    NoReverseRoute(NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AodvParams {
    pub active_route_timeout: SimDuration,
    pub hello_interval: SimDuration,
    pub allowed_hello_loss: u32,
    pub discovery_timeout: SimDuration,
    pub discovery_retries: u32,
    pub rreq_cache_lifetime: SimDuration,
    pub buffer_per_destination: usize,
    pub net_diameter: u32,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            active_route_timeout: SimDuration::from_secs(10),
            hello_interval: SimDuration::from_secs(1),
            allowed_hello_loss: 2,
            discovery_timeout: SimDuration::from_secs(1),
            discovery_retries: 2,
            rreq_cache_lifetime: SimDuration::from_secs(3),
            buffer_per_destination: 50,
            net_diameter: 35,
        }
    }
}

impl AodvParams {
    pub fn neighbor_timeout(&self) -> SimDuration {
        self.hello_interval.mul(u64::from(self.allowed_hello_loss))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq_num: u32,
    /// False for routes learned without a sequence number (plain neighbour routes).
    pub seq_valid: bool,
    pub expiry: SimTime,
    pub valid: bool,
    pub precursors: BTreeSet<NodeId>,
    /// Class of the traffic this route was discovered for.
    pub class: PacketPriority,
}

impl RouteEntry {
    pub fn is_usable(&self, now: SimTime) -> bool {
        self.valid && self.expiry > now
    }
}

/// Routing information offered to the table by a control message.
#[derive(Clone, Copy, Debug)]
struct RouteOffer {
    destination: NodeId,
    next_hop: NodeId,
    hop_count: u32,
    seq: u32,
    expiry: SimTime,
    class: PacketPriority,
}

#[derive(Clone, Debug, Default)]
pub struct RouteTable {
    entries: BTreeMap<NodeId, RouteEntry>,
    version: u64,
}

impl RouteTable {
    pub fn get(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dest)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Bumped whenever a next hop, sequence number or validity flag changes.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn usable(&self, dest: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.entries.get(&dest).filter(|e| e.is_usable(now))
    }

    pub fn has_active_route(&self, now: SimTime) -> bool {
        self.entries.values().any(|e| e.is_usable(now))
    }

    /// Installs the offer if it is fresher than what is held: higher sequence
    /// number, or equal with fewer hops, or the held entry is unusable.
    fn offer(&mut self, o: RouteOffer, now: SimTime) -> bool {
        match self.entries.get_mut(&o.destination) {
            None => {
                self.entries.insert(
                    o.destination,
                    RouteEntry {
                        destination: o.destination,
                        next_hop: o.next_hop,
                        hop_count: o.hop_count,
                        dest_seq_num: o.seq,
                        seq_valid: true,
                        expiry: o.expiry,
                        valid: true,
                        precursors: BTreeSet::new(),
                        class: o.class,
                    },
                );
                self.version += 1;
                true
            }
            Some(e) => {
                let usable = e.is_usable(now);
                let fresher = !e.seq_valid
                    || o.seq > e.dest_seq_num
                    || (o.seq == e.dest_seq_num && (!usable || o.hop_count < e.hop_count));
                if !fresher {
                    return false;
                }
                if !usable {
                    e.precursors.clear();
                }
                e.next_hop = o.next_hop;
                e.hop_count = o.hop_count;
                e.dest_seq_num = e.dest_seq_num.max(o.seq);
                e.seq_valid = true;
                e.expiry = if usable { e.expiry.max(o.expiry) } else { o.expiry };
                e.valid = true;
                e.class = o.class;
                self.version += 1;
                true
            }
        }
    }

    /// Direct route to a neighbour we just heard from. Keeps any known sequence number.
    fn touch_neighbor(&mut self, neighbor: NodeId, expiry: SimTime, now: SimTime) {
        match self.entries.get_mut(&neighbor) {
            None => {
                self.entries.insert(
                    neighbor,
                    RouteEntry {
                        destination: neighbor,
                        next_hop: neighbor,
                        hop_count: 1,
                        dest_seq_num: 0,
                        seq_valid: false,
                        expiry,
                        valid: true,
                        precursors: BTreeSet::new(),
                        class: PacketPriority::Normal,
                    },
                );
                self.version += 1;
            }
            Some(e) => {
                if e.is_usable(now) && e.next_hop == neighbor && e.hop_count == 1 {
                    e.expiry = e.expiry.max(expiry);
                    return;
                }
                if !e.is_usable(now) {
                    e.precursors.clear();
                    e.class = PacketPriority::Normal;
                    e.expiry = expiry;
                } else {
                    e.expiry = e.expiry.max(expiry);
                }
                e.next_hop = neighbor;
                e.hop_count = 1;
                e.valid = true;
                self.version += 1;
            }
        }
    }

    fn add_precursor(&mut self, dest: NodeId, precursor: NodeId) {
        if let Some(e) = self.entries.get_mut(&dest) {
            e.precursors.insert(precursor);
        }
    }

    fn extend(&mut self, dest: NodeId, expiry: SimTime) {
        if let Some(e) = self.entries.get_mut(&dest) {
            if e.valid {
                e.expiry = e.expiry.max(expiry);
            }
        }
    }

    /// Marks a valid entry invalid and bumps its sequence number. Returns the
    /// new sequence number and the precursors that were using it.
    fn invalidate(&mut self, dest: NodeId) -> Option<(u32, BTreeSet<NodeId>)> {
        let e = self.entries.get_mut(&dest)?;
        if !e.valid {
            return None;
        }
        e.valid = false;
        e.dest_seq_num = e.dest_seq_num.wrapping_add(1);
        self.version += 1;
        Some((e.dest_seq_num, std::mem::take(&mut e.precursors)))
    }

    pub(crate) fn promote(&mut self, dest: NodeId) {
        if let Some(e) = self.entries.get_mut(&dest) {
            e.class = PacketPriority::Realtime;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RreqMessage {
    pub origin: NodeId,
    pub origin_seq: u32,
    pub broadcast_id: u32,
    pub destination: NodeId,
    /// Last known destination sequence number; 0 when unknown.
    pub dest_seq_known: u32,
    pub hop_count: u32,
    pub priority: PacketPriority,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RrepMessage {
    pub origin: NodeId,
    pub destination: NodeId,
    pub dest_seq: u32,
    pub hop_count: u32,
    pub lifetime: SimDuration,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RerrMessage {
    pub unreachable: Vec<(NodeId, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HelloMessage {
    pub origin: NodeId,
    pub seq: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RreqAction {
    Reply(RrepMessage),
    Rebroadcast(RreqMessage),
    Discard,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RrepAction {
    Forward { next_hop: NodeId, msg: RrepMessage },
    /// The RREP reached its origin; `flushed` is the data that was waiting for it.
    Consume { flushed: Vec<Packet>, discovery_started: Option<SimTime> },
    /// Not fresher than the route already held.
    Discard,
}

/// A RERR to unicast to each of `recipients`.
#[derive(Clone, Debug, PartialEq)]
pub struct RerrNotice {
    pub message: RerrMessage,
    pub recipients: BTreeSet<NodeId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BreakOutcome {
    pub invalidated: Vec<NodeId>,
    pub rerr: Option<RerrNotice>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PendingDiscovery {
    pub broadcast_id: u32,
    pub retries: u32,
    pub priority: PacketPriority,
    pub started_at: SimTime,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiscoveryTimeout {
    /// Timer belongs to a discovery that already finished or was superseded.
    Stale,
    Retry(RreqMessage),
    GiveUp(Vec<Packet>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AodvCounters {
    pub rreq_duplicates: u64,
    pub rrep_no_reverse_route: u64,
    pub rrep_stale: u64,
    pub malformed: u64,
}

/// Time-limited record of `(origin, broadcast_id)` pairs already processed.
#[derive(Clone, Debug, Default)]
pub struct RreqSeenCache {
    entries: HashMap<(NodeId, u32), SimTime>,
}

impl RreqSeenCache {
    pub fn contains(&self, origin: NodeId, broadcast_id: u32, now: SimTime) -> bool {
        self.entries.get(&(origin, broadcast_id)).is_some_and(|&exp| exp > now)
    }

    pub fn insert(&mut self, origin: NodeId, broadcast_id: u32, expires: SimTime) {
        self.entries.insert((origin, broadcast_id), expires);
    }

    pub fn purge(&mut self, now: SimTime) {
        self.entries.retain(|_, exp| *exp > now);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct AodvNode {
    id: NodeId,
    params: AodvParams,
    seq_num: u32,
    broadcast_id: u32,
    table: RouteTable,
    seen: RreqSeenCache,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    deferred: BTreeSet<NodeId>,
    buffers: BTreeMap<NodeId, VecDeque<Packet>>,
    last_heard: BTreeMap<NodeId, SimTime>,
    last_sent_to: BTreeMap<NodeId, SimTime>,
    counters: AodvCounters,
}

impl AodvNode {
    pub fn new(id: NodeId, params: AodvParams) -> Self {
        AodvNode {
            id,
            params,
            seq_num: 0,
            broadcast_id: 0,
            table: RouteTable::default(),
            seen: RreqSeenCache::default(),
            pending: BTreeMap::new(),
            deferred: BTreeSet::new(),
            buffers: BTreeMap::new(),
            last_heard: BTreeMap::new(),
            last_sent_to: BTreeMap::new(),
            counters: AodvCounters::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn params(&self) -> &AodvParams {
        &self.params
    }

    pub fn seq_num(&self) -> u32 {
        self.seq_num
    }

    pub fn table(&self) -> &RouteTable {
        &self.table
    }

    pub fn counters(&self) -> AodvCounters {
        self.counters
    }

    pub fn pending(&self, dest: NodeId) -> Option<&PendingDiscovery> {
        self.pending.get(&dest)
    }

    pub fn is_deferred(&self, dest: NodeId) -> bool {
        self.deferred.contains(&dest)
    }

    pub fn neighbors_heard(&self) -> impl Iterator<Item = (&NodeId, &SimTime)> {
        self.last_heard.iter()
    }

    fn expiry(&self, now: SimTime) -> SimTime {
        now + self.params.active_route_timeout
    }

    /// Valid, unexpired route to `dest`. Using a route keeps it alive for
    /// another active-route timeout; an expired one is marked invalid.
    pub fn route_lookup(&mut self, dest: NodeId, now: SimTime) -> Option<RouteEntry> {
        let fresh_expiry = self.expiry(now);
        let e = self.table.entries.get_mut(&dest)?;
        if !e.valid {
            return None;
        }
        if e.expiry <= now {
            e.valid = false;
            self.table.version += 1;
            return None;
        }
        e.expiry = e.expiry.max(fresh_expiry);
        Some(e.clone())
    }

    pub fn has_route(&self, dest: NodeId, now: SimTime) -> bool {
        self.table.usable(dest, now).is_some()
    }

    pub fn initiate_route_discovery(
        &mut self,
        destination: NodeId,
        priority: PacketPriority,
        now: SimTime,
    ) -> Result<RreqMessage, AodvError> {
        if self.pending.contains_key(&destination) {
            return Err(AodvError::DiscoveryAlreadyPending(destination));
        }
        if self.has_route(destination, now) {
            return Err(AodvError::RouteAlreadyValid(destination));
        }
        self.deferred.remove(&destination);
        let msg = self.next_rreq(destination, priority, now);
        self.pending.insert(
            destination,
            PendingDiscovery { broadcast_id: msg.broadcast_id, retries: 0, priority, started_at: now },
        );
        Ok(msg)
    }

    fn next_rreq(&mut self, destination: NodeId, priority: PacketPriority, now: SimTime) -> RreqMessage {
        self.seq_num = self.seq_num.wrapping_add(1);
        self.broadcast_id = self.broadcast_id.wrapping_add(1);
        let dest_seq_known = self
            .table
            .get(destination)
            .filter(|e| e.seq_valid)
            .map_or(0, |e| e.dest_seq_num);
        self.seen.insert(self.id, self.broadcast_id, now + self.params.rreq_cache_lifetime);
        RreqMessage {
            origin: self.id,
            origin_seq: self.seq_num,
            broadcast_id: self.broadcast_id,
            destination,
            dest_seq_known,
            hop_count: 0,
            priority,
        }
    }

    pub fn on_discovery_timeout(&mut self, destination: NodeId, broadcast_id: u32, now: SimTime) -> DiscoveryTimeout {
        let Some(p) = self.pending.get(&destination) else {
            return DiscoveryTimeout::Stale;
        };
        if p.broadcast_id != broadcast_id {
            return DiscoveryTimeout::Stale;
        }
        if p.retries < self.params.discovery_retries {
            let (retries, priority) = (p.retries + 1, p.priority);
            let msg = self.next_rreq(destination, priority, now);
            let p = self.pending.get_mut(&destination).expect("checked above");
            p.retries = retries;
            p.broadcast_id = msg.broadcast_id;
            DiscoveryTimeout::Retry(msg)
        } else {
            self.pending.remove(&destination);
            DiscoveryTimeout::GiveUp(self.take_buffer(destination))
        }
    }

    /// Parks data for `dest` without starting a discovery.
    pub fn defer_discovery(&mut self, dest: NodeId) {
        self.pending.remove(&dest);
        self.deferred.insert(dest);
    }

    pub fn deferred_destinations(&self) -> Vec<NodeId> {
        self.deferred.iter().copied().collect()
    }

    /// Buffers a data packet awaiting a route. Returns the packet pushed out
    /// when the per-destination buffer is already full (oldest first).
    pub fn buffer_packet(&mut self, dest: NodeId, packet: Packet) -> Option<Packet> {
        let cap = self.params.buffer_per_destination;
        let buf = self.buffers.entry(dest).or_default();
        buf.push_back(packet);
        if buf.len() > cap {
            buf.pop_front()
        } else {
            None
        }
    }

    pub fn take_buffer(&mut self, dest: NodeId) -> Vec<Packet> {
        self.buffers.remove(&dest).map(Vec::from).unwrap_or_default()
    }

    pub fn buffered(&self) -> impl Iterator<Item = &Packet> {
        self.buffers.values().flatten()
    }

    pub fn buffered_for(&self, dest: NodeId) -> usize {
        self.buffers.get(&dest).map_or(0, VecDeque::len)
    }

    pub fn note_data_sent(&mut self, dest: NodeId, now: SimTime) {
        self.last_sent_to.insert(dest, now);
    }

    /// Whether this node originated data for `dest` within the last active-route timeout.
    pub fn still_wants(&self, dest: NodeId, now: SimTime) -> bool {
        self.last_sent_to
            .get(&dest)
            .is_some_and(|&t| now.since(t) < self.params.active_route_timeout)
    }

    /// Any frame received from `from` proves the link is alive.
    pub fn record_heard(&mut self, from: NodeId, now: SimTime) {
        self.last_heard.insert(from, now);
    }

    pub fn handle_rreq(&mut self, msg: &RreqMessage, from: NodeId, now: SimTime) -> RreqAction {
        self.seen.purge(now);
        if msg.origin == self.id || self.seen.contains(msg.origin, msg.broadcast_id, now) {
            self.counters.rreq_duplicates += 1;
            return RreqAction::Discard;
        }
        self.seen.insert(msg.origin, msg.broadcast_id, now + self.params.rreq_cache_lifetime);

        let expiry = self.expiry(now);
        self.table.touch_neighbor(from, expiry, now);
        self.table.offer(
            RouteOffer {
                destination: msg.origin,
                next_hop: from,
                hop_count: msg.hop_count + 1,
                seq: msg.origin_seq,
                expiry,
                class: msg.priority,
            },
            now,
        );

        if msg.destination == self.id {
            self.seq_num = self.seq_num.max(msg.dest_seq_known) + 1;
            return RreqAction::Reply(RrepMessage {
                origin: msg.origin,
                destination: self.id,
                dest_seq: self.seq_num,
                hop_count: 0,
                lifetime: self.params.active_route_timeout,
            });
        }

        if let Some(route) = self.table.usable(msg.destination, now) {
            if route.seq_valid && route.dest_seq_num >= msg.dest_seq_known && route.next_hop != from {
                let reply = RrepMessage {
                    origin: msg.origin,
                    destination: msg.destination,
                    dest_seq: route.dest_seq_num,
                    hop_count: route.hop_count,
                    lifetime: route.expiry.since(now),
                };
                let next = route.next_hop;
                self.table.add_precursor(msg.destination, from);
                self.table.add_precursor(msg.origin, next);
                return RreqAction::Reply(reply);
            }
        }

        let known = self
            .table
            .get(msg.destination)
            .filter(|e| e.seq_valid)
            .map_or(0, |e| e.dest_seq_num);
        RreqAction::Rebroadcast(RreqMessage {
            hop_count: msg.hop_count + 1,
            dest_seq_known: msg.dest_seq_known.max(known),
            ..msg.clone()
        })
    }

    pub fn handle_rrep(
        &mut self,
        msg: &RrepMessage,
        from: NodeId,
        class: PacketPriority,
        now: SimTime,
    ) -> Result<RrepAction, AodvError> {
        let expiry = self.expiry(now);
        self.table.touch_neighbor(from, expiry, now);
        if msg.destination == self.id {
            self.counters.malformed += 1;
            return Ok(RrepAction::Discard);
        }
        let at_origin = msg.origin == self.id;
        let reverse_hop = if at_origin {
            None
        } else {
            match self.table.usable(msg.origin, now) {
                Some(r) => Some(r.next_hop),
                None => {
                    self.counters.rrep_no_reverse_route += 1;
                    return Err(AodvError::NoReverseRoute(msg.origin));
                }
            }
        };

        let updated = self.table.offer(
            RouteOffer {
                destination: msg.destination,
                next_hop: from,
                hop_count: msg.hop_count + 1,
                seq: msg.dest_seq,
                expiry,
                class,
            },
            now,
        );

        match reverse_hop {
            None => {
                let awaited = self.pending.contains_key(&msg.destination) && self.has_route(msg.destination, now);
                if !updated && !awaited {
                    self.counters.rrep_stale += 1;
                    return Ok(RrepAction::Discard);
                }
                let started = self.pending.remove(&msg.destination).map(|p| p.started_at);
                self.deferred.remove(&msg.destination);
                Ok(RrepAction::Consume { flushed: self.take_buffer(msg.destination), discovery_started: started })
            }
            Some(next_hop) => {
                if !updated {
                    self.counters.rrep_stale += 1;
                    return Ok(RrepAction::Discard);
                }
                self.table.add_precursor(msg.destination, next_hop);
                self.table.add_precursor(msg.origin, from);
                self.table.extend(msg.origin, expiry);
                Ok(RrepAction::Forward { next_hop, msg: RrepMessage { hop_count: msg.hop_count + 1, ..msg.clone() } })
            }
        }
    }

    /// HELLO to send this tick, if the node currently takes part in an active route.
    pub fn hello_tick(&self, now: SimTime) -> Option<HelloMessage> {
        self.table
            .has_active_route(now)
            .then_some(HelloMessage { origin: self.id, seq: self.seq_num })
    }

    pub fn handle_hello(&mut self, msg: &HelloMessage, from: NodeId, now: SimTime) {
        self.record_heard(from, now);
        let expiry = now + self.params.neighbor_timeout();
        let accepted = self.table.offer(
            RouteOffer {
                destination: from,
                next_hop: from,
                hop_count: 1,
                seq: msg.seq,
                expiry,
                class: PacketPriority::Normal,
            },
            now,
        );
        if !accepted {
            self.table.touch_neighbor(from, expiry, now);
        }
    }

    /// Neighbours not heard from for `allowed_hello_loss` HELLO intervals.
    /// They are forgotten; the caller runs [`handle_link_break`](Self::handle_link_break) for each.
    pub fn expired_neighbors(&mut self, now: SimTime) -> Vec<NodeId> {
        let limit = self.params.neighbor_timeout();
        let lost: Vec<NodeId> = self
            .last_heard
            .iter()
            .filter(|(_, &t)| now.since(t) >= limit)
            .map(|(&n, _)| n)
            .collect();
        for n in &lost {
            self.last_heard.remove(n);
        }
        lost
    }

    pub fn handle_link_break(&mut self, lost: NodeId, now: SimTime) -> BreakOutcome {
        self.last_heard.remove(&lost);
        let dests: Vec<NodeId> = self
            .table
            .iter()
            .filter(|e| e.valid && e.next_hop == lost)
            .map(|e| e.destination)
            .collect();
        self.invalidate_all(&dests, now)
    }

    pub fn handle_rerr(&mut self, msg: &RerrMessage, from: NodeId, now: SimTime) -> BreakOutcome {
        let mut dests = Vec::new();
        for &(dest, seq) in &msg.unreachable {
            if let Some(e) = self.table.entries.get_mut(&dest) {
                if e.valid && e.next_hop == from {
                    // invalidate() adds one on top.
                    e.dest_seq_num = e.dest_seq_num.max(seq.wrapping_sub(1));
                    dests.push(dest);
                }
            }
        }
        self.invalidate_all(&dests, now)
    }

    fn invalidate_all(&mut self, dests: &[NodeId], _now: SimTime) -> BreakOutcome {
        let mut unreachable = Vec::new();
        let mut recipients = BTreeSet::new();
        for &d in dests {
            if let Some((seq, precursors)) = self.table.invalidate(d) {
                unreachable.push((d, seq));
                recipients.extend(precursors);
            }
        }
        recipients.remove(&self.id);
        let rerr = (!unreachable.is_empty() && !recipients.is_empty()).then(|| RerrNotice {
            message: RerrMessage { unreachable: unreachable.clone() },
            recipients,
        });
        BreakOutcome { invalidated: unreachable.into_iter().map(|(d, _)| d).collect(), rerr }
    }

    /// Records `precursor` as a user of the route to `dest`.
    pub fn add_precursor(&mut self, dest: NodeId, precursor: NodeId) {
        self.table.add_precursor(dest, precursor);
    }

    pub fn promote_route(&mut self, dest: NodeId) {
        self.table.promote(dest);
    }

    /// Invalidates every valid route of class `Normal`, bumping its sequence number.
    pub fn expire_normal_routes(&mut self) -> usize {
        let dests: Vec<NodeId> = self
            .table
            .iter()
            .filter(|e| e.valid && e.class == PacketPriority::Normal)
            .map(|e| e.destination)
            .collect();
        dests.iter().filter(|&&d| self.table.invalidate(d).is_some()).count()
    }
}
