//! Network-level event loop tying routing, queues, radio and traffic together.
//!
//! Each node owns an interface queue and a serial MAC: one frame is on the air
//! at a time, taking a fixed per-hop latency plus jitter. A frame reaches
//! whoever is in range when its transmission completes; a unicast whose next
//! hop has moved away is reported back to the sender as a link failure.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::aodv::{AodvNode, BreakOutcome, DiscoveryTimeout, RerrMessage, RrepAction, RreqAction};
use crate::eaodv::{admit_rreq, forwarding_policy, ExpiryScope, ForwardDecision, Protocol, RealtimeSessionState, RreqAdmission};
use crate::engine::{mix_key, EngineError, EventHandle, RandomStream, Scheduler, StreamId};
use crate::metrics::{Conservation, MetricsAccumulator, MetricsReport};
use crate::mobility::MobilityError;
use crate::packet::{
    Packet, PacketKind, PacketPriority, Payload, HELLO_SIZE, RERR_BASE_SIZE, RREP_SIZE, RREQ_SIZE,
};
use crate::queue::{EnqueueOutcome, InterfaceQueue};
use crate::scenario::{Scenario, ScenarioError};
use crate::time::{SimDuration, SimTime};
use crate::trace::{DropReason, TraceAction, TraceLog, TraceRecord};
use crate::traffic::{CbrSource, FlowKind, PacketIds, TcpEvent, TcpReceiver, TcpSender, TcpStep, TimerAction};
use crate::{FlowId, Mobility, NodeId, RadioModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug)]
struct Frame {
    packet: Packet,
    /// `None` for broadcast.
    next_hop: Option<NodeId>,
}

#[derive(Debug)]
struct NodeState {
    aodv: AodvNode,
    ifq: InterfaceQueue<Frame>,
    /// Frame currently on the air.
    mac: Option<Frame>,
}

#[derive(Debug)]
enum FlowRuntime {
    Cbr(CbrSource),
    Tcp { sender: TcpSender, receiver: TcpReceiver, timer: Option<EventHandle> },
}

#[derive(Clone, Debug)]
enum Ev {
    MetricsTick,
    FlowStart(usize),
    FlowStop(usize),
    CbrEmit(usize),
    TcpTimer(usize),
    TxDone(NodeId),
    HelloTick(NodeId),
    DiscoveryTimeout { node: NodeId, dest: NodeId, broadcast_id: u32 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimStats {
    pub events: u64,
    /// RREQs dropped for a full queue, by the class of the traffic that triggered them.
    pub rreq_queue_drops_realtime: u64,
    pub rreq_queue_drops_normal: u64,
    pub routes_expired_at_session_start: u64,
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub records: Vec<TraceRecord>,
    pub trace_sha256: String,
    pub metrics: MetricsReport,
    pub conservation: Conservation,
    /// Time from each flow's start until its source first held a route to the destination.
    pub route_latency: BTreeMap<FlowId, SimDuration>,
    pub stats: SimStats,
}

impl SimOutput {
    pub fn trace_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 48);
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

pub struct Simulation {
    sc: Scenario,
    horizon: SimTime,
    sched: Scheduler<Ev>,
    mobility: Mobility,
    jitter: RandomStream,
    nodes: Vec<NodeState>,
    flows: Vec<FlowRuntime>,
    flow_index: HashMap<FlowId, usize>,
    ids: PacketIds,
    session: RealtimeSessionState,
    expired_here: Vec<bool>,
    log: TraceLog,
    records: Vec<TraceRecord>,
    acc: MetricsAccumulator,
    live: Conservation,
    route_ready: BTreeMap<FlowId, SimTime>,
    stats: SimStats,
}

impl Simulation {
    /// Builds the network. Trajectories cover the whole horizon and are
    /// drawn from the scenario seed's mobility stream only.
    pub fn new(sc: Scenario) -> Result<Self, SimError> {
        sc.validate()?;
        let horizon = sc.sim_time;
        let radio = RadioModel::new(sc.radio_range)
            .ok_or_else(|| ScenarioError::Validation(format!("radio_range {} is invalid", sc.radio_range)))?;
        let mut mob_rng = RandomStream::new(sc.seed, StreamId::Mobility);
        let mobility = Mobility::random_waypoint(radio, &sc.mobility, &sc.fixed_positions, sc.node_count, horizon, &mut mob_rng)?;
        let nodes = (0..sc.node_count)
            .map(|i| NodeState {
                aodv: AodvNode::new(NodeId(i as u32), sc.aodv.clone()),
                ifq: InterfaceQueue::new(sc.queue_capacity),
                mac: None,
            })
            .collect();
        let flows = sc
            .flows
            .iter()
            .map(|f| match f.kind {
                FlowKind::CbrUdp => FlowRuntime::Cbr(CbrSource::new(f.clone())),
                FlowKind::TcpLike => FlowRuntime::Tcp {
                    sender: TcpSender::new(f.clone()),
                    receiver: TcpReceiver::new(f.clone()),
                    timer: None,
                },
            })
            .collect();
        let flow_index = sc.flows.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
        let acc = MetricsAccumulator::new(sc.metrics_interval, horizon);
        let mut sim = Simulation {
            horizon,
            sched: Scheduler::new(),
            mobility,
            jitter: RandomStream::new(sc.seed, StreamId::Jitter),
            nodes,
            flows,
            flow_index,
            ids: PacketIds::default(),
            session: RealtimeSessionState::default(),
            expired_here: vec![false; sc.node_count],
            log: TraceLog::new(false),
            records: Vec::new(),
            acc,
            live: Conservation::default(),
            route_ready: BTreeMap::new(),
            stats: SimStats::default(),
            sc,
        };
        // Interval boundaries go in first so they fire before anything else
        // scheduled for the same instant.
        for t in sim.acc.tick_times() {
            sim.sched.schedule(t, Ev::MetricsTick)?;
        }
        for i in 0..sim.flows.len() {
            let f = &sim.sc.flows[i];
            let (start, stop) = (f.start_time, f.stop_time);
            sim.at(start, Ev::FlowStart(i));
            if let Some(stop) = stop {
                sim.at(stop, Ev::FlowStop(i));
            }
        }
        let hello = sim.sc.aodv.hello_interval.as_micros();
        for i in 0..sim.sc.node_count {
            let offset = sim.keyed_micros(mix_key(&[0x0048_454c_4c4f, i as u64]), hello);
            sim.at(SimTime::from_micros(offset), Ev::HelloTick(NodeId(i as u32)));
        }
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn node(&self, id: NodeId) -> &AodvNode {
        &self.nodes[id.index()].aodv
    }

    pub fn routing_nodes(&self) -> impl Iterator<Item = &AodvNode> {
        self.nodes.iter().map(|n| &n.aodv)
    }

    pub fn mobility(&self) -> &Mobility {
        &self.mobility
    }

    pub fn session(&self) -> &RealtimeSessionState {
        &self.session
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn queue_len(&self, id: NodeId) -> usize {
        self.nodes[id.index()].ifq.len()
    }

    /// Processes the next event. Returns false once nothing is left before the horizon.
    pub fn step(&mut self) -> bool {
        let Some(ev) = self.sched.pop_due(self.horizon) else {
            return false;
        };
        self.stats.events += 1;
        self.dispatch(ev.payload);
        true
    }

    pub fn run(mut self) -> SimOutput {
        while self.step() {}
        self.finish()
    }

    pub fn finish(mut self) -> SimOutput {
        self.sched.advance_to(self.horizon);
        let mut conservation = self.live;
        let flight = self.in_flight();
        conservation.realtime.in_flight = flight[0];
        conservation.normal.in_flight = flight[1];
        let route_latency = self
            .route_ready
            .iter()
            .map(|(f, &t)| (*f, t.since(self.sc.flows[self.flow_index[f]].start_time)))
            .collect();
        SimOutput {
            trace_sha256: self.log.sha256_hex(),
            records: self.records,
            metrics: self.acc.report(),
            conservation,
            route_latency,
            stats: self.stats,
        }
    }

    /// Payload packets still inside the network, in [`PacketPriority::ALL`] order.
    pub fn in_flight(&self) -> [u64; 2] {
        let mut out = [0u64; 2];
        let mut count = |p: &Packet| {
            if let Some(c) = p.kind().data_class().filter(|_| p.kind().is_payload()) {
                out[usize::from(c == PacketPriority::Normal)] += 1;
            }
        };
        for n in &self.nodes {
            n.ifq.iter().for_each(|f| count(&f.packet));
            n.mac.iter().for_each(|f| count(&f.packet));
            n.aodv.buffered().for_each(&mut count);
        }
        out
    }

    fn at(&mut self, t: SimTime, ev: Ev) -> Option<EventHandle> {
        if t >= self.horizon {
            return None;
        }
        Some(self.sched.schedule(t, ev).expect("events are never scheduled in the past"))
    }

    fn keyed_micros(&mut self, key: u64, bound: u64) -> u64 {
        if bound == 0 {
            return 0;
        }
        let v = self.jitter.keyed_uniform(key, 0.0, bound as f64).expect("valid range");
        v as u64
    }

    fn eaodv(&self) -> bool {
        self.sc.protocol == Protocol::Eaodv
    }

    fn dispatch(&mut self, ev: Ev) {
        match ev {
            Ev::MetricsTick => self.acc.tick(self.now()),
            Ev::FlowStart(i) => self.flow_start(i),
            Ev::FlowStop(i) => self.flow_stop(i),
            Ev::CbrEmit(i) => self.cbr_emit(i),
            Ev::TcpTimer(i) => {
                if let FlowRuntime::Tcp { timer, .. } = &mut self.flows[i] {
                    *timer = None;
                }
                self.tcp_event(i, TcpEvent::Timeout);
            }
            Ev::TxDone(n) => self.tx_done(n),
            Ev::HelloTick(n) => self.hello_tick(n),
            Ev::DiscoveryTimeout { node, dest, broadcast_id } => self.discovery_timeout(node, dest, broadcast_id),
        }
    }

    // ---- traffic ----

    fn flow_start(&mut self, i: usize) {
        let now = self.now();
        match self.sc.flows[i].kind {
            FlowKind::CbrUdp => {
                if self.eaodv() {
                    let id = self.sc.flows[i].id;
                    match self.sc.expiry_scope {
                        ExpiryScope::Network => {
                            let n = crate::eaodv::on_realtime_start(
                                &mut self.session,
                                id,
                                self.nodes.iter_mut().map(|n| &mut n.aodv),
                                now,
                            );
                            self.stats.routes_expired_at_session_start += n as u64;
                        }
                        ExpiryScope::PerNode => {
                            if self.session.begin(id, now) {
                                self.expired_here.iter_mut().for_each(|e| *e = false);
                            }
                        }
                    }
                }
                self.cbr_emit(i);
            }
            FlowKind::TcpLike => self.tcp_event(i, TcpEvent::Start),
        }
    }

    fn flow_stop(&mut self, i: usize) {
        let f = &self.sc.flows[i];
        if f.kind != FlowKind::CbrUdp || !self.eaodv() || !self.session.end(f.id) {
            return;
        }
        // Session over: resume the discoveries parked while it ran.
        for n in 0..self.nodes.len() {
            let id = NodeId(n as u32);
            for dest in self.nodes[n].aodv.deferred_destinations() {
                if self.nodes[n].aodv.buffered_for(dest) > 0 {
                    self.start_discovery(id, dest);
                }
            }
        }
    }

    fn cbr_emit(&mut self, i: usize) {
        let now = self.now();
        let FlowRuntime::Cbr(src) = &mut self.flows[i] else { return };
        let Some(pkt) = src.cbr_tick(now, &mut self.ids) else { return };
        let next = src.next_emission();
        self.originate(pkt);
        if self.sc.flows[i].stop_time.is_none_or(|s| next < s) {
            self.at(next, Ev::CbrEmit(i));
        }
    }

    fn tcp_event(&mut self, i: usize, ev: TcpEvent) {
        let now = self.now();
        let FlowRuntime::Tcp { sender, .. } = &mut self.flows[i] else { return };
        let step = sender.tcp_step(ev, now, &mut self.ids);
        self.apply_tcp(i, step);
    }

    fn apply_tcp(&mut self, i: usize, step: TcpStep) {
        match step.timer {
            TimerAction::Keep => {}
            TimerAction::Cancel => self.cancel_tcp_timer(i),
            TimerAction::Arm(t) => {
                self.cancel_tcp_timer(i);
                let h = self.at(t, Ev::TcpTimer(i));
                if let FlowRuntime::Tcp { timer, .. } = &mut self.flows[i] {
                    *timer = h;
                }
            }
        }
        for p in step.packets {
            self.originate(p);
        }
    }

    fn cancel_tcp_timer(&mut self, i: usize) {
        if let FlowRuntime::Tcp { timer, .. } = &mut self.flows[i] {
            if let Some(h) = timer.take() {
                self.sched.cancel(h);
            }
        }
    }

    /// Class of the traffic `node` exchanges with `dest`, realtime if any flow between them is.
    fn traffic_class(&self, node: NodeId, dest: NodeId) -> PacketPriority {
        self.sc
            .flows
            .iter()
            .filter(|f| {
                (f.source == node && f.destination == dest)
                    || (f.kind == FlowKind::TcpLike && f.source == dest && f.destination == node)
            })
            .map(|f| f.class())
            .max()
            .unwrap_or(PacketPriority::Normal)
    }

    fn flow_between(&self, node: NodeId, dest: NodeId) -> Option<FlowId> {
        self.sc
            .flows
            .iter()
            .filter(|f| f.source == node && f.destination == dest)
            .max_by_key(|f| f.class())
            .map(|f| f.id)
    }

    fn mark_route_ready(&mut self, node: NodeId, dest: NodeId) {
        let now = self.now();
        for f in &self.sc.flows {
            if f.source == node && f.destination == dest && f.start_time <= now {
                self.route_ready.entry(f.id).or_insert(now);
            }
        }
    }

    // ---- tracing and accounting ----

    fn record(&mut self, action: TraceAction, node: NodeId, pkt: &Packet, reason: Option<DropReason>) {
        let rec = TraceRecord {
            action,
            time: self.now(),
            node,
            kind: pkt.kind(),
            pkt_id: pkt.id,
            size: pkt.size,
            src: pkt.src,
            dst: pkt.dst,
            reason,
        };
        self.log.push(&rec);
        self.records.push(rec);
    }

    fn drop_packet(&mut self, node: NodeId, pkt: &Packet, reason: DropReason) {
        self.record(TraceAction::Dropped, node, pkt, Some(reason));
        self.acc.on_dropped(pkt.kind(), reason);
        if let Some(c) = payload_class(pkt) {
            let b = self.live.class_mut(c);
            b.dropped.by_reason[reason.index()] += 1;
        }
        if pkt.kind() == PacketKind::Rreq && reason == DropReason::Queue {
            match pkt.class {
                PacketPriority::Realtime => self.stats.rreq_queue_drops_realtime += 1,
                PacketPriority::Normal => self.stats.rreq_queue_drops_normal += 1,
            }
        }
    }

    fn expire_here(&mut self, node: NodeId, class: PacketPriority) {
        if self.eaodv()
            && self.sc.expiry_scope == ExpiryScope::PerNode
            && self.session.is_active()
            && class == PacketPriority::Realtime
            && !self.expired_here[node.index()]
        {
            self.expired_here[node.index()] = true;
            let n = self.nodes[node.index()].aodv.expire_normal_routes();
            self.stats.routes_expired_at_session_start += n as u64;
        }
    }

    // ---- origin side ----

    /// An application hands a fresh packet to its node's routing layer.
    fn originate(&mut self, pkt: Packet) {
        let node = pkt.src;
        self.record(TraceAction::Sent, node, &pkt, None);
        self.acc.on_originated(pkt.kind());
        if let Some(c) = payload_class(&pkt) {
            self.live.class_mut(c).generated += 1;
        }
        self.expire_here(node, pkt.class);
        let dest = pkt.dst.expect("application packets are unicast");
        let now = self.now();
        self.nodes[node.index()].aodv.note_data_sent(dest, now);
        self.route_out(node, pkt);
    }

    fn route_out(&mut self, node: NodeId, pkt: Packet) {
        let now = self.now();
        let dest = pkt.dst.expect("application packets are unicast");
        let aodv = &mut self.nodes[node.index()].aodv;
        if let Some(route) = aodv.route_lookup(dest, now) {
            if pkt.class == PacketPriority::Realtime {
                aodv.promote_route(dest);
            }
            self.mark_route_ready(node, dest);
            self.enqueue(node, Frame { packet: pkt, next_hop: Some(route.next_hop) }, false);
            return;
        }
        let class = pkt.class;
        if let Some(evicted) = aodv.buffer_packet(dest, pkt) {
            self.drop_packet(node, &evicted, DropReason::Queue);
        }
        let park = self.eaodv() && self.session.is_active() && class == PacketPriority::Normal;
        let aodv = &mut self.nodes[node.index()].aodv;
        if aodv.pending(dest).is_some() {
            return;
        }
        if park {
            aodv.defer_discovery(dest);
            return;
        }
        self.start_discovery(node, dest);
    }

    fn start_discovery(&mut self, node: NodeId, dest: NodeId) {
        let now = self.now();
        let class = self.traffic_class(node, dest);
        let priority = self.sc.protocol.rreq_priority(class);
        let Ok(msg) = self.nodes[node.index()].aodv.initiate_route_discovery(dest, priority, now) else {
            return;
        };
        let bid = msg.broadcast_id;
        self.send_rreq(node, msg, class);
        let t = now + self.sc.aodv.discovery_timeout;
        self.at(t, Ev::DiscoveryTimeout { node, dest, broadcast_id: bid });
    }

    fn send_rreq(&mut self, node: NodeId, msg: crate::aodv::RreqMessage, class: PacketPriority) {
        let flow = self.flow_between(node, msg.destination);
        let pkt = self.control(node, None, Payload::Rreq(msg), RREQ_SIZE, class, flow);
        self.record(TraceAction::Sent, node, &pkt, None);
        self.enqueue(node, Frame { packet: pkt, next_hop: None }, false);
    }

    fn control(
        &mut self,
        src: NodeId,
        dst: Option<NodeId>,
        payload: Payload,
        size: u32,
        class: PacketPriority,
        flow: Option<FlowId>,
    ) -> Packet {
        Packet { id: self.ids.next_id(), flow, payload, class, src, dst, size, created_at: self.now(), hops_traversed: 0 }
    }

    fn discovery_timeout(&mut self, node: NodeId, dest: NodeId, bid: u32) {
        let now = self.now();
        let class = self.traffic_class(node, dest);
        let aodv = &mut self.nodes[node.index()].aodv;
        if self.sc.protocol == Protocol::Eaodv
            && self.session.is_active()
            && class == PacketPriority::Normal
            && aodv.pending(dest).is_some_and(|p| p.broadcast_id == bid)
        {
            aodv.defer_discovery(dest);
            return;
        }
        match aodv.on_discovery_timeout(dest, bid, now) {
            DiscoveryTimeout::Stale => {}
            DiscoveryTimeout::Retry(msg) => {
                let bid = msg.broadcast_id;
                self.send_rreq(node, msg, class);
                let t = now + self.sc.aodv.discovery_timeout;
                self.at(t, Ev::DiscoveryTimeout { node, dest, broadcast_id: bid });
            }
            DiscoveryTimeout::GiveUp(pkts) => {
                for p in pkts {
                    self.drop_packet(node, &p, DropReason::NoRoute);
                }
            }
        }
    }

    // ---- link layer ----

    fn enqueue(&mut self, node: NodeId, frame: Frame, forwarding: bool) {
        let band = self.sc.protocol.queue_band(frame.packet.class);
        let pkt_copy = forwarding.then(|| frame.packet.clone());
        match self.nodes[node.index()].ifq.enqueue(frame, band) {
            EnqueueOutcome::Queued => {
                if let Some(p) = pkt_copy {
                    self.record(TraceAction::Forwarded, node, &p, None);
                }
            }
            EnqueueOutcome::QueuedEvicting(evicted) => {
                if let Some(p) = pkt_copy {
                    self.record(TraceAction::Forwarded, node, &p, None);
                }
                self.drop_packet(node, &evicted.packet, DropReason::Queue);
            }
            EnqueueOutcome::DroppedTail(f) => self.drop_packet(node, &f.packet, DropReason::Queue),
        }
        self.kick_mac(node);
    }

    fn kick_mac(&mut self, node: NodeId) {
        let st = &mut self.nodes[node.index()];
        if st.mac.is_some() {
            return;
        }
        let Some(frame) = st.ifq.dequeue() else { return };
        let key = mix_key(&[frame.packet.content_key(), u64::from(node.0), u64::from(frame.packet.hops_traversed)]);
        st.mac = Some(frame);
        let jitter = self.keyed_micros(key, self.sc.jitter.as_micros());
        let t = self.now() + self.sc.hop_latency + SimDuration::from_micros(jitter);
        self.at(t, Ev::TxDone(node));
    }

    fn tx_done(&mut self, sender: NodeId) {
        let now = self.now();
        let Some(frame) = self.nodes[sender.index()].mac.take() else { return };
        match frame.next_hop {
            Some(nh) => {
                if self.mobility.in_range(sender, nh, now).unwrap_or(false) {
                    self.receive(nh, sender, frame.packet);
                } else {
                    self.drop_packet(sender, &frame.packet, DropReason::NoRoute);
                    let out = self.nodes[sender.index()].aodv.handle_link_break(nh, now);
                    self.after_break(sender, out);
                }
            }
            None => {
                let hearers = self.mobility.neighbors(sender, now).unwrap_or_default();
                for r in hearers {
                    self.receive(r, sender, frame.packet.clone());
                }
            }
        }
        self.kick_mac(sender);
    }

    fn after_break(&mut self, node: NodeId, out: BreakOutcome) {
        let now = self.now();
        if let Some(notice) = out.rerr {
            let size = RERR_BASE_SIZE + 8 * notice.message.unreachable.len() as u32;
            let pkt = self.control(node, None, Payload::Rerr(notice.message), size, PacketPriority::Normal, None);
            self.record(TraceAction::Sent, node, &pkt, None);
            self.enqueue(node, Frame { packet: pkt, next_hop: None }, false);
        }
        for dest in out.invalidated {
            let aodv = &mut self.nodes[node.index()].aodv;
            if !aodv.still_wants(dest, now) || aodv.pending(dest).is_some() {
                continue;
            }
            if self.eaodv() && self.session.is_active() && self.traffic_class(node, dest) == PacketPriority::Normal {
                self.nodes[node.index()].aodv.defer_discovery(dest);
            } else {
                self.start_discovery(node, dest);
            }
        }
    }

    fn hello_tick(&mut self, node: NodeId) {
        let now = self.now();
        if let Some(h) = self.nodes[node.index()].aodv.hello_tick(now) {
            let pkt = self.control(node, None, Payload::Hello(h), HELLO_SIZE, PacketPriority::Normal, None);
            self.record(TraceAction::Sent, node, &pkt, None);
            self.enqueue(node, Frame { packet: pkt, next_hop: None }, false);
        }
        let lost = self.nodes[node.index()].aodv.expired_neighbors(now);
        for n in lost {
            let out = self.nodes[node.index()].aodv.handle_link_break(n, now);
            self.after_break(node, out);
        }
        let next = now + self.sc.aodv.hello_interval;
        self.at(next, Ev::HelloTick(node));
    }

    // ---- receive side ----

    fn receive(&mut self, node: NodeId, from: NodeId, pkt: Packet) {
        let now = self.now();
        self.expire_here(node, pkt.class);
        self.nodes[node.index()].aodv.record_heard(from, now);
        match pkt.payload.clone() {
            Payload::Rreq(msg) => {
                let full = self.nodes[node.index()].ifq.is_full();
                if admit_rreq(&msg, full) == RreqAdmission::RejectBusy {
                    self.drop_packet(node, &pkt, DropReason::Queue);
                    return;
                }
                self.record(TraceAction::Received, node, &pkt, None);
                match self.nodes[node.index()].aodv.handle_rreq(&msg, from, now) {
                    RreqAction::Reply(rrep) => {
                        let Some(back) = self.nodes[node.index()].aodv.table().usable(msg.origin, now).map(|r| r.next_hop)
                        else {
                            return;
                        };
                        let reply =
                            self.control(node, Some(msg.origin), Payload::Rrep(rrep), RREP_SIZE, pkt.class, pkt.flow);
                        self.record(TraceAction::Sent, node, &reply, None);
                        self.enqueue(node, Frame { packet: reply, next_hop: Some(back) }, false);
                    }
                    RreqAction::Rebroadcast(m) => {
                        let fwd = Packet { payload: Payload::Rreq(m), hops_traversed: pkt.hops_traversed + 1, ..pkt };
                        if fwd.hops_traversed >= self.sc.aodv.net_diameter {
                            self.drop_packet(node, &fwd, DropReason::Ttl);
                        } else {
                            self.enqueue(node, Frame { packet: fwd, next_hop: None }, true);
                        }
                    }
                    RreqAction::Discard => {}
                }
            }
            Payload::Rrep(msg) => {
                self.record(TraceAction::Received, node, &pkt, None);
                match self.nodes[node.index()].aodv.handle_rrep(&msg, from, pkt.class, now) {
                    Ok(RrepAction::Forward { next_hop, msg }) => {
                        let fwd = Packet { payload: Payload::Rrep(msg), hops_traversed: pkt.hops_traversed + 1, ..pkt };
                        self.enqueue(node, Frame { packet: fwd, next_hop: Some(next_hop) }, true);
                    }
                    Ok(RrepAction::Consume { flushed, .. }) => {
                        self.mark_route_ready(node, msg.destination);
                        for p in flushed {
                            self.route_out(node, p);
                        }
                    }
                    Ok(RrepAction::Discard) => {}
                    Err(_) => self.drop_packet(node, &pkt, DropReason::NoRoute),
                }
            }
            Payload::Rerr(msg) => {
                self.record(TraceAction::Received, node, &pkt, None);
                let out = self.nodes[node.index()].aodv.handle_rerr(&msg, from, now);
                self.after_break(node, out);
            }
            Payload::Hello(msg) => {
                self.record(TraceAction::Received, node, &pkt, None);
                self.nodes[node.index()].aodv.handle_hello(&msg, from, now);
            }
            Payload::Cbr { .. } | Payload::TcpData { .. } | Payload::TcpAck { .. } => {
                if self.eaodv() && forwarding_policy(self.session.is_active(), &pkt) == ForwardDecision::DropLowPriority {
                    self.drop_packet(node, &pkt, DropReason::Priority);
                    return;
                }
                self.record(TraceAction::Received, node, &pkt, None);
                if pkt.dst == Some(node) {
                    self.deliver(pkt);
                } else {
                    self.forward_data(node, from, pkt);
                }
            }
        }
    }

    fn forward_data(&mut self, node: NodeId, from: NodeId, pkt: Packet) {
        let now = self.now();
        let dest = pkt.dst.expect("data is unicast");
        let pkt = Packet { hops_traversed: pkt.hops_traversed + 1, ..pkt };
        if pkt.hops_traversed >= self.sc.aodv.net_diameter {
            self.drop_packet(node, &pkt, DropReason::Ttl);
            return;
        }
        let aodv = &mut self.nodes[node.index()].aodv;
        aodv.route_lookup(pkt.src, now);
        match aodv.route_lookup(dest, now) {
            Some(route) => {
                if pkt.class == PacketPriority::Realtime {
                    aodv.promote_route(dest);
                }
                aodv.add_precursor(dest, from);
                self.enqueue(node, Frame { packet: pkt, next_hop: Some(route.next_hop) }, true);
            }
            None => {
                self.drop_packet(node, &pkt, DropReason::NoRoute);
                let seq = self.nodes[node.index()].aodv.table().get(dest).map_or(0, |e| e.dest_seq_num);
                let msg = RerrMessage { unreachable: vec![(dest, seq.wrapping_add(1))] };
                let size = RERR_BASE_SIZE + 8;
                let rerr = self.control(node, None, Payload::Rerr(msg), size, PacketPriority::Normal, None);
                self.record(TraceAction::Sent, node, &rerr, None);
                self.enqueue(node, Frame { packet: rerr, next_hop: None }, false);
            }
        }
    }

    fn deliver(&mut self, pkt: Packet) {
        self.acc.on_delivered(pkt.kind(), pkt.size, pkt.created_at);
        if let Some(c) = payload_class(&pkt) {
            self.live.class_mut(c).received += 1;
        }
        let Some(i) = pkt.flow.and_then(|f| self.flow_index.get(&f).copied()) else { return };
        let now = self.now();
        match pkt.payload {
            Payload::TcpData { seq, .. } => {
                let FlowRuntime::Tcp { receiver, .. } = &mut self.flows[i] else { return };
                let ack = receiver.on_data(seq, now, &mut self.ids);
                self.originate(ack);
            }
            Payload::TcpAck { seq } => self.tcp_event(i, TcpEvent::Ack { seq }),
            _ => {}
        }
    }
}

fn payload_class(p: &Packet) -> Option<PacketPriority> {
    if p.kind().is_payload() {
        p.kind().data_class()
    } else {
        None
    }
}
