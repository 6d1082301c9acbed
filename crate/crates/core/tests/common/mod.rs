#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use manetsim::sim::{SimOutput, Simulation};
use manetsim::trace::{TraceAction, TraceRecord};
use manetsim::traffic::{FlowKind, FlowSpec};
use manetsim::{FlowId, NodeId, PacketPriority, Position, Protocol, Scenario, SimDuration, SimTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
pub const REALTIME_START: SimTime = SimTime::from_secs(60);

pub fn run(sc: &Scenario) -> SimOutput {
    Simulation::new(sc.clone()).expect("valid scenario").run()
}

/// Hop distances from `src` over the unit-disc graph, by plain BFS.
pub fn bfs_hops(pos: &[(f64, f64)], range: f64, src: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; pos.len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for v in 0..pos.len() {
            let (dx, dy) = (pos[u].0 - pos[v].0, pos[u].1 - pos[v].1);
            if dist[v].is_none() && (dx * dx + dy * dy).sqrt() <= range {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

pub struct StaticCase {
    pub scenario: Scenario,
    pub positions: Vec<(f64, f64)>,
    pub source: NodeId,
    pub destination: NodeId,
    pub expected_hops: u32,
}

/// A random motionless topology with a connected source/destination pair
/// at least two hops apart, and zero jitter.
pub fn static_case(case: u64) -> StaticCase {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + case);
    loop {
        let n = rng.gen_range(6..=16);
        let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0))).collect();
        let src = rng.gen_range(0..n);
        let hops = bfs_hops(&pos, 250.0, src);
        let candidates: Vec<usize> = (0..n).filter(|&d| hops[d].is_some_and(|h| h >= 2)).collect();
        if candidates.is_empty() {
            continue;
        }
        let dst = candidates[rng.gen_range(0..candidates.len())];
        let mut sc = Scenario {
            node_count: n,
            sim_time: SimTime::from_secs(6),
            fixed_positions: pos.iter().map(|&(x, y)| Some(Position::new(x, y))).collect(),
            flows: vec![cbr(0, src as u32, dst as u32, 2, None)],
            jitter: SimDuration::ZERO,
            seed: case,
            ..Scenario::default()
        };
        sc.mobility.speed_min = 0.0;
        sc.mobility.speed_max = 0.0;
        return StaticCase {
            scenario: sc,
            positions: pos,
            source: NodeId(src as u32),
            destination: NodeId(dst as u32),
            expected_hops: hops[dst].unwrap(),
        };
    }
}

pub fn cbr(id: u32, src: u32, dst: u32, start: u64, stop: Option<u64>) -> FlowSpec {
    FlowSpec {
        id: FlowId(id),
        source: NodeId(src),
        destination: NodeId(dst),
        kind: FlowKind::CbrUdp,
        start_time: SimTime::from_secs(start),
        stop_time: stop.map(SimTime::from_secs),
        packet_size: 512,
        rate: 4.0,
    }
}

pub fn tcp(id: u32, src: u32, dst: u32, start: SimTime) -> FlowSpec {
    FlowSpec {
        id: FlowId(id),
        source: NodeId(src),
        destination: NodeId(dst),
        kind: FlowKind::TcpLike,
        start_time: start,
        stop_time: None,
        packet_size: 512,
        rate: 1.0,
    }
}

pub const STAR_WEST: NodeId = NodeId(1);
pub const STAR_EAST: NodeId = NodeId(2);
pub const STAR_CBR: FlowId = FlowId(0);
const STAR_CLUSTER: usize = 8;

/// Motionless star: hub 0 at the centre, west/east leaves joined only through
/// the hub, and two eight-node clusters north and south whose pairwise TCP
/// flows all cross the hub and keep its queue full. CBR west to east at 60 s.
pub fn saturated_star(seed: u64, protocol: Protocol) -> Scenario {
    let mut pos = vec![(500.0, 500.0), (260.0, 500.0), (740.0, 500.0)];
    let north: Vec<(f64, f64)> = (0..STAR_CLUSTER).map(|i| (470.0 + 20.0 * (i % 4) as f64, 740.0 - 10.0 * (i / 4) as f64)).collect();
    pos.extend(north.iter().copied());
    pos.extend(north.iter().map(|&(x, y)| (x, 1000.0 - y)));
    let mut flows = vec![cbr(STAR_CBR.0, STAR_WEST.0, STAR_EAST.0, 60, None)];
    let mut id = 1;
    let k = STAR_CLUSTER as u32;
    for n in 3..3 + k {
        for s in 3 + k..3 + 2 * k {
            for (a, b) in [(n, s), (s, n)] {
                let start = SimTime::from_micros(5_000_000 + u64::from(id) * 29_000);
                flows.push(tcp(id, a, b, start));
                id += 1;
            }
        }
    }
    let mut sc = Scenario {
        node_count: pos.len(),
        sim_time: SimTime::from_secs(70),
        fixed_positions: pos.iter().map(|&(x, y)| Some(Position::new(x, y))).collect(),
        flows,
        seed,
        protocol,
        ..Scenario::default()
    };
    sc.mobility.speed_min = 0.0;
    sc.mobility.speed_max = 0.0;
    sc
}

/// Normal-class payload accepted at its final destination after `t`.
pub fn normal_deliveries_after(records: &[TraceRecord], t: SimTime) -> usize {
    records
        .iter()
        .filter(|r| r.action == TraceAction::Received && r.time > t)
        .filter(|r| r.kind.is_payload() && r.kind.data_class() == Some(PacketPriority::Normal))
        .filter(|r| r.dst == Some(r.node))
        .count()
}

/// Per interval start: `(throughput_pps, loss, delivery_ratio)` of the realtime class.
pub fn realtime_series(out: &SimOutput) -> BTreeMap<SimTime, (f64, f64, Option<f64>)> {
    out.metrics
        .series(PacketPriority::Realtime)
        .map(|m| (m.start, (m.throughput_pps, m.loss_count() as f64, m.delivery_ratio)))
        .collect()
}

/// Follows valid next hops towards `dest` from every node and reports the
/// first revisited node, if any.
pub fn find_cycle(sim: &Simulation, dest: NodeId) -> Option<Vec<NodeId>> {
    let n = sim.scenario().node_count;
    for start in 0..n as u32 {
        let mut path = vec![NodeId(start)];
        let mut at = NodeId(start);
        while at != dest {
            let Some(e) = sim.node(at).table().get(dest).filter(|e| e.valid) else {
                break;
            };
            if path.contains(&e.next_hop) {
                path.push(e.next_hop);
                return Some(path);
            }
            path.push(e.next_hop);
            at = e.next_hop;
        }
    }
    None
}

#[derive(Default)]
struct Watch {
    versions: Vec<u64>,
    seq: HashMap<(NodeId, NodeId), u32>,
    checks: u64,
}

impl Watch {
    fn observe(&mut self, sim: &Simulation) -> Result<(), String> {
        let n = sim.scenario().node_count;
        self.versions.resize(n, u64::MAX);
        let mut changed = false;
        for i in 0..n {
            let node = sim.node(NodeId(i as u32));
            if node.table().version() == self.versions[i] {
                continue;
            }
            changed = true;
            self.versions[i] = node.table().version();
            for e in node.table().iter() {
                let prev = self.seq.entry((node.id(), e.destination)).or_insert(e.dest_seq_num);
                if e.dest_seq_num < *prev {
                    return Err(format!(
                        "t={} node {} dest {} seq went {} -> {}",
                        sim.now(),
                        node.id(),
                        e.destination,
                        prev,
                        e.dest_seq_num
                    ));
                }
                *prev = e.dest_seq_num;
            }
        }
        if changed {
            self.checks += 1;
            for d in 0..n as u32 {
                if let Some(cycle) = find_cycle(sim, NodeId(d)) {
                    return Err(format!("t={} loop towards {d}: {cycle:?}", sim.now()));
                }
            }
        }
        Ok(())
    }
}

/// Steps a run to completion, checking after every event that changed any table.
pub fn check_routing_invariants(sc: Scenario) -> Result<u64, String> {
    let mut sim = Simulation::new(sc).unwrap();
    let mut w = Watch::default();
    w.observe(&sim)?;
    while sim.step() {
        w.observe(&sim)?;
    }
    Ok(w.checks)
}

/// The `i`th randomized mobile run: default flows, alternating protocol,
/// every third run with faster, pause-free movement.
pub fn mobile_case(i: u64) -> Scenario {
    let protocol = if i.is_multiple_of(2) { Protocol::Aodv } else { Protocol::Eaodv };
    let mut sc = Scenario::default().with_seed(1000 + i).with_protocol(protocol);
    if i.is_multiple_of(3) {
        sc.mobility.speed_max = 20.0;
        sc.mobility.pause_duration = 0.0;
    }
    sc
}

/// Hop count of the valid route the source holds at the end of the run.
pub fn installed_hops(case: &StaticCase) -> Option<u32> {
    let mut sim = Simulation::new(case.scenario.clone()).unwrap();
    while sim.step() {}
    sim.node(case.source).table().get(case.destination).filter(|e| e.valid).map(|e| e.hop_count)
}
