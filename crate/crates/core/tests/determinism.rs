mod common;

use common::run;
use manetsim::metrics::MetricsReport;
use manetsim::sim::Simulation;
use manetsim::trace::{parse_trace, sha256_hex};
use manetsim::traffic::FlowKind;
use manetsim::{NodeId, Protocol, Scenario, SimTime};

#[test]
fn same_seed_same_trace() {
    for protocol in Protocol::BOTH {
        for seed in [1, 9, 12345] {
            let sc = Scenario::default().with_seed(seed).with_protocol(protocol);
            let (a, b) = (run(&sc), run(&sc));
            assert_eq!(a.trace_text(), b.trace_text());
            assert_eq!(a.trace_sha256, b.trace_sha256);
            assert_eq!(a.trace_sha256, sha256_hex(a.trace_text().as_bytes()));
        }
    }
}

#[test]
fn different_seeds_differ() {
    let a = run(&Scenario::default().with_seed(1));
    let b = run(&Scenario::default().with_seed(2));
    assert_ne!(a.trace_sha256, b.trace_sha256);
}

#[test]
fn trace_text_parses_back() {
    let out = run(&Scenario::default().with_seed(5).with_protocol(Protocol::Eaodv));
    assert_eq!(parse_trace(&out.trace_text()).unwrap(), out.records);
}

#[test]
fn protocol_does_not_touch_mobility() {
    let sc = Scenario::default().with_seed(77);
    let a = Simulation::new(sc.with_protocol(Protocol::Aodv)).unwrap();
    let b = Simulation::new(sc.with_protocol(Protocol::Eaodv)).unwrap();
    for n in 0..sc.node_count as u32 {
        for t in (0..=150).step_by(5) {
            let t = SimTime::from_secs(t);
            assert_eq!(a.mobility().position_at(NodeId(n), t).unwrap(), b.mobility().position_at(NodeId(n), t).unwrap());
        }
    }
}

#[test]
fn without_realtime_flow_protocols_are_indistinguishable() {
    for seed in 1..=10 {
        let mut sc = Scenario::default().with_seed(seed);
        sc.flows.retain(|f| f.kind != FlowKind::CbrUdp);
        let a = run(&sc.with_protocol(Protocol::Aodv));
        let e = run(&sc.with_protocol(Protocol::Eaodv));
        assert_eq!(a.trace_text(), e.trace_text(), "seed {seed}");
    }
}

#[test]
fn recomputed_metrics_match_the_live_accumulator() {
    for seed in 1..=6 {
        for protocol in Protocol::BOTH {
            let sc = Scenario::default().with_seed(seed).with_protocol(protocol);
            let out = run(&sc);
            let again = MetricsReport::from_trace(&out.records, sc.metrics_interval, sc.sim_time);
            assert_eq!(again, out.metrics, "seed {seed} {protocol}");
        }
    }
}

#[test]
fn conservation_from_trace_matches_live_counters() {
    for seed in 1..=6 {
        for protocol in Protocol::BOTH {
            let sc = Scenario::default().with_seed(seed).with_protocol(protocol);
            let mut sim = Simulation::new(sc).unwrap();
            while sim.step() {}
            let flight = sim.in_flight();
            let out = sim.finish();
            let recount = manetsim::metrics::Conservation::from_trace(&out.records, flight);
            assert_eq!(recount, out.conservation);
            assert!(recount.holds(), "seed {seed} {protocol}: {recount:?}");
        }
    }
}

#[test]
fn conservation_holds_midway() {
    let mut sim = Simulation::new(Scenario::default().with_seed(3).with_protocol(Protocol::Eaodv)).unwrap();
    let mut n = 0u64;
    while sim.step() {
        n += 1;
        if n.is_multiple_of(997) {
            let c = manetsim::metrics::Conservation::from_trace(sim.records(), sim.in_flight());
            assert!(c.holds(), "t={} {c:?}", sim.now());
        }
    }
}
