//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::*;
use manetsim::metrics::Conservation;
use manetsim::packet::PacketKind;
use manetsim::sim::SimOutput;
use manetsim::trace::{DropReason, TraceAction};
use manetsim::traffic::FlowKind;
use manetsim::{Protocol, Scenario, SimTime};

const EPS: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Runs {
    aodv: Vec<SimOutput>,
    eaodv: Vec<SimOutput>,
    slowest: Duration,
}

fn default_runs() -> Runs {
    let mut runs = Runs { aodv: Vec::new(), eaodv: Vec::new(), slowest: Duration::ZERO };
    for seed in SEEDS {
        for protocol in Protocol::BOTH {
            let t = Instant::now();
            let out = run(&Scenario::default().with_seed(seed).with_protocol(protocol));
            runs.slowest = runs.slowest.max(t.elapsed());
            match protocol {
                Protocol::Aodv => runs.aodv.push(out),
                Protocol::Eaodv => runs.eaodv.push(out),
            }
        }
    }
    runs
}

/// Per interval start, the mean over seeds of `pick(throughput, loss, ratio)`.
fn means(outs: &[SimOutput], pick: fn((f64, f64, Option<f64>)) -> f64) -> BTreeMap<SimTime, f64> {
    let mut sums: BTreeMap<SimTime, f64> = BTreeMap::new();
    for out in outs {
        for (t, v) in realtime_series(out) {
            *sums.entry(t).or_default() += pick(v);
        }
    }
    sums.values_mut().for_each(|s| *s /= outs.len() as f64);
    sums
}

/// Post-start intervals where EAODV's mean is on the wrong side of AODV's.
fn ordering_violations(runs: &Runs, pick: fn((f64, f64, Option<f64>)) -> f64, higher_is_better: bool) -> Vec<String> {
    let (a, e) = (means(&runs.aodv, pick), means(&runs.eaodv, pick));
    a.iter()
        .filter(|(t, _)| **t >= REALTIME_START)
        .filter_map(|(t, &av)| {
            let ev = e[t];
            let ok = if higher_is_better { ev >= av - EPS } else { ev <= av + EPS };
            (!ok).then(|| format!("{t}: eaodv {ev:.3} aodv {av:.3}"))
        })
        .collect()
}

fn pre_start_nonzero(runs: &Runs, pick: fn((f64, f64, Option<f64>)) -> f64) -> usize {
    runs.aodv
        .iter()
        .chain(&runs.eaodv)
        .flat_map(realtime_series)
        .filter(|(t, v)| *t + manetsim::SimDuration::from_secs(10) <= REALTIME_START && pick(*v) != 0.0)
        .count()
}

fn throughput(v: (f64, f64, Option<f64>)) -> f64 {
    v.0
}

fn loss(v: (f64, f64, Option<f64>)) -> f64 {
    v.1
}

fn ratio(v: (f64, f64, Option<f64>)) -> f64 {
    v.2.unwrap_or(0.0)
}

fn with_violations(pass: bool, head: String, v: &[String]) -> Verdict {
    if v.is_empty() {
        verdict(pass, head)
    } else {
        verdict(pass, format!("{head}; violations: {}", v.join(", ")))
    }
}

fn criterion_1(runs: &Runs) -> Verdict {
    let violations = ordering_violations(runs, throughput, true);
    let improved_seeds = runs
        .aodv
        .iter()
        .zip(&runs.eaodv)
        .filter(|(a, e)| {
            let (a, e) = (realtime_series(a), realtime_series(e));
            a.iter().any(|(t, av)| *t >= REALTIME_START && e[t].0 > av.0 + EPS)
        })
        .count();
    let pre = pre_start_nonzero(runs, throughput);
    let majority = improved_seeds * 2 > runs.aodv.len();
    let fast = runs.slowest < Duration::from_secs(10);
    with_violations(
        violations.is_empty() && majority && pre == 0 && fast,
        format!(
            "seeds with a strict improvement {improved_seeds}/{}, non-zero pre-start intervals {pre}, slowest run {:.3}s",
            runs.aodv.len(),
            runs.slowest.as_secs_f64()
        ),
        &violations,
    )
}

fn criterion_2(runs: &Runs) -> Verdict {
    let violations = ordering_violations(runs, loss, false);
    let pre = pre_start_nonzero(runs, loss);
    with_violations(violations.is_empty() && pre == 0, format!("non-zero pre-start loss intervals {pre}"), &violations)
}

fn criterion_3(runs: &Runs) -> Verdict {
    let violations = ordering_violations(runs, ratio, true);
    with_violations(violations.is_empty(), "mean realtime delivery ratio per interval".into(), &violations)
}

fn criterion_4(all: &mut Vec<SimOutput>) -> Verdict {
    let mut slower = Vec::new();
    let mut refused = Vec::new();
    for seed in SEEDS {
        let a = run(&saturated_star(seed, Protocol::Aodv));
        let e = run(&saturated_star(seed, Protocol::Eaodv));
        let (la, le) = (a.route_latency.get(&STAR_CBR).copied(), e.route_latency.get(&STAR_CBR).copied());
        let ok = match (la, le) {
            (Some(la), Some(le)) => le < la,
            (None, Some(_)) => true,
            _ => false,
        };
        if !ok {
            slower.push(format!("seed {seed}: eaodv {le:?} aodv {la:?}"));
        }
        refused.push(
            a.records
                .iter()
                .filter(|r| r.action == TraceAction::Dropped && r.kind == PacketKind::Rreq)
                .filter(|r| r.reason == Some(DropReason::Queue) && r.src == STAR_WEST)
                .count(),
        );
        all.push(a);
        all.push(e);
    }
    let total: usize = refused.iter().sum();
    with_violations(
        slower.is_empty() && total > 0,
        format!("realtime requests refused for a full queue under aodv, per seed {refused:?}"),
        &slower,
    )
}

fn criterion_5(runs: &Runs) -> Verdict {
    let counts: Vec<usize> = runs.eaodv.iter().map(|o| normal_deliveries_after(&o.records, REALTIME_START)).collect();
    verdict(counts.iter().all(|&c| c == 0), format!("normal deliveries after session start per seed {counts:?}"))
}

fn criterion_6() -> Verdict {
    let mut bad = Vec::new();
    for k in 0..100 {
        let case = static_case(k);
        let got = installed_hops(&case);
        if got != Some(case.expected_hops) {
            bad.push(format!("case {k}: bfs {} installed {got:?}", case.expected_hops));
        }
    }
    with_violations(bad.is_empty(), format!("{}/100 topologies match", 100 - bad.len()), &bad)
}

fn criterion_7() -> Verdict {
    let mut bad = Vec::new();
    let mut checks = 0;
    for i in 0..100 {
        match check_routing_invariants(mobile_case(i)) {
            Ok(c) => checks += c,
            Err(e) => bad.push(format!("run {i}: {e}")),
        }
    }
    with_violations(bad.is_empty(), format!("100 mobile runs, {checks} table snapshots"), &bad)
}

fn criterion_8(all: &[SimOutput]) -> Verdict {
    let bad: Vec<String> = all
        .iter()
        .enumerate()
        .filter(|(_, o)| {
            let flight = [o.conservation.realtime.in_flight, o.conservation.normal.in_flight];
            !o.conservation.holds() || Conservation::from_trace(&o.records, flight) != o.conservation
        })
        .map(|(i, o)| format!("run {i}: {:?}", o.conservation))
        .collect();
    with_violations(bad.is_empty(), format!("{} runs checked per class and in total", all.len()), &bad)
}

fn criterion_9(all: &mut Vec<SimOutput>) -> Verdict {
    let mut bad = Vec::new();
    for seed in SEEDS {
        let mut sc = Scenario::default().with_seed(seed);
        sc.flows.retain(|f| f.kind != FlowKind::CbrUdp);
        let a = run(&sc.with_protocol(Protocol::Aodv));
        let e = run(&sc.with_protocol(Protocol::Eaodv));
        if a.trace_text() != e.trace_text() {
            bad.push(format!("seed {seed}"));
        }
        all.push(a);
        all.push(e);
    }
    with_violations(bad.is_empty(), "traces compared byte for byte".into(), &bad)
}

fn criterion_10(runs: &Runs) -> Verdict {
    let mut bad = Vec::new();
    for (i, seed) in SEEDS.enumerate() {
        for (protocol, first) in [(Protocol::Aodv, &runs.aodv[i]), (Protocol::Eaodv, &runs.eaodv[i])] {
            let again = run(&Scenario::default().with_seed(seed).with_protocol(protocol));
            if again.trace_text() != first.trace_text() || again.trace_sha256 != first.trace_sha256 {
                bad.push(format!("seed {seed} {protocol}"));
            }
        }
    }
    with_violations(bad.is_empty(), "every default run repeated".into(), &bad)
}

fn main() {
    let runs = default_runs();
    let mut extra = Vec::new();
    let c4 = criterion_4(&mut extra);
    let c9 = criterion_9(&mut extra);
    let all: Vec<SimOutput> = runs.aodv.iter().chain(&runs.eaodv).cloned().chain(extra).collect();
    let results = [
        ("realtime throughput ordering", criterion_1(&runs)),
        ("realtime loss ordering", criterion_2(&runs)),
        ("realtime delivery ratio ordering", criterion_3(&runs)),
        ("discovery delay under saturated queues", c4),
        ("no normal deliveries during the session", criterion_5(&runs)),
        ("shortest path oracle", criterion_6()),
        ("loop freedom and sequence monotonicity", criterion_7()),
        ("conservation identity", criterion_8(&all)),
        ("equivalence without realtime traffic", c9),
        ("determinism", criterion_10(&runs)),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("{} criterion {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
