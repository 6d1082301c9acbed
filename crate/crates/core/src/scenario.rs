//! Scenario description and its `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! node_count = 10
//! sim_time = 150
//! protocol = eaodv
//! seed = 7
//!
//! [flow]
//! source = 5
//! destination = 8
//! kind = cbr
//! start = 60
//!
//! [node]
//! id = 0
//! x = 100
//! y = 250
//! ```
//!
//! Top-level keys must come before the first section. Any `[flow]` section
//! replaces the default flow table; `[node]` sections pin a node's initial
//! position.

use std::collections::HashSet;

use thiserror::Error;

use crate::aodv::AodvParams;
use crate::eaodv::{ExpiryScope, Protocol};
use crate::metrics::AbsentRatio;
use crate::mobility::{Area, MobilityConfig};
use crate::queue::DEFAULT_IFQ_CAPACITY;
use crate::time::{SimDuration, SimTime};
use crate::traffic::{FlowKind, FlowSpec, DEFAULT_CBR_RATE, DEFAULT_PACKET_SIZE};
use crate::{FlowId, NodeId, Position};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub node_count: usize,
    pub sim_time: SimTime,
    pub area: Area<f64>,
    pub radio_range: f64,
    pub protocol: Protocol,
    pub seed: u64,
    pub flows: Vec<FlowSpec>,
    pub mobility: MobilityConfig<f64>,
    /// Initial positions overriding the random draw, indexed by node id.
    pub fixed_positions: Vec<Option<Position>>,
    pub metrics_interval: SimDuration,
    pub queue_capacity: usize,
    pub hop_latency: SimDuration,
    /// Upper bound of the uniform per-hop jitter.
    pub jitter: SimDuration,
    pub expiry_scope: ExpiryScope,
    pub absent_ratio: AbsentRatio,
    pub aodv: AodvParams,
}

pub fn default_flows() -> Vec<FlowSpec> {
    let flow = |id, src, dst, kind, start| FlowSpec {
        id: FlowId(id),
        source: NodeId(src),
        destination: NodeId(dst),
        kind,
        start_time: SimTime::from_secs(start),
        stop_time: None,
        packet_size: DEFAULT_PACKET_SIZE,
        rate: DEFAULT_CBR_RATE,
    };
    vec![
        flow(0, 1, 3, FlowKind::TcpLike, 5),
        flow(1, 4, 7, FlowKind::TcpLike, 35),
        flow(2, 5, 8, FlowKind::CbrUdp, 60),
    ]
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            node_count: 10,
            sim_time: SimTime::from_secs(150),
            area: Area { width: 1000.0, height: 1000.0 },
            radio_range: 250.0,
            protocol: Protocol::Aodv,
            seed: 1,
            flows: default_flows(),
            mobility: MobilityConfig {
                area: Area { width: 1000.0, height: 1000.0 },
                speed_min: 1.0,
                speed_max: 10.0,
                pause_duration: 10.0,
            },
            fixed_positions: Vec::new(),
            metrics_interval: SimDuration::from_secs(10),
            queue_capacity: DEFAULT_IFQ_CAPACITY,
            hop_latency: SimDuration::from_millis(2),
            jitter: SimDuration::from_millis(1),
            expiry_scope: ExpiryScope::Network,
            absent_ratio: AbsentRatio::Zero,
            aodv: AodvParams::default(),
        }
    }
}

impl Scenario {
    pub fn with_protocol(&self, protocol: Protocol) -> Scenario {
        Scenario { protocol, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.clone() }
    }

    /// Checks the structural invariants. The horizon check is separate: see
    /// [`validate_horizon`](Self::validate_horizon).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        if self.node_count == 0 {
            return bad("node_count must be positive".into());
        }
        if !(self.radio_range > 0.0 && self.radio_range.is_finite()) {
            return bad(format!("radio_range must be positive, got {}", self.radio_range));
        }
        if !(self.area.width > 0.0 && self.area.height > 0.0) {
            return bad("area dimensions must be positive".into());
        }
        let m = &self.mobility;
        if !(m.speed_min >= 0.0 && m.speed_min <= m.speed_max && m.speed_max.is_finite()) {
            return bad(format!("speed range [{}, {}] is invalid", m.speed_min, m.speed_max));
        }
        if !(m.pause_duration >= 0.0) {
            return bad("pause_duration must be non-negative".into());
        }
        if self.metrics_interval == SimDuration::ZERO {
            return bad("metrics_interval must be positive".into());
        }
        if self.queue_capacity == 0 {
            return bad("queue_capacity must be positive".into());
        }
        if self.fixed_positions.len() > self.node_count {
            return bad("node section refers to a node id outside node_count".into());
        }
        for (i, p) in self.fixed_positions.iter().enumerate() {
            if let Some(p) = p {
                if !self.area.contains(p) {
                    return bad(format!("node {i} position ({}, {}) lies outside the area", p.x, p.y));
                }
            }
        }
        let mut ids = HashSet::new();
        for f in &self.flows {
            if !ids.insert(f.id) {
                return bad(format!("duplicate flow id {}", f.id));
            }
            for n in [f.source, f.destination] {
                if n.index() >= self.node_count {
                    return bad(format!("flow {} references node {n} but node_count is {}", f.id, self.node_count));
                }
            }
            if f.source == f.destination {
                return bad(format!("flow {} has source equal to destination", f.id));
            }
            if f.packet_size == 0 {
                return bad(format!("flow {} has zero packet size", f.id));
            }
            if f.kind == FlowKind::CbrUdp && !(f.rate > 0.0 && f.rate.is_finite()) {
                return bad(format!("flow {} needs a positive rate", f.id));
            }
            if f.stop_time.is_some_and(|s| s <= f.start_time) {
                return bad(format!("flow {} stops before it starts", f.id));
            }
        }
        Ok(())
    }

    /// The simulated horizon must extend past every flow start.
    pub fn validate_horizon(&self) -> Result<(), ScenarioError> {
        if let Some(f) = self.flows.iter().find(|f| f.start_time >= self.sim_time) {
            return Err(ScenarioError::Validation(format!(
                "sim_time {} does not exceed flow {} start {}",
                self.sim_time, f.id, f.start_time
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Top,
    Flow,
    Node,
}

#[derive(Default)]
struct FlowDraft {
    line: usize,
    source: Option<u32>,
    destination: Option<u32>,
    kind: Option<FlowKind>,
    start: Option<SimTime>,
    stop: Option<SimTime>,
    rate: Option<f64>,
    size: Option<u32>,
}

#[derive(Default)]
struct NodeDraft {
    line: usize,
    id: Option<usize>,
    x: Option<f64>,
    y: Option<f64>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ScenarioError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ScenarioError::Parse { line, message: format!("bad value for `{key}`: {e}") })
}

fn parse_secs(line: usize, key: &str, v: &str) -> Result<f64, ScenarioError> {
    let s: f64 = parse_value(line, key, v)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(ScenarioError::Parse { line, message: format!("`{key}` must be a non-negative number of seconds") });
    }
    Ok(s)
}

fn parse_time(line: usize, key: &str, v: &str) -> Result<SimTime, ScenarioError> {
    parse_secs(line, key, v).map(SimTime::from_secs_f64)
}

fn parse_duration(line: usize, key: &str, v: &str) -> Result<SimDuration, ScenarioError> {
    parse_secs(line, key, v).map(|s| SimDuration::from_micros((s * 1e6).round() as u64))
}

fn parse_millis(line: usize, key: &str, v: &str) -> Result<SimDuration, ScenarioError> {
    parse_secs(line, key, v).map(|ms| SimDuration::from_micros((ms * 1e3).round() as u64))
}

/// Parses and validates a scenario file. Absent keys keep their defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    let mut section = Section::Top;
    let mut flows: Vec<FlowDraft> = Vec::new();
    let mut nodes: Vec<NodeDraft> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |message: String| ScenarioError::Parse { line, message };
        if content.starts_with('[') {
            section = match content {
                "[flow]" => {
                    flows.push(FlowDraft { line, ..Default::default() });
                    Section::Flow
                }
                "[node]" => {
                    nodes.push(NodeDraft { line, ..Default::default() });
                    Section::Node
                }
                other => return Err(perr(format!("unknown section `{other}`"))),
            };
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(perr(format!("expected `key = value`, found `{content}`")));
        };
        let (key, v) = (key.trim(), value.trim());
        match section {
            Section::Top => match key {
                "node_count" => sc.node_count = parse_value(line, key, v)?,
                "sim_time" => sc.sim_time = parse_time(line, key, v)?,
                "area" => {
                    let (w, h) = v
                        .split_once(['x', ','])
                        .ok_or_else(|| perr("`area` expects `<width>x<height>`".into()))?;
                    sc.area.width = parse_value(line, key, w.trim())?;
                    sc.area.height = parse_value(line, key, h.trim())?;
                }
                "area_width" => sc.area.width = parse_value(line, key, v)?,
                "area_height" => sc.area.height = parse_value(line, key, v)?,
                "radio_range" => sc.radio_range = parse_value(line, key, v)?,
                "protocol" => sc.protocol = v.parse().map_err(perr)?,
                "seed" => sc.seed = parse_value(line, key, v)?,
                "speed_min" => sc.mobility.speed_min = parse_value(line, key, v)?,
                "speed_max" => sc.mobility.speed_max = parse_value(line, key, v)?,
                "pause_duration" | "pause_time" => sc.mobility.pause_duration = parse_value(line, key, v)?,
                "metrics_interval" => sc.metrics_interval = parse_duration(line, key, v)?,
                "queue_capacity" => sc.queue_capacity = parse_value(line, key, v)?,
                "hop_latency_ms" => sc.hop_latency = parse_millis(line, key, v)?,
                "jitter_ms" => sc.jitter = parse_millis(line, key, v)?,
                "expiry_scope" => sc.expiry_scope = v.parse().map_err(perr)?,
                "absent_ratio" => sc.absent_ratio = v.parse().map_err(perr)?,
                _ => return Err(perr(format!("unknown key `{key}`"))),
            },
            Section::Flow => {
                let f = flows.last_mut().expect("inside a flow section");
                match key {
                    "source" => f.source = Some(parse_value(line, key, v)?),
                    "destination" => f.destination = Some(parse_value(line, key, v)?),
                    "kind" | "type" => f.kind = Some(v.parse().map_err(perr)?),
                    "start" => f.start = Some(parse_time(line, key, v)?),
                    "stop" => f.stop = Some(parse_time(line, key, v)?),
                    "rate" => f.rate = Some(parse_value(line, key, v)?),
                    "size" => f.size = Some(parse_value(line, key, v)?),
                    _ => return Err(perr(format!("unknown flow key `{key}`"))),
                }
            }
            Section::Node => {
                let n = nodes.last_mut().expect("inside a node section");
                match key {
                    "id" => n.id = Some(parse_value(line, key, v)?),
                    "x" => n.x = Some(parse_value(line, key, v)?),
                    "y" => n.y = Some(parse_value(line, key, v)?),
                    _ => return Err(perr(format!("unknown node key `{key}`"))),
                }
            }
        }
    }
    sc.mobility.area = sc.area;

    if !flows.is_empty() {
        sc.flows = Vec::with_capacity(flows.len());
        for (i, d) in flows.into_iter().enumerate() {
            let missing = |what: &str| ScenarioError::Parse { line: d.line, message: format!("flow section lacks `{what}`") };
            sc.flows.push(FlowSpec {
                id: FlowId(i as u32),
                source: NodeId(d.source.ok_or_else(|| missing("source"))?),
                destination: NodeId(d.destination.ok_or_else(|| missing("destination"))?),
                kind: d.kind.ok_or_else(|| missing("kind"))?,
                start_time: d.start.ok_or_else(|| missing("start"))?,
                stop_time: d.stop,
                packet_size: d.size.unwrap_or(DEFAULT_PACKET_SIZE),
                rate: d.rate.unwrap_or(DEFAULT_CBR_RATE),
            });
        }
    }
    for d in nodes {
        let missing = |what: &str| ScenarioError::Parse { line: d.line, message: format!("node section lacks `{what}`") };
        let id = d.id.ok_or_else(|| missing("id"))?;
        let pos = Position::new(d.x.ok_or_else(|| missing("x"))?, d.y.ok_or_else(|| missing("y"))?);
        if id >= sc.node_count {
            return Err(ScenarioError::Validation(format!(
                "node section for id {id} but node_count is {}",
                sc.node_count
            )));
        }
        if sc.fixed_positions.len() <= id {
            sc.fixed_positions.resize(id + 1, None);
        }
        sc.fixed_positions[id] = Some(pos);
    }

    sc.validate()?;
    sc.validate_horizon()?;
    Ok(sc)
}
