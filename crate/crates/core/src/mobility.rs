//! Random waypoint mobility and disc-model connectivity.
//!
//! Trajectories are generated up front from the mobility stream, one node at a
//! time, so they never depend on what the routing layer does during a run.
//! Positions are interpolated on demand from the stored legs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::engine::{EngineError, RandomStream};
use crate::num::Scalar;
use crate::time::{SimDuration, SimTime};
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("in_range called with identical endpoints {0}")]
    SameNode(NodeId),
    #[error(transparent)]
    Random(#[from] EngineError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at fraction `frac` of the segment from `self` to `to`.
    pub fn lerp(&self, to: &Position<T>, frac: T) -> Position<T> {
        Position {
            x: self.x + (to.x - self.x) * frac,
            y: self.y + (to.y - self.y) * frac,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Area<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> Area<T> {
    pub fn contains(&self, p: &Position<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= self.width && p.y <= self.height
    }
}

/// Fixed-range radio: two nodes hear each other iff their distance is at most
/// `range` (closed disc).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioModel<T> {
    range: T,
}

impl<T: Scalar> RadioModel<T> {
    pub fn new(range: T) -> Option<Self> {
        (range > T::zero() && range.is_finite()).then_some(RadioModel { range })
    }

    pub fn range(&self) -> T {
        self.range
    }

    pub fn connected(&self, a: &Position<T>, b: &Position<T>) -> bool {
        a.distance(b) <= self.range
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityConfig<T> {
    pub area: Area<T>,
    pub speed_min: T,
    pub speed_max: T,
    /// Seconds spent at each waypoint. Infinite means the node stops after its first leg.
    pub pause_duration: T,
}

/// Instantaneous random-waypoint state of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaypointState<T> {
    pub current: Position<T>,
    pub target: Position<T>,
    pub speed: T,
    pub paused_until: SimTime,
    pub pause_duration: T,
}

/// One movement segment followed by a pause at its end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg<T> {
    pub depart: SimTime,
    pub from: Position<T>,
    pub to: Position<T>,
    pub speed: T,
    pub arrive: SimTime,
    pub pause_until: SimTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    start: Position<T>,
    legs: Vec<Leg<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn stationary(at: Position<T>) -> Self {
        Trajectory { start: at, legs: Vec::new() }
    }

    /// Builds a trajectory from explicit legs; legs must be contiguous and time-ordered.
    pub fn from_legs(start: Position<T>, legs: Vec<Leg<T>>) -> Self {
        debug_assert!(legs.windows(2).all(|w| w[0].pause_until <= w[1].depart));
        Trajectory { start, legs }
    }

    pub fn legs(&self) -> &[Leg<T>] {
        &self.legs
    }

    pub fn position_at(&self, t: SimTime) -> Position<T> {
        // Last leg that has departed by t.
        let idx = self.legs.partition_point(|leg| leg.depart <= t);
        if idx == 0 {
            return self.start;
        }
        let leg = &self.legs[idx - 1];
        if t >= leg.arrive {
            return leg.to;
        }
        let span = leg.arrive.since(leg.depart).as_micros() as f64;
        let done = t.since(leg.depart).as_micros() as f64;
        leg.from.lerp(&leg.to, T::lit(done / span))
    }

    pub fn state_at(&self, t: SimTime, pause_duration: T) -> WaypointState<T> {
        let idx = self.legs.partition_point(|leg| leg.depart <= t);
        let current = self.position_at(t);
        match idx.checked_sub(1).map(|i| &self.legs[i]) {
            None => WaypointState {
                current,
                target: current,
                speed: T::zero(),
                paused_until: self.legs.first().map_or(SimTime::MAX, |l| l.depart),
                pause_duration,
            },
            Some(leg) => WaypointState {
                current,
                target: leg.to,
                speed: leg.speed,
                paused_until: leg.pause_until,
                pause_duration,
            },
        }
    }

    /// Times at which the node reaches a waypoint.
    pub fn arrivals(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.legs.iter().map(|l| l.arrive)
    }
}

/// Positions of every node in a run.
#[derive(Clone, Debug)]
pub struct Mobility<T> {
    radio: RadioModel<T>,
    trajectories: Vec<Trajectory<T>>,
}

impl<T: Scalar> Mobility<T> {
    pub fn new(radio: RadioModel<T>, trajectories: Vec<Trajectory<T>>) -> Self {
        Mobility { radio, trajectories }
    }

    pub fn stationary(radio: RadioModel<T>, positions: &[Position<T>]) -> Self {
        Mobility {
            radio,
            trajectories: positions.iter().copied().map(Trajectory::stationary).collect(),
        }
    }

    /// Random waypoint trajectories up to `horizon`. `fixed_start[i]`, when
    /// present, replaces node i's drawn initial position.
    pub fn random_waypoint(
        radio: RadioModel<T>,
        config: &MobilityConfig<T>,
        fixed_start: &[Option<Position<T>>],
        node_count: usize,
        horizon: SimTime,
        rng: &mut RandomStream,
    ) -> Result<Self, MobilityError> {
        let mut trajectories = Vec::with_capacity(node_count);
        for node in 0..node_count {
            let drawn = draw_point(&config.area, rng)?;
            let start = fixed_start.get(node).copied().flatten().unwrap_or(drawn);
            trajectories.push(generate_legs(start, config, horizon, rng)?);
        }
        Ok(Mobility { radio, trajectories })
    }

    pub fn node_count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn radio(&self) -> &RadioModel<T> {
        &self.radio
    }

    pub fn trajectory(&self, node: NodeId) -> Result<&Trajectory<T>, MobilityError> {
        self.trajectories.get(node.index()).ok_or(MobilityError::UnknownNode(node))
    }

    pub fn position_at(&self, node: NodeId, t: SimTime) -> Result<Position<T>, MobilityError> {
        Ok(self.trajectory(node)?.position_at(t))
    }

    pub fn in_range(&self, a: NodeId, b: NodeId, t: SimTime) -> Result<bool, MobilityError> {
        if a == b {
            return Err(MobilityError::SameNode(a));
        }
        let pa = self.position_at(a, t)?;
        let pb = self.position_at(b, t)?;
        Ok(self.radio.connected(&pa, &pb))
    }

    pub fn neighbors(&self, node: NodeId, t: SimTime) -> Result<BTreeSet<NodeId>, MobilityError> {
        let here = self.position_at(node, t)?;
        Ok(self
            .trajectories
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != node.index())
            .filter(|(_, traj)| self.radio.connected(&here, &traj.position_at(t)))
            .map(|(i, _)| NodeId(i as u32))
            .collect())
    }
}

fn draw_point<T: Scalar>(area: &Area<T>, rng: &mut RandomStream) -> Result<Position<T>, EngineError> {
    let x = rng.uniform(0.0, area.width.to_f64_lossy())?;
    let y = rng.uniform(0.0, area.height.to_f64_lossy())?;
    Ok(Position::new(T::lit(x), T::lit(y)))
}

fn generate_legs<T: Scalar>(
    start: Position<T>,
    config: &MobilityConfig<T>,
    horizon: SimTime,
    rng: &mut RandomStream,
) -> Result<Trajectory<T>, MobilityError> {
    let mut legs = Vec::new();
    if config.speed_max <= T::zero() {
        return Ok(Trajectory::stationary(start));
    }
    let pause = if config.pause_duration.is_finite() {
        Some(SimDuration::from_secs_f64(config.pause_duration.to_f64_lossy()))
    } else {
        None
    };
    let mut here = start;
    let mut t = SimTime::ZERO;
    while t < horizon {
        let target = draw_point(&config.area, rng)?;
        let speed = T::lit(rng.uniform(config.speed_min.to_f64_lossy(), config.speed_max.to_f64_lossy())?);
        if speed <= T::zero() {
            break;
        }
        let travel = (here.distance(&target) / speed).to_f64_lossy();
        let arrive = t + SimDuration::from_secs_f64(travel);
        let pause_until = match pause {
            Some(p) => arrive + p,
            None => SimTime::MAX,
        };
        legs.push(Leg { depart: t, from: here, to: target, speed, arrive, pause_until });
        here = target;
        t = pause_until;
        if pause.is_none() {
            break;
        }
    }
    Ok(Trajectory::from_legs(start, legs))
}
