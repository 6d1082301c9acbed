//! Discrete-event simulation of a mobile ad-hoc network running AODV, and an
//! AODV variant that gives realtime traffic priority during route discovery.
//!
//! The crate is organised bottom-up:
//!
//! * [`engine`]: clock, event queue, named random streams
//! * [`mobility`]: random waypoint trajectories and disc connectivity
//! * [`aodv`] / [`eaodv`]: per-node routing state machines
//! * [`queue`] / [`traffic`] / [`packet`]: interface queues and traffic sources
//! * [`trace`] / [`metrics`]: event trace and interval metrics
//! * [`scenario`] / [`sim`] / [`harness`]: scenario files, runs and comparisons
//!
//! Geometry is generic over the float type; [`Position`] and friends are the
//! `f64` instantiations the simulator uses.

use std::fmt;

pub mod aodv;
pub mod eaodv;
pub mod engine;
pub mod harness;
pub mod mobility;
pub mod metrics;
pub mod num;
pub mod packet;
pub mod queue;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod trace;
pub mod traffic;

pub use eaodv::Protocol;
pub use harness::{compare, run, ComparisonReport, RunSummary};
pub use packet::PacketPriority;
pub use scenario::{parse_scenario, Scenario};
pub use time::{SimDuration, SimTime};

pub type Position = mobility::Position<f64>;
pub type Position32 = mobility::Position<f32>;
pub type RadioModel = mobility::RadioModel<f64>;
pub type RadioModel32 = mobility::RadioModel<f32>;
pub type Mobility = mobility::Mobility<f64>;
pub type Mobility32 = mobility::Mobility<f32>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
