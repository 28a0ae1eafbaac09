#![allow(dead_code)]

use spikeflow::corenet::{compile_flow_network, simulate, Direction, NetworkSpec, PopulationFilter, SimOptions, SpikeRecord};
use spikeflow::decode::{extract_bursts, Burst};
use spikeflow::events::TickEvent;
use spikeflow::{SensorGeometry, Tiling};

pub const TAU_R: u32 = 60;
pub const TAU_D: u32 = 50;

pub fn network(width: u32, height: u32) -> NetworkSpec<i32> {
    compile_flow_network(SensorGeometry::new(width, height).unwrap(), Tiling::default(), TAU_R, TAU_D).unwrap()
}

pub fn run(spec: &NetworkSpec<i32>, events: &[TickEvent], horizon: u32, filter: PopulationFilter) -> Vec<SpikeRecord> {
    let mut events = events.to_vec();
    events.sort();
    simulate(spec, &events, horizon, SimOptions { parallel: false, filter }).unwrap()
}

pub fn ev(x: u32, y: u32, tick: u32) -> TickEvent {
    TickEvent { x, y, tick }
}

/// Bursts produced when an edge reaches `p` at `t0` and `q` at `t0 + delta`.
pub fn two_pixel(spec: &NetworkSpec<i32>, p: (u32, u32), q: (u32, u32), delta: u32) -> (Vec<Burst>, Vec<SpikeRecord>) {
    let t0 = 10;
    let horizon = t0 + delta + 3 * TAU_R;
    let spikes = run(spec, &[ev(p.0, p.1, t0), ev(q.0, q.1, t0 + delta)], horizon, PopulationFilter::DS);
    (extract_bursts(&spikes, horizon), spikes)
}

pub fn neighbour(p: (u32, u32), d: Direction) -> (u32, u32) {
    let (dx, dy) = d.offset();
    ((p.0 as i64 + dx) as u32, (p.1 as i64 + dy) as u32)
}

pub fn opposite(d: Direction) -> Direction {
    match d {
        Direction::PosX => Direction::NegX,
        Direction::NegX => Direction::PosX,
        Direction::PosY => Direction::NegY,
        Direction::NegY => Direction::PosY,
    }
}
