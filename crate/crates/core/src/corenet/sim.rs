//! Tick-synchronous fabric simulator.
//!
//! A spike emitted at tick `t` reaches its target axon at `t + 1`, inside
//! or across cores alike. Sensor events enter through the AER codec and land
//! on relay axons at their decoded delivery tick. Cores with no pending
//! input and every potential at rest are skipped; rest is a fixed point
//! because the leak is inert at zero and every threshold is positive.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use super::{CoreKind, NetworkSpec, NeuronId, Population, SpikeRecord};
use crate::aer::{decode_spike, encode_spike, AerError};
use crate::events::TickEvent;
use crate::neuron::{step, NeuronState, TickInput};
use crate::scalar::Potential;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event at ({x}, {y}) is outside the {width}x{height} sensor")]
    Pixel { x: u32, y: u32, width: u32, height: u32 },
    #[error("event tick {tick} is outside the simulated range 0..{horizon}")]
    Tick { tick: u32, horizon: u32 },
    #[error(transparent)]
    Aer(#[from] AerError),
}

/// Populations to record, as a bitmask over [`Population`] kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopulationFilter(u8);

impl PopulationFilter {
    pub const ALL: PopulationFilter = PopulationFilter(0x0F);
    pub const DS: PopulationFilter = PopulationFilter(0x08);
    pub const NONE: PopulationFilter = PopulationFilter(0);

    pub fn only(pops: &[Population]) -> Self {
        PopulationFilter(pops.iter().fold(0, |m, p| m | p.bit()))
    }

    pub fn accepts(self, p: Population) -> bool {
        self.0 & p.bit() != 0
    }
}

/// Records input, delay and DS spikes; relay copies are left out.
impl Default for PopulationFilter {
    fn default() -> Self {
        PopulationFilter(0x0E)
    }
}

impl FromStr for PopulationFilter {
    type Err = String;

    /// Comma-separated list of `relay`, `input`, `delay`, `ds`, or `all`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mask = 0;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            mask |= match part {
                "all" => 0x0F,
                "relay" => 0x01,
                "input" => 0x02,
                "delay" => 0x04,
                "ds" => 0x08,
                other => return Err(format!("unknown population `{other}`")),
            };
        }
        Ok(PopulationFilter(mask))
    }
}

impl fmt::Display for PopulationFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(0x01, "relay"), (0x02, "input"), (0x04, "delay"), (0x08, "ds")]
            .into_iter()
            .filter(|(b, _)| self.0 & b != 0)
            .map(|(_, n)| n)
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    /// Step cores on the rayon pool. Output is identical either way.
    pub parallel: bool,
    pub filter: PopulationFilter,
}

struct CoreState<P> {
    v: Vec<P>,
    /// Axons receiving a spike this tick.
    hits: Vec<u16>,
    live: bool,
    exc: Vec<u32>,
    inh: Vec<u32>,
}

pub struct Simulator<'a, P> {
    spec: &'a NetworkSpec<P>,
    cores: Vec<CoreState<P>>,
    /// Sensor deliveries keyed by tick: (relay core index, axon).
    pending: BTreeMap<u32, Vec<(u32, u16)>>,
    tick: u32,
    options: SimOptions,
}

impl<'a, P: Potential> Simulator<'a, P> {
    pub fn new(spec: &'a NetworkSpec<P>, options: SimOptions) -> Self {
        let cores = spec
            .cores
            .iter()
            .map(|c| CoreState {
                v: vec![P::zero(); c.neurons.len()],
                hits: Vec::new(),
                live: false,
                exc: vec![0; c.neurons.len()],
                inh: vec![0; c.neurons.len()],
            })
            .collect();
        Simulator { spec, cores, pending: BTreeMap::new(), tick: 0, options }
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    /// Queues sensor events through the AER link. Polarity is ignored.
    pub fn ingest(&mut self, events: &[TickEvent], horizon: u32) -> Result<(), SimError> {
        let g = self.spec.geometry;
        let map = &self.spec.relay;
        for e in events {
            if e.x >= g.width || e.y >= g.height {
                return Err(SimError::Pixel { x: e.x, y: e.y, width: g.width, height: g.height });
            }
            if e.tick >= horizon || e.tick < self.tick {
                return Err(SimError::Tick { tick: e.tick, horizon });
            }
            let word = encode_spike(e.tick, (e.x, e.y), map)?;
            let d = decode_spike(word, map.origin, e.tick);
            let core = map.core_index(d.core) as u32;
            debug_assert_eq!(self.spec.cores[core as usize].kind, CoreKind::Relay);
            self.pending.entry(d.deliver_tick).or_default().push((core, d.axon as u16));
        }
        Ok(())
    }

    /// Advances one tick and returns the recorded spikes emitted during it.
    pub fn step_tick(&mut self) -> Vec<SpikeRecord> {
        let t = self.tick;
        if let Some(list) = self.pending.remove(&t) {
            for (core, axon) in list {
                let c = &mut self.cores[core as usize];
                c.hits.push(axon);
            }
        }
        let spec = self.spec;
        let run = |(ci, c): (usize, &mut CoreState<P>)| -> Vec<u16> {
            if c.hits.is_empty() && !c.live {
                return Vec::new();
            }
            step_core(spec, ci, c)
        };
        let fired: Vec<Vec<u16>> = if self.options.parallel {
            self.cores.par_iter_mut().enumerate().map(run).collect()
        } else {
            self.cores.iter_mut().enumerate().map(run).collect()
        };

        let mut out = Vec::new();
        for (ci, neurons) in fired.into_iter().enumerate() {
            for n in neurons {
                let slot = &spec.cores[ci].neurons[n as usize];
                if self.options.filter.accepts(slot.role.population) {
                    out.push(SpikeRecord {
                        neuron: NeuronId { core: ci as u32, index: n, population: slot.role.population, pixel: slot.role.pixel },
                        tick: t,
                    });
                }
                if let Some(target) = slot.target {
                    self.cores[target.core as usize].hits.push(target.axon);
                }
            }
        }
        self.tick += 1;
        out
    }

    pub fn run_until(&mut self, horizon: u32) -> Vec<SpikeRecord> {
        let mut out = Vec::new();
        while self.tick < horizon {
            out.extend(self.step_tick());
        }
        out
    }
}

/// Steps every neuron of one core. Spikes routed here during the previous
/// tick are in `c.hits`; they are consumed.
fn step_core<P: Potential>(spec: &NetworkSpec<P>, ci: usize, c: &mut CoreState<P>) -> Vec<u16> {
    let core = &spec.cores[ci];
    for &a in &c.hits {
        let axon = &core.axons[a as usize];
        for &n in &axon.targets {
            if core.neurons[n as usize].is_excitatory(axon.axon_type) {
                c.exc[n as usize] += 1;
            } else {
                c.inh[n as usize] += 1;
            }
        }
    }
    c.hits.clear();
    let mut fired = Vec::new();
    let mut live = false;
    for (n, slot) in core.neurons.iter().enumerate() {
        let input = TickInput { n_exc: c.exc[n], n_inh: c.inh[n] };
        c.exc[n] = 0;
        c.inh[n] = 0;
        let v = c.v[n];
        if v == P::zero() && input.n_exc == 0 && input.n_inh == 0 {
            continue;
        }
        let (s, spiked) = step(NeuronState::at(v), spec.config_of(slot), input);
        c.v[n] = s.v;
        live |= s.v != P::zero();
        if spiked {
            fired.push(n as u16);
        }
    }
    c.live = live;
    fired
}

/// Runs `events` through `spec` for ticks `0..horizon`.
pub fn simulate<P: Potential>(
    spec: &NetworkSpec<P>,
    events: &[TickEvent],
    horizon: u32,
    options: SimOptions,
) -> Result<Vec<SpikeRecord>, SimError> {
    let mut sim = Simulator::new(spec, options);
    sim.ingest(events, horizon)?;
    Ok(sim.run_until(horizon))
}
