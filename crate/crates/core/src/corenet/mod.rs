//! Crossbar cores, the tiling compiler for the flow network, its validator
//! and the tick-synchronous fabric simulator.
//!
//! A core has up to 256 axons, a binary crossbar and up to 256 neurons.
//! Every axon carries one of four axon types; each neuron decides per type
//! whether a synapse is excitatory or inhibitory (`exc_types` bitmask).
//! Each neuron routes its output to at most one axon anywhere in the
//! network; fan-out happens only through a crossbar.

mod compile;
mod sim;
mod spikelog;
mod validate;

pub use compile::{compile_flow_network, neurons_per_core, Tiling, DS_LATENCY_TICKS};
pub use sim::{simulate, PopulationFilter, SimError, SimOptions, Simulator};
pub use spikelog::{read_spike_log, write_spike_log, SpikeLog, SpikeLogError};
pub use validate::{validate, CoreUsage, ResourceSummary, ValidationReport, Violation};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aer::RelayMap;
use crate::events::SensorGeometry;
use crate::neuron::NeuronConfig;
use crate::scalar::Potential;

pub const CORE_AXONS: usize = 256;
pub const CORE_NEURONS: usize = 256;
pub const AXON_TYPES: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoreCoord {
    pub x: u16,
    pub y: u16,
}

impl CoreCoord {
    pub fn new(x: u16, y: u16) -> Self {
        CoreCoord { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreKind {
    Relay,
    Flow,
}

/// Preferred motion direction of a direction-selective neuron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::PosX, Direction::NegX, Direction::PosY, Direction::NegY];

    pub fn offset(self) -> (i64, i64) {
        match self {
            Direction::PosX => (1, 0),
            Direction::NegX => (-1, 0),
            Direction::PosY => (0, 1),
            Direction::NegY => (0, -1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Population {
    Relay,
    Input,
    Delay,
    Ds(Direction),
}

impl Population {
    pub fn is_ds(self) -> bool {
        matches!(self, Population::Ds(_))
    }

    fn bit(self) -> u8 {
        match self {
            Population::Relay => 1,
            Population::Input => 2,
            Population::Delay => 4,
            Population::Ds(_) => 8,
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Population::Relay => "relay",
            Population::Input => "input",
            Population::Delay => "delay",
            Population::Ds(Direction::PosX) => "ds+x",
            Population::Ds(Direction::NegX) => "ds-x",
            Population::Ds(Direction::PosY) => "ds+y",
            Population::Ds(Direction::NegY) => "ds-y",
        })
    }
}

impl FromStr for Population {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "relay" => Population::Relay,
            "input" => Population::Input,
            "delay" => Population::Delay,
            "ds+x" => Population::Ds(Direction::PosX),
            "ds-x" => Population::Ds(Direction::NegX),
            "ds+y" => Population::Ds(Direction::PosY),
            "ds-y" => Population::Ds(Direction::NegY),
            other => return Err(format!("unknown population `{other}`")),
        })
    }
}

/// What a neuron slot computes and for which pixel. `pixel` is `None` for
/// template slots whose pixel falls outside the sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeuronRole {
    pub population: Population,
    pub pixel: Option<(u32, u32)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AxonRef {
    pub core: u32,
    pub axon: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronRef {
    pub core: u32,
    pub neuron: u16,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axon {
    /// Neuron routed to this axon; `None` for sensor-driven axons and
    /// unused template axons.
    pub source: Option<NeuronRef>,
    pub axon_type: u8,
    /// Crossbar row: neurons this axon synapses onto.
    pub targets: Vec<u16>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronSlot {
    /// Index into [`NetworkSpec::configs`].
    pub config: u8,
    pub role: NeuronRole,
    /// Bit `g` set: synapses from type-`g` axons are excitatory.
    pub exc_types: u8,
    pub target: Option<AxonRef>,
}

impl NeuronSlot {
    pub fn is_excitatory(&self, axon_type: u8) -> bool {
        self.exc_types & (1 << axon_type) != 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreSpec {
    pub coord: CoreCoord,
    pub kind: CoreKind,
    pub axons: Vec<Axon>,
    pub neurons: Vec<NeuronSlot>,
}

impl CoreSpec {
    pub fn crossbar(&self, axon: usize, neuron: usize) -> bool {
        self.axons.get(axon).is_some_and(|a| a.targets.contains(&(neuron as u16)))
    }

    pub fn used_axons(&self) -> usize {
        self.axons.iter().filter(|a| !a.targets.is_empty()).count()
    }
}

/// Neurons serving one pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelNeurons {
    pub relay: Option<NeuronRef>,
    pub input: Option<NeuronRef>,
    pub delay: Option<NeuronRef>,
    pub ds: [Option<NeuronRef>; 4],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "P: Potential")]
pub struct NetworkSpec<P> {
    pub geometry: SensorGeometry,
    pub tiling: Tiling,
    pub tau_r: u32,
    pub tau_d: u32,
    pub relay: RelayMap,
    /// Flow-core grid size in cores.
    pub flow_grid: (u16, u16),
    pub configs: Vec<NeuronConfig<P>>,
    pub cores: Vec<CoreSpec>,
    #[serde(skip)]
    pixels: Vec<PixelNeurons>,
}

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("placement file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl<P: Potential> NetworkSpec<P> {
    pub fn flow_cores(&self) -> impl Iterator<Item = &CoreSpec> {
        self.cores.iter().filter(|c| c.kind == CoreKind::Flow)
    }

    pub fn relay_cores(&self) -> impl Iterator<Item = &CoreSpec> {
        self.cores.iter().filter(|c| c.kind == CoreKind::Relay)
    }

    pub fn neuron(&self, r: NeuronRef) -> Option<&NeuronSlot> {
        self.cores.get(r.core as usize)?.neurons.get(r.neuron as usize)
    }

    pub fn config_of(&self, slot: &NeuronSlot) -> &NeuronConfig<P> {
        &self.configs[slot.config as usize]
    }

    pub fn pixel(&self, x: u32, y: u32) -> Option<&PixelNeurons> {
        if !self.geometry.contains(x as i64, y as i64) {
            return None;
        }
        self.pixels.get((y * self.geometry.width + x) as usize)
    }

    /// Rebuilds the pixel index from neuron roles. Called after compiling
    /// and after loading a placement file.
    pub fn reindex(&mut self) {
        let w = self.geometry.width;
        let mut pixels = vec![PixelNeurons::default(); self.geometry.pixel_count()];
        for (ci, core) in self.cores.iter().enumerate() {
            for (ni, slot) in core.neurons.iter().enumerate() {
                let Some((x, y)) = slot.role.pixel else { continue };
                let r = NeuronRef { core: ci as u32, neuron: ni as u16 };
                let entry = &mut pixels[(y * w + x) as usize];
                match slot.role.population {
                    Population::Relay => {
                        entry.relay.get_or_insert(r);
                    }
                    // boundary copies share the pixel; keep the local one
                    Population::Input => {
                        if slot.target.is_some_and(|t| t.core == ci as u32) || entry.input.is_none() {
                            entry.input = Some(r);
                        }
                    }
                    Population::Delay => {
                        if slot.target.is_some_and(|t| t.core == ci as u32) || entry.delay.is_none() {
                            entry.delay = Some(r);
                        }
                    }
                    Population::Ds(d) => entry.ds[d.index()] = Some(r),
                }
            }
        }
        self.pixels = pixels;
    }

    pub fn to_json(&self) -> Result<String, PlacementError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PlacementError> {
        let mut spec: NetworkSpec<P> = serde_json::from_str(text)?;
        spec.reindex();
        Ok(spec)
    }
}

/// Global identity of a spiking neuron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub core: u32,
    pub index: u16,
    pub population: Population,
    pub pixel: Option<(u32, u32)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub neuron: NeuronId,
    pub tick: u32,
}
