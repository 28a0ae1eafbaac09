//! Tiling compiler for the optical-flow network.
//!
//! Every flow core processes a `dx × dy` pixel tile with the same 240-slot
//! template (at 6×6):
//!
//! ```text
//! neurons  [refractory dx·dy | south copies dx | east copies dy]
//!          [delay      dx·dy | south copies dx | east copies dy]
//!          [DS +x | DS −x | DS +y | DS −y]          4 · dx·dy
//! axons    [relay in dx·dy] [refractory own dx·dy | from west dy | from north dx]
//!          [delay own dx·dy | from west dy | from north dx]
//! ```
//!
//! Cores only send to their South and East neighbours. The DS unit for a
//! pixel pair that straddles a tile boundary therefore lives in the
//! South/East core: DS +x for pixel `p` is hosted by the core owning
//! `p + x̂`, DS −x by the core owning `p` (and likewise for y).
//!
//! Where the sensor edge coincides with the last tile row or column there is
//! no South/East core to host those units. The boundary delay copies of
//! that core have nowhere to go and are reconfigured as the missing DS
//! units, which keeps every core at the same neuron count.
//!
//! Every path from a pixel to a DS neuron crosses exactly one
//! neuron-to-axon hop after the refractory stage, whether it stays in the
//! core or crosses a boundary, so local and boundary signals stay aligned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Axon, AxonRef, CoreCoord, CoreKind, CoreSpec, Direction, NetworkSpec, NeuronRef, NeuronRole, NeuronSlot,
    Population, CORE_AXONS, CORE_NEURONS,
};
use crate::aer::{build_relay, AerError, RelayMap, TARGET_LEAD};
use crate::events::SensorGeometry;
use crate::neuron::{ConfigError, NeuronConfig};
use crate::scalar::Potential;

/// Ticks from a sensor event to the first spike of its DS burst: the AER
/// target-time lead, one relay hop and one refractory hop.
pub const DS_LATENCY_TICKS: u32 = TARGET_LEAD + 2;

const CFG_IDENTITY: u8 = 0;
const CFG_REFRACTORY: u8 = 1;
const CFG_DELAY: u8 = 2;
const CFG_DS: u8 = 3;
const ALL_TYPES: u8 = 0x0F;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling {
    pub dx: u32,
    pub dy: u32,
}

impl Default for Tiling {
    fn default() -> Self {
        Tiling { dx: 6, dy: 6 }
    }
}

/// `6·dx·dy + 2·dx + 2·dy`
pub fn neurons_per_core(dx: u32, dy: u32) -> u32 {
    6 * dx * dy + 2 * dx + 2 * dy
}

fn axons_per_core(dx: u32, dy: u32) -> u32 {
    3 * dx * dy + 2 * dx + 2 * dy
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("refractory period {tau_r} must exceed the delay {tau_d}")]
    Timing { tau_r: u32, tau_d: u32 },
    #[error("tile must be at least 1x1, got {0}x{1}")]
    EmptyTile(u32, u32),
    #[error("core {core:?} needs {neurons} neurons and {axons} axons, more than 256")]
    Capacity { core: CoreCoord, neurons: u32, axons: u32 },
    #[error("flow grid {cols}x{rows} exceeds the addressable core range")]
    Grid { cols: u32, rows: u32 },
    #[error(transparent)]
    Neuron(#[from] ConfigError),
    #[error(transparent)]
    Relay(#[from] AerError),
}

#[derive(Clone, Copy)]
struct Layout {
    dx: usize,
    dy: usize,
    a: usize,
}

impl Layout {
    fn local(&self, u: usize, v: usize) -> usize {
        v * self.dx + u
    }
    fn n_in(&self) -> usize {
        self.a + self.dx + self.dy
    }
    fn refr(&self, u: usize, v: usize) -> usize {
        self.local(u, v)
    }
    fn refr_s(&self, u: usize) -> usize {
        self.a + u
    }
    fn refr_e(&self, v: usize) -> usize {
        self.a + self.dx + v
    }
    fn delay(&self, u: usize, v: usize) -> usize {
        self.n_in() + self.local(u, v)
    }
    fn delay_s(&self, u: usize) -> usize {
        self.n_in() + self.a + u
    }
    fn delay_e(&self, v: usize) -> usize {
        self.n_in() + self.a + self.dx + v
    }
    fn ds(&self, d: Direction, u: usize, v: usize) -> usize {
        2 * self.n_in() + d.index() * self.a + self.local(u, v)
    }
    fn neurons(&self) -> usize {
        2 * self.n_in() + 4 * self.a
    }

    fn relay_in(&self, u: usize, v: usize) -> usize {
        self.local(u, v)
    }
    fn refr_own(&self, u: usize, v: usize) -> usize {
        self.a + self.local(u, v)
    }
    fn refr_w(&self, v: usize) -> usize {
        2 * self.a + v
    }
    fn refr_n(&self, u: usize) -> usize {
        2 * self.a + self.dy + u
    }
    fn delay_own(&self, u: usize, v: usize) -> usize {
        2 * self.a + self.dx + self.dy + self.local(u, v)
    }
    fn delay_w(&self, v: usize) -> usize {
        3 * self.a + self.dx + self.dy + v
    }
    fn delay_n(&self, u: usize) -> usize {
        3 * self.a + self.dx + 2 * self.dy + u
    }
    fn axons(&self) -> usize {
        3 * self.a + 2 * self.dx + 2 * self.dy
    }

    fn template_role(&self, n: usize) -> Population {
        let n_in = self.n_in();
        if n < n_in {
            Population::Input
        } else if n < 2 * n_in {
            Population::Delay
        } else {
            Population::Ds(Direction::ALL[(n - 2 * n_in) / self.a])
        }
    }

    fn template_config(&self, n: usize) -> u8 {
        match self.template_role(n) {
            Population::Input => CFG_REFRACTORY,
            Population::Delay => CFG_DELAY,
            _ => CFG_DS,
        }
    }
}

fn pixel_type(x: u32, y: u32) -> u8 {
    ((x & 1) | ((y & 1) << 1)) as u8
}

fn delay_type(x: u32, y: u32) -> u8 {
    pixel_type(x, y) ^ 0b11
}

struct Builder<'a> {
    geometry: SensorGeometry,
    lay: Layout,
    dxu: u32,
    dyu: u32,
    cols: u32,
    rows: u32,
    relay: &'a RelayMap,
    relay_count: usize,
    cores: Vec<CoreSpec>,
}

impl Builder<'_> {
    fn flow_index(&self, i: u32, j: u32) -> usize {
        self.relay_count + (j * self.cols + i) as usize
    }

    fn on(&self, x: i64, y: i64) -> bool {
        self.geometry.contains(x, y)
    }

    fn set_neuron(&mut self, core: usize, n: usize, config: u8, population: Population, pixel: (u32, u32), exc_types: u8, target: Option<AxonRef>) {
        self.cores[core].neurons[n] = NeuronSlot {
            config,
            role: NeuronRole { population, pixel: Some(pixel) },
            exc_types,
            target,
        };
    }

    /// Routes neuron `(src_core, src)` to axon `(dst_core, axon)`.
    fn route(&mut self, src_core: usize, src: usize, dst_core: usize, axon: usize, axon_type: u8) {
        self.cores[src_core].neurons[src].target = Some(AxonRef { core: dst_core as u32, axon: axon as u16 });
        let a = &mut self.cores[dst_core].axons[axon];
        a.source = Some(NeuronRef { core: src_core as u32, neuron: src as u16 });
        a.axon_type = axon_type;
    }

    fn synapse(&mut self, core: usize, axon: usize, neuron: usize) {
        self.cores[core].axons[axon].targets.push(neuron as u16);
    }

    /// Axon in core `(i, j)` carrying the refractory (or delayed) copy of
    /// pixel `(x, y)`, which must be in the tile or just West/North of it.
    fn axon_for(&self, i: u32, j: u32, x: i64, y: i64, delayed: bool) -> usize {
        let lu = x - (i * self.dxu) as i64;
        let lv = y - (j * self.dyu) as i64;
        let (dx, dy) = (self.lay.dx as i64, self.lay.dy as i64);
        let l = &self.lay;
        if (0..dx).contains(&lu) && (0..dy).contains(&lv) {
            let (u, v) = (lu as usize, lv as usize);
            if delayed { l.delay_own(u, v) } else { l.refr_own(u, v) }
        } else if lu == -1 && (0..dy).contains(&lv) {
            if delayed { l.delay_w(lv as usize) } else { l.refr_w(lv as usize) }
        } else if lv == -1 && (0..dx).contains(&lu) {
            if delayed { l.delay_n(lu as usize) } else { l.refr_n(lu as usize) }
        } else {
            unreachable!("pixel ({x}, {y}) is not visible from core ({i}, {j})")
        }
    }

    fn wire_pixels(&mut self, i: u32, j: u32) {
        let lay = self.lay;
        let c = self.flow_index(i, j);
        let east = (i + 1 < self.cols).then(|| self.flow_index(i + 1, j));
        let south = (j + 1 < self.rows).then(|| self.flow_index(i, j + 1));
        for v in 0..lay.dy {
            for u in 0..lay.dx {
                let x = i * self.dxu + u as u32;
                let y = j * self.dyu + v as u32;
                if !self.on(x as i64, y as i64) {
                    continue;
                }
                let p = (x, y);
                let pt = pixel_type(x, y);
                let south_edge = v == lay.dy - 1;
                let east_edge = u == lay.dx - 1;

                // sensor → relay core → relay-in axon
                let target = self.relay.locate(x, y).expect("pixel inside relay map");
                let rc = self.relay.core_index(target.core);
                let k = target.axon as usize;
                self.set_neuron(rc, k, CFG_IDENTITY, Population::Relay, p, ALL_TYPES, None);
                self.cores[rc].axons[k] = Axon { source: None, axon_type: 0, targets: vec![k as u16] };
                self.route(rc, k, c, lay.relay_in(u, v), 0);

                // refractory stage and its boundary copies
                self.set_neuron(c, lay.refr(u, v), CFG_REFRACTORY, Population::Input, p, ALL_TYPES, None);
                self.synapse(c, lay.relay_in(u, v), lay.refr(u, v));
                self.route(c, lay.refr(u, v), c, lay.refr_own(u, v), pt);
                if south_edge {
                    self.set_neuron(c, lay.refr_s(u), CFG_REFRACTORY, Population::Input, p, ALL_TYPES, None);
                    self.synapse(c, lay.relay_in(u, v), lay.refr_s(u));
                    if let Some(s) = south {
                        self.route(c, lay.refr_s(u), s, lay.refr_n(u), pt);
                    }
                }
                if east_edge {
                    self.set_neuron(c, lay.refr_e(v), CFG_REFRACTORY, Population::Input, p, ALL_TYPES, None);
                    self.synapse(c, lay.relay_in(u, v), lay.refr_e(v));
                    if let Some(e) = east {
                        self.route(c, lay.refr_e(v), e, lay.refr_w(v), pt);
                    }
                }

                // delay stage; copies exist only where a neighbour core does
                let dt = delay_type(x, y);
                self.set_neuron(c, lay.delay(u, v), CFG_DELAY, Population::Delay, p, ALL_TYPES, None);
                self.synapse(c, lay.refr_own(u, v), lay.delay(u, v));
                self.route(c, lay.delay(u, v), c, lay.delay_own(u, v), dt);
                if south_edge {
                    if let Some(s) = south {
                        self.set_neuron(c, lay.delay_s(u), CFG_DELAY, Population::Delay, p, ALL_TYPES, None);
                        self.synapse(c, lay.refr_own(u, v), lay.delay_s(u));
                        self.route(c, lay.delay_s(u), s, lay.delay_n(u), dt);
                    }
                }
                if east_edge {
                    if let Some(e) = east {
                        self.set_neuron(c, lay.delay_e(v), CFG_DELAY, Population::Delay, p, ALL_TYPES, None);
                        self.synapse(c, lay.refr_own(u, v), lay.delay_e(v));
                        self.route(c, lay.delay_e(v), e, lay.delay_w(v), dt);
                    }
                }
            }
        }
    }

    fn wire_ds(&mut self, i: u32, j: u32) {
        let lay = self.lay;
        let c = self.flow_index(i, j);
        let (x0, y0) = ((i * self.dxu) as i64, (j * self.dyu) as i64);
        for d in Direction::ALL {
            for v in 0..lay.dy {
                for u in 0..lay.dx {
                    let (lx, ly) = (x0 + u as i64, y0 + v as i64);
                    // slot is indexed by the in-tile pixel of the pair
                    let (p, q) = match d {
                        Direction::PosX => ((lx - 1, ly), (lx, ly)),
                        Direction::NegX => ((lx, ly), (lx - 1, ly)),
                        Direction::PosY => ((lx, ly - 1), (lx, ly)),
                        Direction::NegY => ((lx, ly), (lx, ly - 1)),
                    };
                    if !self.on(p.0, p.1) {
                        continue;
                    }
                    self.attach_ds(i, j, lay.ds(d, u, v), d, p, q);
                }
            }
        }
        // sensor edge on the tile boundary: idle delay copies become DS units
        if i + 1 == self.cols {
            for v in 0..lay.dy {
                let p = (x0 + lay.dx as i64 - 1, y0 + v as i64);
                if self.on(p.0, p.1) {
                    self.attach_ds(i, j, lay.delay_e(v), Direction::PosX, p, (p.0 + 1, p.1));
                }
            }
        }
        if j + 1 == self.rows {
            for u in 0..lay.dx {
                let p = (x0 + u as i64, y0 + lay.dy as i64 - 1);
                if self.on(p.0, p.1) {
                    self.attach_ds(i, j, lay.delay_s(u), Direction::PosY, p, (p.0, p.1 + 1));
                }
            }
        }
        let _ = c;
    }

    fn attach_ds(&mut self, i: u32, j: u32, n: usize, d: Direction, p: (i64, i64), q: (i64, i64)) {
        let c = self.flow_index(i, j);
        let pixel = (p.0 as u32, p.1 as u32);
        let exc = 1u8 << pixel_type(pixel.0, pixel.1);
        self.set_neuron(c, n, CFG_DS, Population::Ds(d), pixel, exc, None);
        let own = self.axon_for(i, j, p.0, p.1, false);
        self.synapse(c, own, n);
        if self.on(q.0, q.1) {
            let neighbour = self.axon_for(i, j, q.0, q.1, false);
            self.synapse(c, neighbour, n);
        }
        let delayed = self.axon_for(i, j, p.0, p.1, true);
        self.synapse(c, delayed, n);
    }
}

/// Builds the relay layer and one flow core per tile. Relay cores come
/// first in [`NetworkSpec::cores`], row-major, then flow cores row-major.
pub fn compile_flow_network<P: Potential>(
    geometry: SensorGeometry,
    tiling: Tiling,
    tau_r: u32,
    tau_d: u32,
) -> Result<NetworkSpec<P>, CompileError> {
    let (dx, dy) = (tiling.dx, tiling.dy);
    if dx == 0 || dy == 0 {
        return Err(CompileError::EmptyTile(dx, dy));
    }
    if tau_r <= tau_d {
        return Err(CompileError::Timing { tau_r, tau_d });
    }
    let neurons = neurons_per_core(dx, dy);
    let axons = axons_per_core(dx, dy);
    if neurons as usize > CORE_NEURONS || axons as usize > CORE_AXONS {
        return Err(CompileError::Capacity { core: CoreCoord::new(0, 0), neurons, axons });
    }
    let configs = vec![
        NeuronConfig::<P>::identity(),
        NeuronConfig::refractory(tau_r)?,
        NeuronConfig::delay(tau_d)?,
        NeuronConfig::direction_selective(),
    ];
    configs[CFG_REFRACTORY as usize].check_refractory()?;

    let relay = build_relay(geometry)?;
    let cols = geometry.width.div_ceil(dx);
    let rows = geometry.height.div_ceil(dy);
    if cols > u16::MAX as u32 || rows > u16::MAX as u32 {
        return Err(CompileError::Grid { cols, rows });
    }
    let lay = Layout { dx: dx as usize, dy: dy as usize, a: (dx * dy) as usize };

    let mut cores = Vec::with_capacity(relay.core_count() + (cols * rows) as usize);
    for b in 0..relay.rows {
        for a in 0..relay.cols {
            cores.push(CoreSpec {
                coord: CoreCoord::new(a as u16, b as u16),
                kind: CoreKind::Relay,
                axons: vec![Axon { source: None, axon_type: 0, targets: Vec::new() }; CORE_AXONS],
                neurons: vec![dummy_slot(CFG_IDENTITY, Population::Relay); CORE_NEURONS],
            });
        }
    }
    for j in 0..rows {
        for i in 0..cols {
            cores.push(CoreSpec {
                coord: CoreCoord::new(i as u16, j as u16),
                kind: CoreKind::Flow,
                axons: vec![Axon { source: None, axon_type: 0, targets: Vec::new() }; lay.axons()],
                neurons: (0..lay.neurons()).map(|n| dummy_slot(lay.template_config(n), lay.template_role(n))).collect(),
            });
        }
    }

    let mut b = Builder {
        geometry,
        lay,
        dxu: dx,
        dyu: dy,
        cols,
        rows,
        relay: &relay,
        relay_count: relay.core_count(),
        cores,
    };
    for j in 0..rows {
        for i in 0..cols {
            b.wire_pixels(i, j);
        }
    }
    for j in 0..rows {
        for i in 0..cols {
            b.wire_ds(i, j);
        }
    }
    let mut cores = b.cores;
    for core in &mut cores {
        for axon in &mut core.axons {
            axon.targets.sort_unstable();
            axon.targets.dedup();
        }
    }

    let mut spec = NetworkSpec {
        geometry,
        tiling,
        tau_r,
        tau_d,
        relay,
        flow_grid: (cols as u16, rows as u16),
        configs,
        cores,
        pixels: Vec::new(),
    };
    spec.reindex();
    Ok(spec)
}

fn dummy_slot(config: u8, population: Population) -> NeuronSlot {
    NeuronSlot { config, role: NeuronRole { population, pixel: None }, exc_types: ALL_TYPES, target: None }
}
