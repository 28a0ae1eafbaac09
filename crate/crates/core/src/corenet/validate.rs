use std::fmt;

use serde::Serialize;

use super::{neurons_per_core, CoreCoord, CoreKind, Direction, NetworkSpec, NeuronRef, Population, AXON_TYPES, CORE_AXONS, CORE_NEURONS};
use crate::scalar::Potential;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    AxonCapacity { core: CoreCoord, axons: usize },
    NeuronCapacity { core: CoreCoord, neurons: usize },
    TileBudget { dx: u32, dy: u32, neurons: u32 },
    Routing { neuron: NeuronRef, reason: String },
    Crossbar { core: u32, axon: u16, reason: String },
    DsWiring { neuron: NeuronRef, pixel: (u32, u32), reason: String },
    DsCoverage { pixel: (u32, u32), direction: Direction, count: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AxonCapacity { core, axons } => write!(f, "core ({}, {}) uses {axons} axons", core.x, core.y),
            Violation::NeuronCapacity { core, neurons } => write!(f, "core ({}, {}) uses {neurons} neurons", core.x, core.y),
            Violation::TileBudget { dx, dy, neurons } => write!(f, "{dx}x{dy} tile needs {neurons} neurons per core"),
            Violation::Routing { neuron, reason } => write!(f, "neuron {}:{}: {reason}", neuron.core, neuron.neuron),
            Violation::Crossbar { core, axon, reason } => write!(f, "axon {core}:{axon}: {reason}"),
            Violation::DsWiring { neuron, pixel, reason } => {
                write!(f, "DS neuron {}:{} at ({}, {}): {reason}", neuron.core, neuron.neuron, pixel.0, pixel.1)
            }
            Violation::DsCoverage { pixel, direction, count } => {
                write!(f, "pixel ({}, {}) has {count} DS {direction:?} neurons", pixel.0, pixel.1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoreUsage {
    pub index: u32,
    pub coord: CoreCoord,
    pub kind: CoreKind,
    /// Instantiated neuron slots.
    pub neurons: usize,
    /// Slots bound to an on-sensor pixel.
    pub active_neurons: usize,
    /// Axons with at least one synapse.
    pub axons: usize,
    pub synapses: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResourceSummary {
    pub flow_cores: usize,
    pub relay_cores: usize,
    pub total_cores: usize,
    /// Neurons per flow core when every flow core has the same count.
    pub neurons_per_flow_core: Option<usize>,
    pub flow_neurons: usize,
    pub relay_neurons: usize,
    pub total_neurons: usize,
    /// `total_cores × neurons_per_flow_core`, counting relay cores at the
    /// flow-core size.
    pub nominal_neurons: usize,
    pub max_axons_per_core: usize,
    pub axons_within_neurons: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub usage: Vec<CoreUsage>,
    pub summary: ResourceSummary,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate<P: Potential>(spec: &NetworkSpec<P>) -> ValidationReport {
    let mut violations = Vec::new();
    let budget = neurons_per_core(spec.tiling.dx, spec.tiling.dy);
    if budget as usize > CORE_NEURONS {
        violations.push(Violation::TileBudget { dx: spec.tiling.dx, dy: spec.tiling.dy, neurons: budget });
    }

    for (ci, core) in spec.cores.iter().enumerate() {
        if core.axons.len() > CORE_AXONS {
            violations.push(Violation::AxonCapacity { core: core.coord, axons: core.axons.len() });
        }
        if core.neurons.len() > CORE_NEURONS {
            violations.push(Violation::NeuronCapacity { core: core.coord, neurons: core.neurons.len() });
        }
        for (ai, axon) in core.axons.iter().enumerate() {
            let at = |reason: String| Violation::Crossbar { core: ci as u32, axon: ai as u16, reason };
            if axon.axon_type >= AXON_TYPES {
                violations.push(at(format!("axon type {} out of range", axon.axon_type)));
            }
            if let Some(&bad) = axon.targets.iter().find(|&&n| n as usize >= core.neurons.len()) {
                violations.push(at(format!("synapse onto missing neuron {bad}")));
            }
            if let Some(src) = axon.source {
                let back = spec.neuron(src).and_then(|s| s.target);
                if back.map(|t| (t.core, t.axon)) != Some((ci as u32, ai as u16)) {
                    violations.push(at(format!("source {}:{} does not route here", src.core, src.neuron)));
                }
            }
        }
        for (ni, slot) in core.neurons.iter().enumerate() {
            let me = NeuronRef { core: ci as u32, neuron: ni as u16 };
            if slot.config as usize >= spec.configs.len() {
                violations.push(Violation::Routing { neuron: me, reason: format!("unknown config {}", slot.config) });
            }
            let Some(t) = slot.target else { continue };
            let axon = spec.cores.get(t.core as usize).and_then(|c| c.axons.get(t.axon as usize));
            match axon {
                None => violations.push(Violation::Routing { neuron: me, reason: format!("target {}:{} does not exist", t.core, t.axon) }),
                Some(a) if a.source != Some(me) => {
                    violations.push(Violation::Routing { neuron: me, reason: format!("target {}:{} has another source", t.core, t.axon) })
                }
                Some(_) => {}
            }
        }
    }

    check_ds(spec, &mut violations);

    let usage: Vec<CoreUsage> = spec
        .cores
        .iter()
        .enumerate()
        .map(|(ci, c)| CoreUsage {
            index: ci as u32,
            coord: c.coord,
            kind: c.kind,
            neurons: c.neurons.len(),
            active_neurons: c.neurons.iter().filter(|s| s.role.pixel.is_some()).count(),
            axons: c.used_axons(),
            synapses: c.axons.iter().map(|a| a.targets.len()).sum(),
        })
        .collect();

    let flow: Vec<&CoreUsage> = usage.iter().filter(|u| u.kind == CoreKind::Flow).collect();
    let relay_neurons: usize = usage.iter().filter(|u| u.kind == CoreKind::Relay).map(|u| u.neurons).sum();
    let flow_neurons: usize = flow.iter().map(|u| u.neurons).sum();
    let per_flow = flow.first().map(|u| u.neurons).filter(|&n| flow.iter().all(|u| u.neurons == n));
    let summary = ResourceSummary {
        flow_cores: flow.len(),
        relay_cores: usage.len() - flow.len(),
        total_cores: usage.len(),
        neurons_per_flow_core: per_flow,
        flow_neurons,
        relay_neurons,
        total_neurons: flow_neurons + relay_neurons,
        nominal_neurons: per_flow.unwrap_or(0) * usage.len(),
        max_axons_per_core: usage.iter().map(|u| u.axons).max().unwrap_or(0),
        axons_within_neurons: usage.iter().all(|u| u.axons <= u.active_neurons),
    };
    ValidationReport { violations, usage, summary }
}

fn check_ds<P: Potential>(spec: &NetworkSpec<P>, violations: &mut Vec<Violation>) {
    let g = spec.geometry;
    let mut coverage = vec![[0usize; 4]; g.pixel_count()];
    for (ci, core) in spec.cores.iter().enumerate() {
        if core.kind != CoreKind::Flow {
            continue;
        }
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); core.neurons.len()];
        for (ai, axon) in core.axons.iter().enumerate() {
            for &n in &axon.targets {
                if let Some(list) = incoming.get_mut(n as usize) {
                    list.push(ai);
                }
            }
        }
        for (ni, slot) in core.neurons.iter().enumerate() {
            let (Population::Ds(d), Some(p)) = (slot.role.population, slot.role.pixel) else { continue };
            coverage[(p.1 * g.width + p.0) as usize][d.index()] += 1;
            let (ox, oy) = d.offset();
            let q = (p.0 as i64 + ox, p.1 as i64 + oy);
            let q = g.contains(q.0, q.1).then_some((q.0 as u32, q.1 as u32));
            let (mut own, mut neighbour, mut delayed, mut other) = (0, 0, 0, Vec::new());
            for &ai in &incoming[ni] {
                let axon = &core.axons[ai];
                let exc = slot.is_excitatory(axon.axon_type);
                let src = axon.source.and_then(|s| spec.neuron(s)).map(|s| s.role);
                match (src.map(|r| (r.population, r.pixel)), exc) {
                    (Some((Population::Input, Some(px))), true) if px == p => own += 1,
                    (Some((Population::Input, Some(px))), false) if Some(px) == q => neighbour += 1,
                    (Some((Population::Delay, Some(px))), false) if px == p => delayed += 1,
                    (role, exc) => other.push(format!("axon {ai} ({}) from {role:?}", if exc { "exc" } else { "inh" })),
                }
            }
            let mut problems = Vec::new();
            if own != 1 {
                problems.push(format!("{own} excitatory own-pixel inputs"));
            }
            let want = usize::from(q.is_some());
            if neighbour != want {
                problems.push(format!("{neighbour} neighbour inhibitions, expected {want}"));
            }
            if delayed != 1 {
                problems.push(format!("{delayed} delayed inhibitions"));
            }
            problems.extend(other.into_iter().map(|o| format!("unexpected {o}")));
            if !problems.is_empty() {
                violations.push(Violation::DsWiring {
                    neuron: NeuronRef { core: ci as u32, neuron: ni as u16 },
                    pixel: p,
                    reason: problems.join("; "),
                });
            }
        }
    }
    for y in 0..g.height {
        for x in 0..g.width {
            for d in Direction::ALL {
                let count = coverage[(y * g.width + x) as usize][d.index()];
                if count != 1 {
                    violations.push(Violation::DsCoverage { pixel: (x, y), direction: d, count });
                }
            }
        }
    }
}
