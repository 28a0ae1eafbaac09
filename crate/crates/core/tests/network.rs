mod common;

use proptest::prelude::*;

use spikeflow::corenet::{simulate, validate, Direction, Population, PopulationFilter, SimOptions, Violation};
use spikeflow::decode::extract_bursts;
use spikeflow::events::TickEvent;

use common::{ev, network, run, TAU_D, TAU_R};

#[test]
fn small_network_validates() {
    for (w, h) in [(6, 6), (7, 5), (24, 24), (13, 12)] {
        let report = validate(&network(w, h));
        assert!(report.is_valid(), "{w}x{h}: {:?}", report.violations);
    }
}

#[test]
fn removing_a_delay_synapse_is_one_violation() {
    let mut spec = network(24, 24);
    let p = (8, 9);
    let ds = spec.pixel(p.0, p.1).unwrap().ds[Direction::PosX.index()].unwrap();
    let core = &spec.cores[ds.core as usize];
    let axon = core
        .axons
        .iter()
        .position(|a| {
            a.targets.contains(&ds.neuron)
                && a.source.and_then(|s| spec.neuron(s)).is_some_and(|n| n.role.population == Population::Delay && n.role.pixel == Some(p))
        })
        .expect("delayed self-inhibition axon");
    spec.cores[ds.core as usize].axons[axon].targets.retain(|&n| n != ds.neuron);
    let report = validate(&spec);
    assert_eq!(report.violations.len(), 1, "{:?}", report.violations);
    assert!(matches!(report.violations[0], Violation::DsWiring { pixel, .. } if pixel == p));
}

#[test]
fn no_input_no_spikes() {
    let spec = network(24, 24);
    assert!(run(&spec, &[], 500, PopulationFilter::ALL).is_empty());
}

#[test]
fn single_event_makes_four_saturated_bursts() {
    let spec = network(24, 24);
    let horizon = 300;
    let spikes = run(&spec, &[ev(10, 10, 20)], horizon, PopulationFilter::ALL);
    let count = |pop: Population| spikes.iter().filter(|s| s.neuron.population == pop).count();
    assert_eq!(count(Population::Relay), 1);
    let bursts = extract_bursts(&spikes, horizon);
    assert_eq!(bursts.len(), 4);
    for b in &bursts {
        assert_eq!(b.pixel, (10, 10));
        assert_eq!(b.length, TAU_D - 1);
        assert_eq!(b.start, 20 + spikeflow::corenet::DS_LATENCY_TICKS);
    }
}

#[test]
fn refractory_drops_repeats() {
    let spec = network(12, 12);
    let events = [ev(3, 3, 10), ev(3, 3, 20), ev(3, 3, 10 + TAU_R + 5)];
    let spikes = run(&spec, &events, 400, PopulationFilter::only(&[Population::Relay, Population::Input]));
    let relay = spikes.iter().filter(|s| s.neuron.population == Population::Relay).count();
    let input: Vec<u32> = spikes.iter().filter(|s| s.neuron.population == Population::Input && s.neuron.pixel == Some((3, 3))).map(|s| s.tick).collect();
    assert_eq!(relay, 3);
    assert_eq!(input, vec![13, 10 + TAU_R + 5 + 3]);
}

#[test]
fn rejects_out_of_range_events() {
    let spec = network(12, 12);
    let opts = SimOptions::default();
    assert!(simulate(&spec, &[ev(12, 0, 1)], 10, opts).is_err());
    assert!(simulate(&spec, &[ev(0, 0, 10)], 10, opts).is_err());
}

fn tick_events(w: u32, h: u32, horizon: u32) -> impl Strategy<Value = Vec<TickEvent>> {
    prop::collection::btree_set((0..w, 0..h, 0..horizon), 0..120).prop_map(|set| {
        let mut v: Vec<TickEvent> = set.into_iter().map(|(x, y, tick)| TickEvent { x, y, tick }).collect();
        v.sort();
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn parallel_matches_serial(events in tick_events(19, 14, 200)) {
        let spec = network(19, 14);
        let serial = simulate(&spec, &events, 300, SimOptions { parallel: false, filter: PopulationFilter::ALL }).unwrap();
        let parallel = simulate(&spec, &events, 300, SimOptions { parallel: true, filter: PopulationFilter::ALL }).unwrap();
        prop_assert_eq!(serial, parallel);
    }

    #[test]
    fn relay_preserves_event_count(events in tick_events(19, 14, 200)) {
        let spec = network(19, 14);
        let spikes = simulate(&spec, &events, 205, SimOptions { parallel: false, filter: PopulationFilter::only(&[Population::Relay]) }).unwrap();
        prop_assert_eq!(spikes.len(), events.len());
        let mut got: Vec<_> = spikes.iter().map(|s| (s.tick - 2, s.neuron.pixel.unwrap())).collect();
        let mut want: Vec<_> = events.iter().map(|e| (e.tick, (e.x, e.y))).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn spikes_only_where_events_reach(events in tick_events(19, 14, 150)) {
        let spec = network(19, 14);
        let spikes = simulate(&spec, &events, 250, SimOptions { parallel: false, filter: PopulationFilter::ALL }).unwrap();
        let first = events.iter().map(|e| e.tick).min().unwrap_or(u32::MAX);
        for s in &spikes {
            prop_assert!(s.tick > first);
            let (x, y) = s.neuron.pixel.unwrap();
            // each population serves its pixel or a neighbour of it
            prop_assert!(events.iter().any(|e| (e.x as i64 - x as i64).abs() <= 1 && (e.y as i64 - y as i64).abs() <= 1));
        }
    }
}
