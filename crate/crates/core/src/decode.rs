//! Burst extraction and velocity decoding.
//!
//! A DS neuron bursts one spike per tick from the moment its pixel fires
//! until the neighbour in its preferred direction fires (or its own delayed
//! inhibition arrives), so burst length is the transit time in ticks. With
//! `t_x = t₊ₓ − t₋ₓ` and `t_y = t₊ᵧ − t₋ᵧ` the normal flow is
//! `v = (t_x, t_y) / (t_x² + t_y²)` pixels per tick.
//!
//! A burst ended by the delayed self-inhibition has the saturated length
//! `τ_d − 1` whatever the motion. For transits of 26 ticks or more the
//! anti-preferred neuron has recovered from its inhibition by the time its
//! own pixel fires and produces exactly such a burst. With
//! [`DecodeOptions::saturated_length`] set, a saturated burst facing a
//! shorter, non-zero burst on the same axis is read as carrying no transit
//! information and the shorter burst alone gives the axis transit.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corenet::{Direction, Population, SpikeRecord};
use crate::scalar::Real;

pub const FLOW_HEADER: &str = "x,y,t_ms,vx_px_per_ms,vy_px_per_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Burst {
    pub start: u32,
    pub pixel: (u32, u32),
    pub direction: Direction,
    pub length: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEstimate<F> {
    pub x: u32,
    pub y: u32,
    /// Tick of the burst start.
    pub tick: u32,
    pub t_ms: F,
    pub vx: F,
    pub vy: F,
}

impl<F: Real> FlowEstimate<F> {
    pub fn speed(&self) -> F {
        self.vx.hypot(self.vy)
    }

    /// Direction of motion in `[0, 2π)`, image coordinates.
    pub fn direction(&self) -> F {
        crate::scalar::wrap_angle(self.vy.atan2(self.vx))
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("flow CSV line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Splits each DS neuron's spike train into bursts. A gap of two or more
/// ticks closes a burst. A burst still running at the last simulated tick
/// (`horizon − 1`) is censored and dropped. Output is ordered by start
/// tick, then pixel and direction.
pub fn extract_bursts(spikes: &[SpikeRecord], horizon: u32) -> Vec<Burst> {
    let mut trains: BTreeMap<(u32, u16), (Direction, (u32, u32), Vec<u32>)> = BTreeMap::new();
    for s in spikes {
        let (Population::Ds(d), Some(p)) = (s.neuron.population, s.neuron.pixel) else { continue };
        trains.entry((s.neuron.core, s.neuron.index)).or_insert_with(|| (d, p, Vec::new())).2.push(s.tick);
    }
    let mut bursts = Vec::new();
    for (_, (direction, pixel, mut ticks)) in trains {
        ticks.sort_unstable();
        ticks.dedup();
        let mut i = 0;
        while i < ticks.len() {
            let start = ticks[i];
            let mut j = i;
            while j + 1 < ticks.len() && ticks[j + 1] == ticks[j] + 1 {
                j += 1;
            }
            let last = ticks[j];
            if last + 1 < horizon {
                bursts.push(Burst { start, pixel, direction, length: (j - i + 1) as u32 });
            }
            i = j + 1;
        }
    }
    bursts.sort_unstable();
    bursts
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions<F> {
    pub tick_ms: F,
    /// Length of a burst cut by the delayed self-inhibition, `τ_d − 1`.
    /// `None` decodes every axis as `t₊ − t₋`.
    pub saturated_length: Option<u32>,
}

impl<F: Real> DecodeOptions<F> {
    pub fn plain(tick_ms: F) -> Self {
        DecodeOptions { tick_ms, saturated_length: None }
    }

    pub fn for_delay(tau_d: u32, tick_ms: F) -> Self {
        DecodeOptions { tick_ms, saturated_length: Some(tau_d.saturating_sub(1)) }
    }
}

/// Signed transit in ticks on one axis.
pub fn axis_transit(pos: u32, neg: u32, saturated: Option<u32>) -> i64 {
    let (p, n) = (pos as i64, neg as i64);
    match saturated {
        Some(s) if pos == s && neg > 0 && neg < s => -n,
        Some(s) if neg == s && pos > 0 && pos < s => p,
        _ => p - n,
    }
}

/// Velocity in px/tick from the four burst lengths, ordered +x, −x, +y,
/// −y. `None` when the lengths cancel on both axes.
pub fn decode_velocity<F: Real>(lengths: [u32; 4]) -> Option<(F, F)> {
    decode_velocity_with(lengths, None)
}

pub fn decode_velocity_with<F: Real>(lengths: [u32; 4], saturated: Option<u32>) -> Option<(F, F)> {
    let tx = axis_transit(lengths[0], lengths[1], saturated);
    let ty = axis_transit(lengths[2], lengths[3], saturated);
    if tx == 0 && ty == 0 {
        return None;
    }
    let n = F::from_i64(tx * tx + ty * ty).expect("small integer");
    Some((F::from_i64(tx).expect("small integer") / n, F::from_i64(ty).expect("small integer") / n))
}

/// Groups bursts per pixel whose starts lie within one tick of the earliest
/// in the group (one burst per direction) and decodes each group.
pub fn decode_flow<F: Real>(bursts: &[Burst], options: &DecodeOptions<F>) -> Vec<FlowEstimate<F>> {
    let tick_ms = options.tick_ms;
    let mut per_pixel: BTreeMap<(u32, u32), Vec<Burst>> = BTreeMap::new();
    for b in bursts {
        per_pixel.entry((b.pixel.1, b.pixel.0)).or_default().push(*b);
    }
    let mut out = Vec::new();
    for list in per_pixel.values_mut() {
        list.sort_unstable();
        let mut used = vec![false; list.len()];
        for i in 0..list.len() {
            if used[i] {
                continue;
            }
            let anchor = list[i].start;
            let mut lengths = [0u32; 4];
            let mut filled = [false; 4];
            for j in i..list.len() {
                if list[j].start > anchor + 1 {
                    break;
                }
                let d = list[j].direction.index();
                if !used[j] && !filled[d] {
                    lengths[d] = list[j].length;
                    filled[d] = true;
                    used[j] = true;
                }
            }
            if let Some((vx, vy)) = decode_velocity_with::<F>(lengths, options.saturated_length) {
                let (x, y) = list[i].pixel;
                out.push(FlowEstimate {
                    x,
                    y,
                    tick: anchor,
                    t_ms: F::from_u32(anchor).expect("tick fits") * tick_ms,
                    vx: vx / tick_ms,
                    vy: vy / tick_ms,
                });
            }
        }
    }
    out.sort_by_key(|e| (e.tick, e.y, e.x));
    out
}

pub fn write_flow_csv<F: Real, W: Write>(estimates: &[FlowEstimate<F>], sink: W) -> Result<(), DecodeError> {
    let mut w = std::io::BufWriter::new(sink);
    writeln!(w, "{FLOW_HEADER}")?;
    for e in estimates {
        writeln!(w, "{},{},{},{},{}", e.x, e.y, e.t_ms, e.vx, e.vy)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a flow CSV; `tick` is recovered as `round(t_ms / tick_ms)`.
pub fn read_flow_csv<F: Real, R: Read>(source: R, tick_ms: F) -> Result<Vec<FlowEstimate<F>>, DecodeError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let err = |reason: String| DecodeError::Parse { line: i + 1, reason };
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if text == FLOW_HEADER {
            continue;
        }
        let f: Vec<&str> = text.split(',').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let int = |k: usize| f[k].parse::<u32>().map_err(|_| err(format!("bad integer `{}`", f[k])));
        let real = |k: usize| {
            f[k].parse::<f64>()
                .ok()
                .and_then(F::from_f64)
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad number `{}`", f[k])))
        };
        let t_ms = real(2)?;
        out.push(FlowEstimate {
            x: int(0)?,
            y: int(1)?,
            tick: (t_ms / tick_ms).round().to_u32().unwrap_or(0),
            t_ms,
            vx: real(3)?,
            vy: real(4)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corenet::NeuronId;

    fn spikes(d: Direction, ticks: &[u32]) -> Vec<SpikeRecord> {
        ticks
            .iter()
            .map(|&t| SpikeRecord { neuron: NeuronId { core: 1, index: 2, population: Population::Ds(d), pixel: Some((3, 4)) }, tick: t })
            .collect()
    }

    #[test]
    fn gap_rule() {
        let b = extract_bursts(&spikes(Direction::PosX, &[10, 11, 12, 13, 14]), 100);
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].start, b[0].length), (10, 5));
        let b = extract_bursts(&spikes(Direction::PosX, &[10, 11, 20, 21]), 100);
        assert_eq!(b.iter().map(|b| b.length).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn censored_burst_dropped() {
        assert!(extract_bursts(&spikes(Direction::PosX, &[97, 98, 99]), 100).is_empty());
        assert_eq!(extract_bursts(&spikes(Direction::PosX, &[96, 97, 98]), 100).len(), 1);
    }

    #[test]
    fn velocity_examples() {
        assert_eq!(decode_velocity::<f64>([5, 0, 0, 0]), Some((0.2, 0.0)));
        assert_eq!(decode_velocity::<f64>([4, 4, 0, 0]), None);
        let (vx, vy) = decode_velocity::<f64>([3, 0, 4, 0]).unwrap();
        assert!((vx - 0.12).abs() < 1e-15 && (vy - 0.16).abs() < 1e-15);
        assert!((vx.hypot(vy) - 0.2).abs() < 1e-15);
        assert_eq!(decode_velocity::<f64>([49, 49, 49, 49]), None);
    }

    #[test]
    fn saturated_burst_yields_to_shorter() {
        assert_eq!(axis_transit(30, 49, Some(49)), 30);
        assert_eq!(axis_transit(49, 30, Some(49)), -30);
        assert_eq!(axis_transit(49, 49, Some(49)), 0);
        assert_eq!(axis_transit(49, 0, Some(49)), 49);
        assert_eq!(axis_transit(30, 49, None), -19);
        assert_eq!(decode_velocity_with::<f64>([49, 49, 49, 49], Some(49)), None);
    }

    #[test]
    fn groups_within_one_tick() {
        let mk = |start, d, length| Burst { start, pixel: (1, 1), direction: d, length };
        let bursts = [mk(10, Direction::PosX, 4), mk(11, Direction::NegX, 1), mk(30, Direction::PosY, 2)];
        let flow = decode_flow::<f64>(&bursts, &DecodeOptions::plain(1.0));
        assert_eq!(flow.len(), 2);
        assert!((flow[0].vx - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(flow[1].tick, 30);
        assert!((flow[1].vy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let est = vec![FlowEstimate { x: 3, y: 4, tick: 12, t_ms: 12.0, vx: 0.2, vy: -1.0 / 3.0 }];
        let mut buf = Vec::new();
        write_flow_csv(&est, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(FLOW_HEADER));
        assert_eq!(read_flow_csv::<f64, _>(&buf[..], 1.0).unwrap(), est);
    }
}
