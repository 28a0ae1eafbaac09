//! Spike log CSV.
//!
//! ```text
//! # spikeflow spike log horizon=1500
//! tick,core,neuron,population,x,y
//! 104,2301,168,ds+x,12,40
//! ```
//!
//! `x` and `y` are empty for neurons without a pixel. The horizon line
//! records the simulated tick range so censored bursts can be told apart
//! from finished ones.

use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use super::{NeuronId, Population, SpikeRecord};

const HEADER: &str = "tick,core,neuron,population,x,y";
const HORIZON_TAG: &str = "horizon=";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpikeLog {
    pub horizon: u32,
    pub spikes: Vec<SpikeRecord>,
}

#[derive(Debug, Error)]
pub enum SpikeLogError {
    #[error("spike log line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_spike_log<W: Write>(log: &SpikeLog, sink: W) -> Result<(), SpikeLogError> {
    let mut w = std::io::BufWriter::new(sink);
    writeln!(w, "# spikeflow spike log {HORIZON_TAG}{}", log.horizon)?;
    writeln!(w, "{HEADER}")?;
    for s in &log.spikes {
        let n = &s.neuron;
        match n.pixel {
            Some((x, y)) => writeln!(w, "{},{},{},{},{x},{y}", s.tick, n.core, n.index, n.population)?,
            None => writeln!(w, "{},{},{},{},,", s.tick, n.core, n.index, n.population)?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_spike_log<R: Read>(source: R) -> Result<SpikeLog, SpikeLogError> {
    let reader = BufReader::new(source);
    let mut log = SpikeLog::default();
    let mut seen_horizon = false;
    let mut seen_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |reason: String| SpikeLogError::Parse { line: lineno, reason };
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            if let Some(pos) = comment.find(HORIZON_TAG) {
                let value = comment[pos + HORIZON_TAG.len()..].split_whitespace().next().unwrap_or("");
                log.horizon = value.parse().map_err(|_| err(format!("bad horizon `{value}`")))?;
                seen_horizon = true;
            }
            continue;
        }
        if !seen_header {
            if text != HEADER {
                return Err(err(format!("expected header `{HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |k: usize| fields[k].parse::<u64>().map_err(|_| err(format!("bad number `{}`", fields[k])));
        let tick = u32::try_from(num(0)?).map_err(|_| err("tick overflows".into()))?;
        let core = u32::try_from(num(1)?).map_err(|_| err("core overflows".into()))?;
        let index = u16::try_from(num(2)?).map_err(|_| err("neuron overflows".into()))?;
        let population: Population = fields[3].parse().map_err(err)?;
        let pixel = match (fields[4], fields[5]) {
            ("", "") => None,
            _ => Some((num(4)? as u32, num(5)? as u32)),
        };
        if let Some(prev) = log.spikes.last() {
            if prev.tick > tick {
                return Err(err(format!("tick {tick} after {}", prev.tick)));
            }
        }
        log.spikes.push(SpikeRecord { neuron: NeuronId { core, index, population, pixel }, tick });
    }
    if !seen_horizon {
        let last = log.spikes.last().map_or(0, |s| s.tick + 1);
        log::warn!("spike log has no horizon line; assuming {last}");
        log.horizon = last;
    }
    Ok(log)
}
