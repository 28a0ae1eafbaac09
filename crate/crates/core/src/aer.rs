//! Sensor-to-fabric address translation.
//!
//! Each relay core accepts a 16×16 pixel region, one axon per pixel in
//! row-major order, and copies every spike onward through an identity
//! neuron. Polarity is dropped: ON and OFF events drive the same axon.
//!
//! Spikes cross the link as a two-phase word, 16 bits per phase:
//!
//! ```text
//! phase 1: bits 0..8  Δcore_x (i8)   bits 8..16 Δcore_y (i8)
//! phase 2: bits 0..8  axon (u8)      bits 8..12 target time (u4)   bits 12..16 zero
//! ```
//!
//! `Δcore` is relative to the interface origin core. The target time is the
//! low four bits of the delivery tick.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corenet::CoreCoord;
use crate::events::SensorGeometry;

pub const REGION: u32 = 16;
/// Ticks between the sensor event and its delivery on the relay axon.
pub const TARGET_LEAD: u32 = 2;
/// Cores addressable on one chip per side.
pub const CHIP_CORES_PER_SIDE: u32 = 64;
pub const WORD_BYTES: usize = 4;

#[derive(Debug, Error)]
pub enum AerError {
    #[error("{width}x{height} sensor needs a {cols}x{rows} relay grid, beyond the {max}x{max} addressable cores")]
    Capacity { width: u32, height: u32, cols: u32, rows: u32, max: u32 },
    #[error("pixel ({0}, {1}) is outside the relay map")]
    Pixel(u32, u32),
    #[error("lead time {0} ticks cannot be expressed in a 4-bit target time (1..=15)")]
    Lead(u32),
    #[error("malformed spike word {0:02x?}")]
    Word([u8; WORD_BYTES]),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayMap {
    pub geometry: SensorGeometry,
    pub cols: u32,
    pub rows: u32,
    /// Core the link injects into; word offsets are relative to it.
    pub origin: CoreCoord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RelayTarget {
    pub core: CoreCoord,
    pub axon: u8,
}

pub fn build_relay(geometry: SensorGeometry) -> Result<RelayMap, AerError> {
    let cols = geometry.width.div_ceil(REGION);
    let rows = geometry.height.div_ceil(REGION);
    if cols > CHIP_CORES_PER_SIDE || rows > CHIP_CORES_PER_SIDE {
        return Err(AerError::Capacity {
            width: geometry.width,
            height: geometry.height,
            cols,
            rows,
            max: CHIP_CORES_PER_SIDE,
        });
    }
    Ok(RelayMap { geometry, cols, rows, origin: CoreCoord::new(0, 0) })
}

impl RelayMap {
    pub fn core_count(&self) -> usize {
        (self.cols * self.rows) as usize
    }

    /// Row-major index of a relay core.
    pub fn core_index(&self, core: CoreCoord) -> usize {
        core.y as usize * self.cols as usize + core.x as usize
    }

    pub fn locate(&self, x: u32, y: u32) -> Result<RelayTarget, AerError> {
        if x >= self.geometry.width || y >= self.geometry.height {
            return Err(AerError::Pixel(x, y));
        }
        Ok(RelayTarget {
            core: CoreCoord::new((x / REGION) as u16, (y / REGION) as u16),
            axon: ((y % REGION) * REGION + x % REGION) as u8,
        })
    }

    /// Pixel served by `axon` of relay core `core`, if it is on the sensor.
    pub fn pixel_of(&self, core: CoreCoord, axon: u8) -> Option<(u32, u32)> {
        let x = core.x as u32 * REGION + axon as u32 % REGION;
        let y = core.y as u32 * REGION + axon as u32 / REGION;
        (x < self.geometry.width && y < self.geometry.height).then_some((x, y))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TnSpikeWord {
    pub dcore_x: i8,
    pub dcore_y: i8,
    pub axon: u8,
    pub target_time: u8,
}

impl TnSpikeWord {
    pub fn phases(&self) -> [u16; 2] {
        let p1 = u16::from_le_bytes([self.dcore_x as u8, self.dcore_y as u8]);
        let p2 = u16::from_le_bytes([self.axon, self.target_time & 0x0F]);
        [p1, p2]
    }

    pub fn from_phases(phases: [u16; 2]) -> Result<Self, AerError> {
        let [a, b] = phases[0].to_le_bytes();
        let [c, d] = phases[1].to_le_bytes();
        if d & 0xF0 != 0 {
            return Err(AerError::Word([a, b, c, d]));
        }
        Ok(TnSpikeWord { dcore_x: a as i8, dcore_y: b as i8, axon: c, target_time: d })
    }

    pub fn to_bytes(&self) -> [u8; WORD_BYTES] {
        let [p1, p2] = self.phases();
        let [a, b] = p1.to_le_bytes();
        let [c, d] = p2.to_le_bytes();
        [a, b, c, d]
    }

    pub fn from_bytes(bytes: [u8; WORD_BYTES]) -> Result<Self, AerError> {
        Self::from_phases([u16::from_le_bytes([bytes[0], bytes[1]]), u16::from_le_bytes([bytes[2], bytes[3]])])
    }
}

/// Word for an event at `event_tick`, due `TARGET_LEAD` ticks later.
pub fn encode_spike(event_tick: u32, pixel: (u32, u32), map: &RelayMap) -> Result<TnSpikeWord, AerError> {
    encode_spike_with_lead(event_tick, pixel, map, TARGET_LEAD)
}

pub fn encode_spike_with_lead(event_tick: u32, pixel: (u32, u32), map: &RelayMap, lead: u32) -> Result<TnSpikeWord, AerError> {
    if lead == 0 || lead > 15 {
        return Err(AerError::Lead(lead));
    }
    let target = map.locate(pixel.0, pixel.1)?;
    let dx = target.core.x as i32 - map.origin.x as i32;
    let dy = target.core.y as i32 - map.origin.y as i32;
    let (Ok(dcore_x), Ok(dcore_y)) = (i8::try_from(dx), i8::try_from(dy)) else {
        return Err(AerError::Pixel(pixel.0, pixel.1));
    };
    Ok(TnSpikeWord { dcore_x, dcore_y, axon: target.axon, target_time: ((event_tick + lead) % 16) as u8 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub core: CoreCoord,
    pub axon: u8,
    pub deliver_tick: u32,
}

/// Resolves a word received at `current_tick` by the interface at
/// `origin`: the delivery tick is the first tick after `current_tick` whose
/// low four bits equal the target time.
pub fn decode_spike(word: TnSpikeWord, origin: CoreCoord, current_tick: u32) -> Delivery {
    let now = current_tick % 16;
    let tt = (word.target_time & 0x0F) as u32;
    let ahead = if tt > now { tt - now } else { tt + 16 - now };
    Delivery {
        core: CoreCoord::new(
            (origin.x as i32 + word.dcore_x as i32) as u16,
            (origin.y as i32 + word.dcore_y as i32) as u16,
        ),
        axon: word.axon,
        deliver_tick: current_tick + ahead,
    }
}

pub fn write_words<W: Write>(words: &[TnSpikeWord], mut sink: W) -> Result<(), AerError> {
    let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_bytes()).collect();
    sink.write_all(&bytes)?;
    Ok(())
}

pub fn read_words<R: Read>(mut source: R) -> Result<Vec<TnSpikeWord>, AerError> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    if buf.len() % WORD_BYTES != 0 {
        let mut tail = [0u8; WORD_BYTES];
        let rem = &buf[buf.len() - buf.len() % WORD_BYTES..];
        tail[..rem.len()].copy_from_slice(rem);
        return Err(AerError::Word(tail));
    }
    buf.chunks_exact(WORD_BYTES)
        .map(|c| TnSpikeWord::from_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qvga_relay_grid() {
        let map = build_relay(SensorGeometry::QVGA).unwrap();
        assert_eq!((map.cols, map.rows), (19, 15));
        assert_eq!(map.core_count(), 285);
        assert_eq!(map.locate(0, 0).unwrap(), RelayTarget { core: CoreCoord::new(0, 0), axon: 0 });
        assert_eq!(map.locate(303, 239).unwrap(), RelayTarget { core: CoreCoord::new(18, 14), axon: 255 });
        assert_eq!(map.locate(17, 3).unwrap(), RelayTarget { core: CoreCoord::new(1, 0), axon: 49 });
        assert!(map.locate(304, 0).is_err());
    }

    #[test]
    fn oversized_sensor_is_rejected() {
        let g = SensorGeometry::new(64 * 16 + 1, 10).unwrap();
        assert!(matches!(build_relay(g), Err(AerError::Capacity { .. })));
    }

    #[test]
    fn target_time_wraps() {
        let map = build_relay(SensorGeometry::QVGA).unwrap();
        assert_eq!(encode_spike(7, (5, 5), &map).unwrap().target_time, 9);
        assert_eq!(encode_spike(15, (5, 5), &map).unwrap().target_time, 1);
        assert_eq!(encode_spike(14, (5, 5), &map).unwrap().target_time, 0);
    }

    #[test]
    fn lead_limits() {
        let map = build_relay(SensorGeometry::QVGA).unwrap();
        assert!(matches!(encode_spike_with_lead(0, (1, 1), &map, 16), Err(AerError::Lead(16))));
        assert!(matches!(encode_spike_with_lead(0, (1, 1), &map, 0), Err(AerError::Lead(0))));
        let w = encode_spike_with_lead(100, (1, 1), &map, 15).unwrap();
        assert_eq!(decode_spike(w, map.origin, 100).deliver_tick, 115);
    }

    #[test]
    fn wire_layout_is_pinned() {
        let w = TnSpikeWord { dcore_x: 18, dcore_y: -2, axon: 0xAB, target_time: 9 };
        assert_eq!(w.to_bytes(), [0x12, 0xFE, 0xAB, 0x09]);
        assert_eq!(w.phases(), [0xFE12, 0x09AB]);
        assert_eq!(TnSpikeWord::from_bytes(w.to_bytes()).unwrap(), w);
        assert!(TnSpikeWord::from_bytes([0, 0, 0, 0x19]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let words = vec![
            TnSpikeWord { dcore_x: 1, dcore_y: 2, axon: 3, target_time: 4 },
            TnSpikeWord { dcore_x: -1, dcore_y: 0, axon: 255, target_time: 15 },
        ];
        let mut buf = Vec::new();
        write_words(&words, &mut buf).unwrap();
        assert_eq!(buf.len(), 8);
        assert_eq!(read_words(&buf[..]).unwrap(), words);
        assert!(read_words(&buf[..5]).is_err());
    }
}
