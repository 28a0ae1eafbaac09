//! Change-detection events, tick quantization and the two recording formats.
//!
//! Binary records are 9 bytes, little-endian, no header:
//!
//! ```text
//! u16 x | u16 y | u32 t_us | u8 polarity (1 = ON, 0 = OFF)
//! ```
//!
//! Text records are CSV lines `x,y,t_us,p` with the same polarity encoding.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BINARY_RECORD_LEN: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    fn as_byte(self) -> u8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => 0,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Polarity::On),
            0 => Some(Polarity::Off),
            _ => None,
        }
    }
}

/// One change-detection event. `t` is microseconds since the start of the
/// recording.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u32, y: u32, t: u64, p: Polarity) -> Self {
        Event { x, y, t, p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u32,
    pub height: u32,
}

impl SensorGeometry {
    /// 304×240 QVGA array.
    pub const QVGA: SensorGeometry = SensorGeometry { width: 304, height: 240 };

    pub fn new(width: u32, height: u32) -> Result<Self, EventError> {
        if width < 2 || height < 2 {
            return Err(EventError::Geometry { width, height });
        }
        Ok(SensorGeometry { width, height })
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        SensorGeometry::QVGA
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Binary,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "binary" => Ok(Format::Binary),
            other => Err(format!("unknown event format `{other}` (expected text|binary)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Binary => "binary",
        })
    }
}

/// Event with its timestamp quantized to the fabric tick. Polarity is gone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TickEvent {
    pub x: u32,
    pub y: u32,
    pub tick: u32,
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("timestamp goes backwards at byte {offset}: {t} µs after {prev} µs")]
    Ordering { offset: usize, prev: u64, t: u64 },
    #[error("event {index} cannot be encoded: {reason}")]
    Encode { index: usize, reason: String },
    #[error("sensor geometry {width}x{height} is too small (need at least 2x2)")]
    Geometry { width: u32, height: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a whole event stream. Events come back in file order; a
/// timestamp smaller than its predecessor is an ordering error.
pub fn read_events<R: Read>(mut source: R, format: Format) -> Result<Vec<Event>, EventError> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    match format {
        Format::Binary => decode_binary(&buf),
        Format::Text => decode_text(&buf),
    }
}

fn decode_binary(buf: &[u8]) -> Result<Vec<Event>, EventError> {
    if buf.len() % BINARY_RECORD_LEN != 0 {
        let offset = buf.len() - buf.len() % BINARY_RECORD_LEN;
        return Err(EventError::Parse {
            offset,
            reason: format!("truncated record ({} trailing bytes)", buf.len() - offset),
        });
    }
    let mut events = Vec::with_capacity(buf.len() / BINARY_RECORD_LEN);
    let mut prev = 0u64;
    for (i, rec) in buf.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let offset = i * BINARY_RECORD_LEN;
        let x = u16::from_le_bytes([rec[0], rec[1]]) as u32;
        let y = u16::from_le_bytes([rec[2], rec[3]]) as u32;
        let t = u32::from_le_bytes([rec[4], rec[5], rec[6], rec[7]]) as u64;
        let p = Polarity::from_byte(rec[8]).ok_or_else(|| EventError::Parse {
            offset: offset + 8,
            reason: format!("invalid polarity byte {:#04x}", rec[8]),
        })?;
        if t < prev {
            return Err(EventError::Ordering { offset, prev, t });
        }
        prev = t;
        events.push(Event { x, y, t, p });
    }
    Ok(events)
}

fn decode_text(buf: &[u8]) -> Result<Vec<Event>, EventError> {
    let text = std::str::from_utf8(buf).map_err(|e| EventError::Parse {
        offset: e.valid_up_to(),
        reason: "stream is not valid UTF-8".into(),
    })?;
    let mut events = Vec::new();
    let mut prev = 0u64;
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_text_line(line, line_offset)?;
        if event.t < prev {
            return Err(EventError::Ordering { offset: line_offset, prev, t: event.t });
        }
        prev = event.t;
        events.push(event);
    }
    Ok(events)
}

fn parse_text_line(line: &str, line_offset: usize) -> Result<Event, EventError> {
    let mut fields = [0u64; 4];
    let mut count = 0;
    let mut field_offset = 0;
    for field in line.split(',') {
        if count == 4 {
            return Err(EventError::Parse {
                offset: line_offset + field_offset,
                reason: "more than 4 fields".into(),
            });
        }
        let trimmed = field.trim();
        fields[count] = trimmed.parse::<u64>().map_err(|_| EventError::Parse {
            offset: line_offset + field_offset,
            reason: format!("field `{trimmed}` is not an unsigned integer"),
        })?;
        count += 1;
        field_offset += field.len() + 1;
    }
    if count != 4 {
        return Err(EventError::Parse {
            offset: line_offset,
            reason: format!("expected 4 fields x,y,t_us,p, found {count}"),
        });
    }
    let coord = |v: u64, name: &str| {
        u32::try_from(v).map_err(|_| EventError::Parse {
            offset: line_offset,
            reason: format!("{name} coordinate {v} out of range"),
        })
    };
    let p = u8::try_from(fields[3])
        .ok()
        .and_then(Polarity::from_byte)
        .ok_or_else(|| EventError::Parse {
            offset: line_offset,
            reason: format!("invalid polarity {}", fields[3]),
        })?;
    Ok(Event { x: coord(fields[0], "x")?, y: coord(fields[1], "y")?, t: fields[2], p })
}

/// Serializes events. Binary output refuses coordinates beyond `u16` and
/// timestamps beyond `u32` microseconds.
pub fn write_events<W: Write>(events: &[Event], format: Format, mut sink: W) -> Result<(), EventError> {
    let mut prev = 0u64;
    for (index, e) in events.iter().enumerate() {
        if e.t < prev {
            return Err(EventError::Encode { index, reason: "events are not time-ordered".into() });
        }
        prev = e.t;
    }
    match format {
        Format::Binary => {
            let mut out = Vec::with_capacity(events.len() * BINARY_RECORD_LEN);
            for (index, e) in events.iter().enumerate() {
                let x = u16::try_from(e.x)
                    .map_err(|_| EventError::Encode { index, reason: format!("x={} exceeds u16", e.x) })?;
                let y = u16::try_from(e.y)
                    .map_err(|_| EventError::Encode { index, reason: format!("y={} exceeds u16", e.y) })?;
                let t = u32::try_from(e.t)
                    .map_err(|_| EventError::Encode { index, reason: format!("t={} µs exceeds u32", e.t) })?;
                out.extend_from_slice(&x.to_le_bytes());
                out.extend_from_slice(&y.to_le_bytes());
                out.extend_from_slice(&t.to_le_bytes());
                out.push(e.p.as_byte());
            }
            sink.write_all(&out)?;
        }
        Format::Text => {
            let mut out = String::with_capacity(events.len() * 16);
            for e in events {
                use std::fmt::Write as _;
                let _ = writeln!(out, "{},{},{},{}", e.x, e.y, e.t, e.p.as_byte());
            }
            sink.write_all(out.as_bytes())?;
        }
    }
    Ok(())
}

/// Maps each event to `floor(t / tick)`; order is preserved. `tick_ms` must
/// be positive.
pub fn quantize_to_ticks(events: &[Event], tick_ms: f64) -> Vec<TickEvent> {
    assert!(tick_ms > 0.0, "tick length must be positive");
    let tick_us = tick_ms * 1000.0;
    let exact = tick_us.fract() == 0.0 && tick_us >= 1.0;
    events
        .iter()
        .map(|e| {
            let tick = if exact {
                e.t / tick_us as u64
            } else {
                (e.t as f64 / tick_us).floor() as u64
            };
            TickEvent { x: e.x, y: e.y, tick: u32::try_from(tick).unwrap_or(u32::MAX) }
        })
        .collect()
}
