//! Synthetic stimuli with analytic motion: a rotating pipe (two parallel
//! edges) and a rotating logarithmic spiral.
//!
//! Events are emitted whenever a model edge passes over a pixel center.
//! Crossing times are solved in closed form per pixel, so every
//! (pixel, edge passage) pair yields exactly one event.

mod pipe;
mod spiral;

pub use pipe::{generate_pipe_events, PipeModel};
pub use spiral::{generate_spiral_events, SpiralModel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Event, Polarity, SensorGeometry};
use crate::scalar::{wrap_angle, Real};

/// Analytic normal flow at one edge point. `speed` is px/ms, `direction`
/// is the angle of the normal-flow vector in image coordinates (x right,
/// y down), in `[0, 2π)`. `param` is the edge parameter of the matched
/// point (`l` for the pipe, `θ₀` for the spiral).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSample<F> {
    pub x: F,
    pub y: F,
    pub t: F,
    pub speed: F,
    pub direction: F,
    pub param: F,
    /// Distance from the query point to the matched edge point.
    pub distance: F,
}

impl<F: Real> GroundTruthSample<F> {
    pub fn velocity(&self) -> (F, F) {
        (self.speed * self.direction.cos(), self.speed * self.direction.sin())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StimulusError {
    #[error("invalid stimulus model: {0}")]
    Model(String),
    #[error("model center ({x}, {y}) lies outside the {width}x{height} sensor")]
    CenterOutside { x: f64, y: f64, width: u32, height: u32 },
}

/// Either stimulus, selectable from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Real"))]
pub enum Stimulus<F> {
    Pipe(PipeModel<F>),
    Spiral(SpiralModel<F>),
}

impl<F: Real> Stimulus<F> {
    pub fn generate(&self, geometry: SensorGeometry) -> Result<Vec<Event>, StimulusError> {
        match self {
            Stimulus::Pipe(m) => generate_pipe_events(m, geometry),
            Stimulus::Spiral(m) => generate_spiral_events(m, geometry),
        }
    }

    pub fn ground_truth_at(&self, x: F, y: F, t_us: F, radius: F) -> Option<GroundTruthSample<F>> {
        match self {
            Stimulus::Pipe(m) => m.ground_truth_at(x, y, t_us, radius),
            Stimulus::Spiral(m) => m.ground_truth_at(x, y, t_us, radius),
        }
    }

    /// Finite-difference normal flow `(speed px/ms, direction rad)`.
    pub fn oracle_fd(&self, param: F, t: F, h: F) -> (F, F) {
        match self {
            Stimulus::Pipe(m) => m.oracle_fd(param, t, h),
            Stimulus::Spiral(m) => m.oracle_fd(param, t, h),
        }
    }

    pub fn duration(&self) -> F {
        match self {
            Stimulus::Pipe(m) => m.duration,
            Stimulus::Spiral(m) => m.duration,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stimulus::Pipe(_) => "pipe",
            Stimulus::Spiral(_) => "spiral",
        }
    }
}

/// Normal-flow speed and direction from an edge-point velocity and the
/// local edge tangent, both in px/s. Returns `(px/ms, rad)`.
pub(crate) fn normal_flow<F: Real>(velocity: (F, F), tangent: (F, F)) -> (F, F) {
    let norm = (tangent.0 * tangent.0 + tangent.1 * tangent.1).sqrt();
    let n = (-tangent.1 / norm, tangent.0 / norm);
    let vn = velocity.0 * n.0 + velocity.1 * n.1;
    let flow = (vn * n.0, vn * n.1);
    let speed = vn.abs() / F::lit(1000.0);
    (speed, wrap_angle(flow.1.atan2(flow.0)))
}

pub(crate) fn seconds_to_us<F: Real>(t: F) -> u64 {
    (t * F::lit(1e6)).round().to_u64().unwrap_or(0)
}

pub(crate) fn check_center<F: Real>(center: (F, F), geometry: SensorGeometry) -> Result<(), StimulusError> {
    let (x, y) = (center.0.to_f64_lossy(), center.1.to_f64_lossy());
    if !(x >= 0.0 && y >= 0.0 && x <= (geometry.width - 1) as f64 && y <= (geometry.height - 1) as f64) {
        return Err(StimulusError::CenterOutside { x, y, width: geometry.width, height: geometry.height });
    }
    Ok(())
}

pub(crate) fn sort_events(events: &mut [Event]) {
    events.sort_by_key(|e| (e.t, e.y, e.x, e.p));
}

/// Adds Poisson background events at `rate_hz` per pixel over
/// `[0, duration_s)`; deterministic for a given seed. Output is
/// time-sorted.
pub fn inject_noise(events: &[Event], geometry: SensorGeometry, rate_hz: f64, duration_s: f64, seed: u64) -> Vec<Event> {
    let mut out = events.to_vec();
    let mean = rate_hz * duration_s * geometry.pixel_count() as f64;
    if mean > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Poisson::new(mean).map(|d| d.sample(&mut rng) as u64).unwrap_or(0);
        let span_us = (duration_s * 1e6) as u64;
        for _ in 0..n {
            let x = rng.random_range(0..geometry.width);
            let y = rng.random_range(0..geometry.height);
            let t = if span_us == 0 { 0 } else { rng.random_range(0..span_us) };
            let p = if rng.random::<bool>() { Polarity::On } else { Polarity::Off };
            out.push(Event { x, y, t, p });
        }
    }
    sort_events(&mut out);
    out
}

/// Golden-section minimisation of `f` over `[lo, hi]`.
pub(crate) fn golden_min<F: Real>(mut lo: F, mut hi: F, iters: usize, f: impl Fn(F) -> F) -> (F, F) {
    let g = F::lit(0.618_033_988_749_894_8);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    let x = (lo + hi) / F::lit(2.0);
    (x, f(x))
}
