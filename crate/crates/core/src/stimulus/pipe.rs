use serde::{Deserialize, Serialize};

use super::{check_center, normal_flow, seconds_to_us, sort_events, GroundTruthSample, StimulusError};
use crate::events::{Event, Polarity, SensorGeometry};
use crate::scalar::{wrap_angle, Real};

/// Dark bar of width `width` and length `2·half_length` rotating about its
/// midpoint. Angular velocity in rad/s, duration in seconds, lengths in
/// pixels. At `t = 0` the bar is aligned with the image y axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "F: Serialize", deserialize = "F: Real"))]
pub struct PipeModel<F> {
    pub center: (F, F),
    pub half_length: F,
    pub width: F,
    pub angular_velocity: F,
    pub duration: F,
}

impl<F: Real> Default for PipeModel<F> {
    fn default() -> Self {
        PipeModel {
            center: (F::lit(152.0), F::lit(120.0)),
            half_length: F::lit(150.0),
            width: F::lit(10.0),
            angular_velocity: F::lit(2.21),
            duration: F::lit(1.5),
        }
    }
}

impl<F: Real> PipeModel<F> {
    pub fn validate(&self) -> Result<(), StimulusError> {
        if self.angular_velocity == F::zero() || !self.angular_velocity.is_finite() {
            return Err(StimulusError::Model("pipe angular velocity must be non-zero".into()));
        }
        if !(self.half_length > F::zero()) {
            return Err(StimulusError::Model("pipe half length must be positive".into()));
        }
        if !(self.width >= F::one()) {
            return Err(StimulusError::Model("pipe width must be at least one pixel".into()));
        }
        if !(self.duration > F::zero()) {
            return Err(StimulusError::Model("pipe duration must be positive".into()));
        }
        Ok(())
    }

    /// Signed edge offsets across the bar.
    pub fn edges(&self) -> [F; 2] {
        let half = self.width / F::lit(2.0);
        [half, -half]
    }

    /// Image position of the point at offset `edge` across and `l` along
    /// the bar at time `t` seconds.
    pub fn location(&self, edge: F, l: F, t: F) -> (F, F) {
        let (s, c) = (self.angular_velocity * t).sin_cos();
        (self.center.0 + c * edge - s * l, self.center.1 + s * edge + c * l)
    }

    /// Bar-frame coordinates `(across, along)` of an image point.
    pub fn body_coords(&self, x: F, y: F, t: F) -> (F, F) {
        let (s, c) = (self.angular_velocity * t).sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// `|l|·|ω|` converted to px/ms.
    pub fn speed(&self, l: F) -> F {
        l.abs() * self.angular_velocity.abs() / F::lit(1000.0)
    }

    /// `ωt` on one half of the bar, `ωt + π` on the other; the half that
    /// gets the extra `π` is the one with `l·ω > 0`.
    pub fn direction(&self, l: F, t: F) -> F {
        let base = self.angular_velocity * t;
        if l * self.angular_velocity > F::zero() {
            wrap_angle(base + F::PI())
        } else {
            wrap_angle(base)
        }
    }

    pub fn ground_truth_at(&self, x: F, y: F, t_us: F, radius: F) -> Option<GroundTruthSample<F>> {
        let t = t_us / F::lit(1e6);
        let (bx, by) = self.body_coords(x, y, t);
        let l = by.max(-self.half_length).min(self.half_length);
        self.edges()
            .into_iter()
            .map(|e| {
                let d = ((bx - e) * (bx - e) + (by - l) * (by - l)).sqrt();
                (e, d)
            })
            .filter(|(_, d)| *d <= radius)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(e, d)| {
                let (px, py) = self.location(e, l, t);
                GroundTruthSample {
                    x: px,
                    y: py,
                    t: t_us,
                    speed: self.speed(l),
                    direction: self.direction(l, t),
                    param: l,
                    distance: d,
                }
            })
    }

    /// Central differences of [`PipeModel::location`] in time, projected on
    /// the normal of the edge tangent (itself a central difference in `l`).
    pub fn oracle_fd(&self, l: F, t: F, h: F) -> (F, F) {
        let e = self.edges()[0];
        let two_h = h + h;
        let (a, b) = (self.location(e, l, t + h), self.location(e, l, t - h));
        let v = ((a.0 - b.0) / two_h, (a.1 - b.1) / two_h);
        let dl = F::lit(1e-3);
        let (c, d) = (self.location(e, l + dl, t), self.location(e, l - dl, t));
        let tangent = ((c.0 - d.0) / (dl + dl), (c.1 - d.1) / (dl + dl));
        normal_flow(v, tangent)
    }
}

/// All edge passages over pixel centers within `[0, duration)`. Entering
/// the dark bar is an OFF event, leaving it is ON.
pub fn generate_pipe_events<F: Real>(model: &PipeModel<F>, geometry: SensorGeometry) -> Result<Vec<Event>, StimulusError> {
    model.validate()?;
    check_center(model.center, geometry)?;
    let omega = model.angular_velocity;
    let sweep = omega * model.duration;
    let (lo, hi) = if sweep < F::zero() { (sweep, F::zero()) } else { (F::zero(), sweep) };
    let tau = F::TAU();
    let mut events = Vec::new();
    for y in 0..geometry.height {
        for x in 0..geometry.width {
            let dx = F::from_u32(x).unwrap() - model.center.0;
            let dy = F::from_u32(y).unwrap() - model.center.1;
            let rho = (dx * dx + dy * dy).sqrt();
            let phi = dy.atan2(dx);
            for e in model.edges() {
                // a grazing edge touches the pixel without crossing it
                if rho <= e.abs() {
                    continue;
                }
                // across(t) = ρ·cos(ωt − φ) = e
                let a = (e / rho).max(-F::one()).min(F::one()).acos();
                for base in [phi + a, phi - a] {
                    let k_lo = ((lo - base) / tau).ceil().to_i64().unwrap_or(0);
                    let k_hi = ((hi - base) / tau).floor().to_i64().unwrap_or(-1);
                    for k in k_lo..=k_hi {
                        let angle = base + tau * F::from_i64(k).unwrap();
                        let t = angle / omega;
                        if t < F::zero() || t >= model.duration {
                            continue;
                        }
                        let along = rho * (phi - angle).sin();
                        if along.abs() > model.half_length {
                            continue;
                        }
                        // d(across)/dt = ω·along; moving toward the axis means entering
                        let entering = omega * along * e < F::zero();
                        let p = if entering { Polarity::Off } else { Polarity::On };
                        events.push(Event { x, y, t: seconds_to_us(t), p });
                    }
                }
            }
        }
    }
    if events.is_empty() {
        log::warn!("pipe model produces no events on a {}x{} sensor", geometry.width, geometry.height);
    }
    sort_events(&mut events);
    Ok(events)
}
