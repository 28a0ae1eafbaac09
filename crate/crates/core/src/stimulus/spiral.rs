use serde::{Deserialize, Serialize};

use super::{check_center, golden_min, normal_flow, seconds_to_us, sort_events, GroundTruthSample, StimulusError};
use crate::events::{Event, Polarity, SensorGeometry};
use crate::scalar::{wrap_angle, Real};

/// Logarithmic spiral `r(θ₀) = 2^(θ₀/π)` rotating about `center`. The edge
/// point with parameter `θ₀` sits at polar angle `ωt − θ₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "F: Serialize", deserialize = "F: Real"))]
pub struct SpiralModel<F> {
    pub center: (F, F),
    pub theta_min: F,
    pub theta_max: F,
    pub angular_velocity: F,
    pub duration: F,
}

impl<F: Real> Default for SpiralModel<F> {
    fn default() -> Self {
        SpiralModel {
            center: (F::lit(152.0), F::lit(120.0)),
            theta_min: F::zero(),
            theta_max: F::lit(20.0),
            angular_velocity: F::lit(-12.57),
            duration: F::lit(0.5),
        }
    }
}

impl<F: Real> SpiralModel<F> {
    pub fn validate(&self) -> Result<(), StimulusError> {
        if self.angular_velocity == F::zero() || !self.angular_velocity.is_finite() {
            return Err(StimulusError::Model("spiral angular velocity must be non-zero".into()));
        }
        if !(self.theta_max > self.theta_min) {
            return Err(StimulusError::Model("spiral theta range is empty".into()));
        }
        if !(self.duration > F::zero()) {
            return Err(StimulusError::Model("spiral duration must be positive".into()));
        }
        Ok(())
    }

    pub fn radius(&self, theta0: F) -> F {
        F::lit(2.0).powf(theta0 / F::PI())
    }

    /// Seconds per full turn.
    pub fn rotation_period(&self) -> F {
        F::TAU() / self.angular_velocity.abs()
    }

    pub fn location(&self, theta0: F, t: F) -> (F, F) {
        let r = self.radius(theta0);
        let (s, c) = (self.angular_velocity * t - theta0).sin_cos();
        (self.center.0 + r * c, self.center.1 + r * s)
    }

    /// `2^(θ₀/π)·(ln2/π)·ω / cos(ln2/(πω))` as written for the recording,
    /// converted to px/ms. Kept for comparison against the oracle; note it
    /// is signed by `ω`.
    pub fn printed_speed(&self, theta0: F) -> F {
        let k = F::LN_2() / F::PI();
        self.radius(theta0) * k * self.angular_velocity / (k / self.angular_velocity).cos() / F::lit(1000.0)
    }

    /// `−θ₀ + tω + sin(ln2/(πω))`, wrapped to `[0, 2π)`.
    pub fn printed_direction(&self, theta0: F, t: F) -> F {
        let k = F::LN_2() / F::PI();
        wrap_angle(-theta0 + t * self.angular_velocity + (k / self.angular_velocity).sin())
    }

    /// Finite-difference normal flow at `θ₀`: the point velocity is a
    /// central difference in `t`, the edge tangent a central difference in
    /// `θ₀`.
    pub fn oracle_fd(&self, theta0: F, t: F, h: F) -> (F, F) {
        let two_h = h + h;
        let (a, b) = (self.location(theta0, t + h), self.location(theta0, t - h));
        let v = ((a.0 - b.0) / two_h, (a.1 - b.1) / two_h);
        let d = F::lit(1e-5);
        let (c, e) = (self.location(theta0 + d, t), self.location(theta0 - d, t));
        let tangent = ((c.0 - e.0) / (d + d), (c.1 - e.1) / (d + d));
        normal_flow(v, tangent)
    }

    /// Spiral parameter of the edge point closest to `(x, y)` at `t`
    /// seconds, with its distance.
    pub fn nearest_point(&self, x: F, y: F, t: F) -> (F, F) {
        let dist2 = |th: F| {
            let (px, py) = self.location(th, t);
            (px - x) * (px - x) + (py - y) * (py - y)
        };
        let phi = (y - self.center.1).atan2(x - self.center.0);
        let tau = F::TAU();
        // edge points on the ray through the query sit at θ₀ ≡ ωt − φ (mod 2π)
        let base = self.angular_velocity * t - phi;
        let k_lo = ((self.theta_min - base) / tau).ceil().to_i64().unwrap_or(0) - 1;
        let k_hi = ((self.theta_max - base) / tau).floor().to_i64().unwrap_or(0) + 1;
        let mut best = (self.theta_min, dist2(self.theta_min));
        let end = (self.theta_max, dist2(self.theta_max));
        if end.1 < best.1 {
            best = end;
        }
        let half = F::FRAC_PI_2();
        for k in k_lo..=k_hi {
            let c = base + tau * F::from_i64(k).unwrap();
            let lo = (c - half).max(self.theta_min);
            let hi = (c + half).min(self.theta_max);
            if hi <= lo {
                continue;
            }
            let cand = golden_min(lo, hi, 60, dist2);
            if cand.1 < best.1 {
                best = cand;
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn ground_truth_at(&self, x: F, y: F, t_us: F, radius: F) -> Option<GroundTruthSample<F>> {
        let t = t_us / F::lit(1e6);
        let (theta0, distance) = self.nearest_point(x, y, t);
        if distance > radius {
            return None;
        }
        let (speed, direction) = self.oracle_fd(theta0, t, F::lit(1e-6));
        let (px, py) = self.location(theta0, t);
        Some(GroundTruthSample { x: px, y: py, t: t_us, speed, direction, param: theta0, distance })
    }
}

/// One event per pixel-center crossing of the spiral edge. Polarity is ON
/// when the edge's normal motion points away from the center.
pub fn generate_spiral_events<F: Real>(model: &SpiralModel<F>, geometry: SensorGeometry) -> Result<Vec<Event>, StimulusError> {
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
            if rho <= F::zero() {
                continue;
            }
            let theta0 = F::PI() * rho.log2();
            if theta0 < model.theta_min || theta0 > model.theta_max {
                continue;
            }
            let phi = dy.atan2(dx);
            // ωt − θ₀ ≡ φ (mod 2π)
            let base = phi + theta0;
            let k_lo = ((lo - base) / tau).ceil().to_i64().unwrap_or(0);
            let k_hi = ((hi - base) / tau).floor().to_i64().unwrap_or(-1);
            for k in k_lo..=k_hi {
                let t = (base + tau * F::from_i64(k).unwrap()) / omega;
                if t < F::zero() || t >= model.duration {
                    continue;
                }
                let (_, dir) = model.oracle_fd(theta0, t, F::lit(1e-6));
                let outward = dir.cos() * dx + dir.sin() * dy >= F::zero();
                let p = if outward { Polarity::On } else { Polarity::Off };
                events.push(Event { x, y, t: seconds_to_us(t), p });
            }
        }
    }
    if events.is_empty() {
        log::warn!("spiral model produces no events on a {}x{} sensor", geometry.width, geometry.height);
    }
    sort_events(&mut events);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_law() {
        let m = SpiralModel::<f64>::default();
        assert_eq!(m.radius(0.0), 1.0);
        assert!((m.radius(std::f64::consts::PI) - 2.0).abs() < 1e-12);
        assert!((m.radius(20.0) - 82.49).abs() < 0.01, "{}", m.radius(20.0));
    }

    #[test]
    fn rotation_period_is_half_a_second() {
        let m = SpiralModel::<f64>::default();
        assert!((m.rotation_period() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn nearest_point_recovers_edge_parameter() {
        let m = SpiralModel::<f64>::default();
        for &(th, t) in &[(3.0, 0.1), (12.5, 0.37), (19.0, 0.02)] {
            let (x, y) = m.location(th, t);
            let (found, d) = m.nearest_point(x, y, t);
            assert!(d < 1e-6, "distance {d}");
            assert!((found - th).abs() < 1e-5);
        }
    }

    #[test]
    fn every_event_lies_on_the_curve() {
        let m = SpiralModel::<f64>::default();
        let events = generate_spiral_events(&m, SensorGeometry::QVGA).unwrap();
        assert!(events.len() > 10_000);
        for e in events.iter().step_by(97) {
            let (_, d) = m.nearest_point(e.x as f64, e.y as f64, e.t as f64 / 1e6);
            // timestamps are rounded to 1 µs; the edge moves < 1.1 px/ms
            assert!(d < 0.01, "event {e:?} is {d} px off the edge");
        }
    }
}
