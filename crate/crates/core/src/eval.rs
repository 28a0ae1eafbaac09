//! Accuracy of decoded flow against the stimulus ground truth.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corenet::DS_LATENCY_TICKS;
use crate::decode::FlowEstimate;
use crate::scalar::{angle_diff, Real};
use crate::stimulus::Stimulus;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct EvalConfig<F> {
    /// Maximum distance in pixels from an estimate to the matched edge.
    pub match_radius: F,
    /// Ticks searched either side of the estimate's event time.
    pub time_tolerance: u32,
    pub tick_ms: F,
    /// Ticks from the sensor event to the DS burst start.
    pub latency_ticks: u32,
}

impl<F: Real> Default for EvalConfig<F> {
    fn default() -> Self {
        EvalConfig { match_radius: F::lit(1.5), time_tolerance: 2, tick_ms: F::one(), latency_ticks: DS_LATENCY_TICKS }
    }
}

/// One estimate paired with its ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchedSample<F> {
    pub x: u32,
    pub y: u32,
    pub tick: u32,
    pub angular_error_deg: F,
    pub endpoint_error: F,
    /// `None` when the true speed is zero.
    pub relative_error: Option<F>,
    pub true_speed: F,
    /// Edge parameter of the matched point.
    pub param: F,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PixelError<F> {
    pub x: u32,
    pub y: u32,
    pub count: usize,
    pub mean_angular_error_deg: F,
    pub mean_endpoint_error: F,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport<F> {
    pub stimulus: String,
    pub estimates: usize,
    pub matched: usize,
    /// Estimates with no edge within the match radius and time tolerance.
    pub unmatched: usize,
    pub census: usize,
    pub density: F,
    pub mean_abs_angular_error_deg: F,
    pub median_abs_angular_error_deg: F,
    /// Mean of per-sample `‖v_est − v_gt‖ / ‖v_gt‖`.
    pub relative_aee: F,
    /// `mean ‖v_est − v_gt‖ / mean ‖v_gt‖`.
    pub relative_aee_ratio_of_means: F,
    /// px/ms.
    pub absolute_aee: F,
    /// Matched samples left out of `relative_aee` for zero true speed.
    pub excluded_zero_speed: usize,
    #[serde(skip)]
    pub samples: Vec<MatchedSample<F>>,
    #[serde(skip)]
    pub error_map: Vec<PixelError<F>>,
}

impl<F: Real> EvalReport<F> {
    pub fn passes(&self, max_aae_deg: Option<F>, max_rel_aee: Option<F>) -> bool {
        max_aae_deg.is_none_or(|m| self.mean_abs_angular_error_deg <= m) && max_rel_aee.is_none_or(|m| self.relative_aee <= m)
    }

    pub fn to_toml(&self) -> String
    where
        F: Serialize,
    {
        toml::to_string(self).expect("report fields are plain scalars")
    }

    pub fn write_error_map<W: Write>(&self, sink: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(sink);
        writeln!(w, "x,y,count,mean_angular_error_deg,mean_endpoint_error")?;
        for p in &self.error_map {
            writeln!(w, "{},{},{},{},{}", p.x, p.y, p.count, p.mean_angular_error_deg, p.mean_endpoint_error)?;
        }
        w.flush()
    }
}

fn match_one<F: Real>(e: &FlowEstimate<F>, stimulus: &Stimulus<F>, cfg: &EvalConfig<F>) -> Option<MatchedSample<F>> {
    let base = e.tick as i64 - cfg.latency_ticks as i64;
    let tol = cfg.time_tolerance as i64;
    let (x, y) = (F::from_u32(e.x)?, F::from_u32(e.y)?);
    let mut best: Option<(i64, crate::stimulus::GroundTruthSample<F>)> = None;
    for off in -tol..=tol {
        let t = base + off;
        if t < 0 {
            continue;
        }
        let t_us = (F::from_i64(t)? + F::lit(0.5)) * cfg.tick_ms * F::lit(1000.0);
        if let Some(gt) = stimulus.ground_truth_at(x, y, t_us, cfg.match_radius) {
            let better = match &best {
                None => true,
                Some((bo, b)) => gt.distance < b.distance || (gt.distance == b.distance && off.abs() < bo.abs()),
            };
            if better {
                best = Some((off, gt));
            }
        }
    }
    let (_, gt) = best?;
    let (gx, gy) = gt.velocity();
    let err = angle_diff(e.direction(), gt.direction).abs().to_degrees();
    let epe = (e.vx - gx).hypot(e.vy - gy);
    let relative_error = (gt.speed > F::epsilon()).then(|| epe / gt.speed);
    Some(MatchedSample {
        x: e.x,
        y: e.y,
        tick: e.tick,
        angular_error_deg: err,
        endpoint_error: epe,
        relative_error,
        true_speed: gt.speed,
        param: gt.param,
    })
}

fn mean<F: Real>(values: impl Iterator<Item = F>) -> F {
    let (sum, n) = values.fold((F::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        F::zero()
    } else {
        sum / F::from_usize(n).expect("count fits")
    }
}

/// Matches every estimate to the ground truth and aggregates the errors.
/// `census` is the number of (pixel, edge passage) pairs the stimulus
/// produced. Aggregation runs in a fixed sample order, so the report does
/// not depend on the order of `estimates`.
pub fn evaluate<F: Real + Serialize>(
    estimates: &[FlowEstimate<F>],
    stimulus: &Stimulus<F>,
    census: usize,
    cfg: &EvalConfig<F>,
) -> EvalReport<F> {
    let mut samples: Vec<MatchedSample<F>> = estimates.par_iter().filter_map(|e| match_one(e, stimulus, cfg)).collect();
    samples.sort_by(|a, b| {
        (a.tick, a.y, a.x)
            .cmp(&(b.tick, b.y, b.x))
            .then(a.angular_error_deg.partial_cmp(&b.angular_error_deg).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.endpoint_error.partial_cmp(&b.endpoint_error).unwrap_or(std::cmp::Ordering::Equal))
    });

    let matched = samples.len();
    let mut angles: Vec<F> = samples.iter().map(|s| s.angular_error_deg).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = if angles.is_empty() {
        F::zero()
    } else if angles.len() % 2 == 1 {
        angles[angles.len() / 2]
    } else {
        (angles[angles.len() / 2 - 1] + angles[angles.len() / 2]) / F::lit(2.0)
    };
    let absolute_aee = mean(samples.iter().map(|s| s.endpoint_error));
    let mean_speed = mean(samples.iter().map(|s| s.true_speed));
    let excluded = samples.iter().filter(|s| s.relative_error.is_none()).count();

    let mut per_pixel: BTreeMap<(u32, u32), (usize, F, F)> = BTreeMap::new();
    for s in &samples {
        let e = per_pixel.entry((s.y, s.x)).or_insert((0, F::zero(), F::zero()));
        e.0 += 1;
        e.1 = e.1 + s.angular_error_deg;
        e.2 = e.2 + s.endpoint_error;
    }
    let error_map = per_pixel
        .into_iter()
        .map(|((y, x), (n, a, p))| {
            let nf = F::from_usize(n).expect("count fits");
            PixelError { x, y, count: n, mean_angular_error_deg: a / nf, mean_endpoint_error: p / nf }
        })
        .collect();

    EvalReport {
        stimulus: stimulus.name().to_string(),
        estimates: estimates.len(),
        matched,
        unmatched: estimates.len() - matched,
        census,
        density: if census == 0 { F::zero() } else { F::from_usize(matched).unwrap() / F::from_usize(census).unwrap() },
        mean_abs_angular_error_deg: mean(angles.iter().copied()),
        median_abs_angular_error_deg: median,
        relative_aee: mean(samples.iter().filter_map(|s| s.relative_error)),
        relative_aee_ratio_of_means: if mean_speed > F::zero() { absolute_aee / mean_speed } else { F::zero() },
        absolute_aee,
        excluded_zero_speed: excluded,
        samples,
        error_map,
    }
}
