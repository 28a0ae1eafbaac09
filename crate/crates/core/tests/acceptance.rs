//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use spikeflow::corenet::{write_spike_log, Direction, Population, PopulationFilter, SpikeLog};
use spikeflow::decode::{decode_flow, extract_bursts, DecodeOptions};
use spikeflow::eval::evaluate;
use spikeflow::neuron::{delay_response, step, NeuronState, TickInput};
use spikeflow::pipeline::{run_pipeline, PipelineConfig, PipelineRun};
use spikeflow::scalar::angle_diff;
use spikeflow::stimulus::Stimulus;
use spikeflow::{compile_flow_network, validate, Neuron, Pipe, SensorGeometry, Spiral, Tiling};

use common::{ev, network, neighbour, opposite, run, two_pixel, TAU_D};

const ANGULAR_LIMIT_DEG: f64 = 15.0;
const REL_AEE_LIMIT: f64 = 0.20;
const DENSITY_MIN: f64 = 0.35;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Reset magnitude `2^n − 1` closest to `τ_r · 254`.
fn oracle_reset(tau_r: u32) -> i64 {
    (1..=30).map(|n| (1i64 << n) - 1).min_by_key(|m| (m - 254 * tau_r as i64).abs()).unwrap()
}

fn oracle_period(reset: i64, s: u32) -> u32 {
    let num = reset - 255 * s as i64;
    if num <= 0 {
        0
    } else {
        ((num + 253) / 254) as u32
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let trains = (1u32..=200, 1u32..=8, vec(any::<u32>(), 100..2000));
    let refractory = runner.run(&trains, |(tau_r, every, raw)| {
        let cfg = Neuron::refractory(tau_r).unwrap();
        let reset = oracle_reset(tau_r);
        prop_assert_eq!(cfg.reset as i64, -reset);
        let mut state = NeuronState::rest();
        let mut last: Option<usize> = None;
        let mut absorbed = 0;
        for (t, r) in raw.iter().enumerate() {
            let input = r % every == 0;
            let (next, spiked) = step(state, &cfg, if input { TickInput::exc(1) } else { TickInput::NONE });
            state = next;
            prop_assert!(!spiked || input, "spike without input at {}", t);
            if spiked {
                if let Some(prev) = last {
                    let isi = (t - prev) as u32;
                    prop_assert!(isi >= oracle_period(reset, absorbed), "isi {} with {} absorbed inputs", isi, absorbed);
                } else {
                    prop_assert_eq!(raw[..t].iter().filter(|r| *r % every == 0).count(), 0);
                }
                last = Some(t);
                absorbed = 0;
            } else if input {
                prop_assert!(last.is_some(), "first input must fire from rest");
                absorbed += 1;
            }
        }
        Ok(())
    });
    if let Err(e) = refractory {
        return verdict(false, format!("refractory: {e}"));
    }

    for tau_d in 2..=100u32 {
        let cfg = Neuron::delay(tau_d).unwrap();
        for t1 in [0u32, 1, 7, 100, 999] {
            let out = delay_response(&cfg, &[t1]);
            if out != vec![t1 + tau_d - 1] {
                return verdict(false, format!("delay tau_d={tau_d} input {t1} gave {out:?}"));
            }
        }
    }

    let ds = Neuron::direction_selective();
    let table = (ds.w_exc, ds.w_inh, ds.threshold, ds.leak, ds.reset, ds.floor);
    if table != (150, 50, 125, -1, 127, -50) {
        return verdict(false, format!("DS parameters {table:?}"));
    }
    for delta in 1..=200u32 {
        let mut s = NeuronState::rest();
        let mut spikes = 0;
        for t in 0..delta + 300 {
            let input = match t {
                0 => TickInput::exc(1),
                t if t == delta => TickInput::inh(1),
                _ => TickInput::NONE,
            };
            let (n, spk) = step(s, &ds, input);
            s = n;
            spikes += spk as u32;
        }
        if spikes != delta || s.v != 0 {
            return verdict(false, format!("DS burst cut at {delta} gave {spikes} spikes"));
        }
    }
    let (after_inh, _) = step(NeuronState::rest(), &ds, TickInput::inh(1));
    let (after_exc, fired) = step(after_inh, &ds, TickInput::exc(1));
    if fired || after_exc.v >= ds.threshold {
        return verdict(false, "excitation right after inhibition fired");
    }
    let mut s = NeuronState::at(ds.floor);
    let mut ticks = 0;
    while s.v != 0 {
        s = step(s, &ds, TickInput::NONE).0;
        ticks += 1;
    }
    if ticks != 50 {
        return verdict(false, format!("DS recovered from floor in {ticks} ticks"));
    }

    let elapsed = start.elapsed();
    verdict(
        elapsed < Duration::from_secs(10),
        format!("10000 refractory trains, delay 2..=100, DS burst lengths 1..=200; {:.2} s (limit 10 s)", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let spec = network(24, 24);
    let mut preferred_bad = Vec::new();
    let mut anti_fired = Vec::new();
    for p in [(5u32, 5u32), (8, 9), (12, 11)] {
        for d in Direction::ALL {
            let q = neighbour(p, d);
            for delta in 1..TAU_D {
                let (bursts, spikes) = two_pixel(&spec, p, q, delta);
                let pref: Vec<u32> = bursts.iter().filter(|b| b.pixel == p && b.direction == d).map(|b| b.length).collect();
                if pref != [delta] {
                    preferred_bad.push((p, d, delta, pref));
                }
                let anti = spikes.iter().filter(|s| s.neuron.pixel == Some(q) && s.neuron.population == Population::Ds(opposite(d))).count();
                if anti != 0 {
                    anti_fired.push((d, delta, anti));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let span = |list: &[(Direction, u32, usize)]| {
        let deltas: Vec<u32> = list.iter().map(|x| x.1).collect();
        match (deltas.iter().min(), deltas.iter().max()) {
            (Some(a), Some(b)) => format!("{a}..={b}"),
            _ => "none".into(),
        }
    };
    let counts: std::collections::BTreeSet<usize> = anti_fired.iter().map(|x| x.2).collect();
    verdict(
        preferred_bad.is_empty() && anti_fired.is_empty() && elapsed < Duration::from_secs(5),
        format!(
            "preferred length == delta in {}/{} cases; anti-preferred neuron fired in {} of {} cases (delta {}, spike counts {:?}); {:.2} s",
            3 * 4 * (TAU_D - 1) as usize - preferred_bad.len(),
            3 * 4 * (TAU_D - 1),
            anti_fired.len(),
            3 * 4 * (TAU_D - 1),
            span(&anti_fired),
            counts,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Verdict {
    let (w, h) = (48u32, 16u32);
    let spec = network(w, h);
    let options = DecodeOptions::for_delay(TAU_D, 1.0);
    let mut worst = 1.0f64;
    let mut notes = Vec::new();
    let mut all_ok = true;
    for n in 1..=20u32 {
        let t0 = 5;
        let events: Vec<_> = (0..w).flat_map(|x| (0..h).map(move |y| ev(x, y, t0 + x * n))).collect();
        let horizon = t0 + w * n + 3 * common::TAU_R;
        let spikes = run(&spec, &events, horizon, PopulationFilter::DS);
        let flow = decode_flow(&extract_bursts(&spikes, horizon), &options);
        let interior: Vec<_> = flow.iter().filter(|e| e.x >= 1 && e.x + 1 < w && e.y >= 1 && e.y + 1 < h).collect();
        let expected = ((w - 2) * (h - 2)) as usize;
        let exact = interior.iter().filter(|e| (e.vx - 1.0 / n as f64).abs() < 1e-12 && e.vy == 0.0).count();
        let near = interior
            .iter()
            .filter(|e| e.vy == 0.0 && e.vx > 0.0 && ((1.0 / e.vx) - n as f64).abs() <= 1.0 + 1e-9)
            .count();
        let frac = if interior.is_empty() { 0.0 } else { exact as f64 / interior.len() as f64 };
        worst = worst.min(frac);
        if interior.len() != expected || frac < 0.95 || near != interior.len() {
            all_ok = false;
            notes.push(format!("n={n}: {exact}/{} exact, {near} within one tick, {expected} interior pixels", interior.len()));
        }
    }
    let detail = if notes.is_empty() {
        format!("n=1..=20, worst exact fraction {:.3}", worst)
    } else {
        notes.join("; ")
    };
    verdict(all_ok, detail)
}

fn criterion_4() -> Verdict {
    let spec = compile_flow_network::<i32>(SensorGeometry::QVGA, Tiling { dx: 6, dy: 6 }, 60, 50).unwrap();
    let report = validate(&spec);
    let s = &report.summary;
    let ok = s.flow_cores == 2040
        && s.neurons_per_flow_core == Some(240)
        && s.relay_cores == 285
        && s.total_cores == 2325
        && report.violations.is_empty();
    verdict(
        ok,
        format!(
            "{} flow cores x {} neurons, {} relay cores, {} total, {} violations",
            s.flow_cores,
            s.neurons_per_flow_core.unwrap_or(0),
            s.relay_cores,
            s.total_cores,
            report.violations.len()
        ),
    )
}

fn thresholds_met(run: &PipelineRun) -> bool {
    let r = &run.report;
    r.mean_abs_angular_error_deg <= ANGULAR_LIMIT_DEG && r.relative_aee <= REL_AEE_LIMIT && r.density >= DENSITY_MIN
}

fn summary(run: &PipelineRun, cfg: &PipelineConfig) -> String {
    let r = &run.report;
    let plain = decode_flow(&extract_bursts(&run.spikes.spikes, run.spikes.horizon), &DecodeOptions::plain(cfg.tick_ms));
    let p = evaluate(&plain, &cfg.stimulus, run.census, &cfg.eval_config());
    format!(
        "angular {:.2} deg (<= {ANGULAR_LIMIT_DEG}), rel AEE {:.3} (<= {REL_AEE_LIMIT}), density {:.3} (>= {DENSITY_MIN}); \
         ratio-of-means AEE {:.3}; plain-difference decoding: angular {:.2} deg, rel AEE {:.3}",
        r.mean_abs_angular_error_deg,
        r.relative_aee,
        r.density,
        r.relative_aee_ratio_of_means,
        p.mean_abs_angular_error_deg,
        p.relative_aee
    )
}

fn criterion_5() -> Verdict {
    let cfg = PipelineConfig::default();
    let start = Instant::now();
    let run = run_pipeline(&cfg).unwrap();
    let elapsed = start.elapsed();
    let ok = cfg.horizon() == 1500 && thresholds_met(&run) && elapsed < Duration::from_secs(180);
    verdict(ok, format!("{} ticks in {:.1} s; {}", cfg.horizon(), elapsed.as_secs_f64(), summary(&run, &cfg)))
}

fn criterion_6(run: &PipelineRun, cfg: &PipelineConfig) -> Verdict {
    let Stimulus::Spiral(model) = &cfg.stimulus else { unreachable!() };
    let latency = cfg.eval_config().latency_ticks as f64;
    let (mut near, mut far) = (Vec::new(), Vec::new());
    for s in &run.report.samples {
        let t = (s.tick as f64 - latency + 0.5) / 1000.0;
        let close = [model.theta_min, model.theta_max].iter().any(|&th| {
            let (ex, ey) = model.location(th, t);
            (ex - s.x as f64).hypot(ey - s.y as f64) <= 3.0
        });
        if close {
            near.push(s.angular_error_deg);
        } else {
            far.push(s.angular_error_deg);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let concentrated = !near.is_empty() && mean(&near) > 2.0 * mean(&far);
    verdict(
        cfg.horizon() == 500 && thresholds_met(run) && concentrated,
        format!(
            "{}; endpoint samples (within 3 px) {} at {:.1} deg mean vs {} elsewhere at {:.2} deg",
            summary(run, cfg),
            near.len(),
            mean(&near),
            far.len(),
            mean(&far)
        ),
    )
}

fn criterion_7() -> Verdict {
    let pipe = Pipe::default();
    let mut worst_speed = 0.0f64;
    let mut worst_dir = 0.0f64;
    for i in 0..=60 {
        let l = -150.0 + 5.0 * i as f64;
        if l.abs() < 1.0 {
            continue;
        }
        for k in 0..=30 {
            let t = 0.05 * k as f64;
            let (fs, fd) = pipe.oracle_fd(l, t, 1e-6);
            worst_speed = worst_speed.max((fs - pipe.speed(l)).abs());
            worst_dir = worst_dir.max(angle_diff(fd, pipe.direction(l, t)).abs());
        }
    }
    let spiral = Spiral::default();
    let (mut speed_rel, mut speed_abs_rel, mut dir_err, mut n) = (0.0f64, 0.0f64, 0.0f64, 0);
    let mut worst_spiral_dir = 0.0f64;
    for i in 0..=200 {
        let th = spiral.theta_min + (spiral.theta_max - spiral.theta_min) * i as f64 / 200.0;
        for k in 0..10 {
            let t = 0.05 * k as f64;
            let (fs, fd) = spiral.oracle_fd(th, t, 1e-6);
            let ps = spiral.printed_speed(th);
            speed_rel += (ps - fs) / fs;
            speed_abs_rel += (ps.abs() - fs) / fs;
            let de = angle_diff(spiral.printed_direction(th, t), fd).abs().to_degrees();
            dir_err += de;
            worst_spiral_dir = worst_spiral_dir.max(de);
            n += 1;
        }
    }
    let n = n as f64;
    let finite = speed_rel.is_finite() && dir_err.is_finite();
    verdict(
        worst_speed <= 1e-6 && worst_dir <= 1e-6 && finite,
        format!(
            "pipe analytic vs FD: max |dspeed| {:.2e} px/ms, max |ddir| {:.2e} rad (<= 1e-6); \
             spiral printed vs FD: mean speed error {:+.4} (signed), {:+.4} (magnitude), mean direction error {:.2} deg, max {:.2} deg",
            worst_speed,
            worst_dir,
            speed_rel / n,
            speed_abs_rel / n,
            dir_err / n,
            worst_spiral_dir
        ),
    )
}

fn log_bytes(log: &SpikeLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_spike_log(log, &mut buf).unwrap();
    buf
}

fn criterion_8(first: &PipelineRun, cfg: &PipelineConfig) -> Verdict {
    let a = log_bytes(&first.spikes);
    let b = log_bytes(&run_pipeline(cfg).unwrap().spikes);
    let parallel = PipelineConfig { parallel: true, ..cfg.clone() };
    let c = log_bytes(&run_pipeline(&parallel).unwrap().spikes);
    verdict(
        a == b && a == c,
        format!("spiral spike log {} bytes; serial rerun identical: {}; parallel identical: {}", a.len(), a == b, a == c),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() -> ExitCode {
    let spiral_cfg = PipelineConfig::spiral();
    let spiral = catch_unwind(|| run_pipeline(&spiral_cfg).unwrap()).ok();
    let with_spiral = |f: fn(&PipelineRun, &PipelineConfig) -> Verdict| -> Verdict {
        match &spiral {
            Some(run) => guarded(|| f(run, &spiral_cfg)),
            None => verdict(false, "spiral pipeline failed"),
        }
    };

    let results = [
        ("neuron exactness", guarded(criterion_1)),
        ("burst-length theorem", guarded(criterion_2)),
        ("quantization", guarded(criterion_3)),
        ("resource formulas", guarded(criterion_4)),
        ("pipe end-to-end", guarded(criterion_5)),
        ("spiral end-to-end", with_spiral(criterion_6)),
        ("ground-truth oracle", guarded(criterion_7)),
        ("determinism", with_spiral(criterion_8)),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("{} {}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        failed += !v.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
