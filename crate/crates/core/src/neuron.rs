//! Discrete-tick integer neuron with signed (reversing) leak.
//!
//! One tick, in order:
//!
//! 1. `V += n_exc·w_e − n_inh·w_i`
//! 2. `V += sign(V)·l`, inert at `V = 0` and clamped to 0 if the leak would
//!    cross zero. A negative `l` therefore pulls toward rest from either
//!    side; a positive `l` pushes away from it.
//! 3. if `V ≥ Θ`: spike and `V ← V_r`
//! 4. `V ← max(V, β)`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Potential;

/// Refractory (input copy) excitatory weight; with `l = -254` this is the
/// smallest pair satisfying `w_e + l ≥ Θ` at `Θ = 1`.
pub const REFRACTORY_WEIGHT: i64 = 255;
pub const REFRACTORY_LEAK: i64 = -254;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(bound = "P: Potential")]
pub struct NeuronConfig<P> {
    pub w_exc: P,
    /// Magnitude; applied as `-w_inh` per inhibitory spike.
    pub w_inh: P,
    pub threshold: P,
    pub leak: P,
    pub reset: P,
    pub floor: P,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("threshold must be positive, got {0}")]
    Threshold(i64),
    #[error("floor {floor} must satisfy floor <= 0 <= threshold {threshold}")]
    Floor { floor: i64, threshold: i64 },
    #[error("refractory neuron would not fire from rest: w_e + l = {0} < threshold {1}")]
    RestFiring(i64, i64),
    #[error("refractory period {0} ticks is out of range")]
    RefractoryPeriod(u32),
    #[error("delay {0} ticks is out of range (need at least 2)")]
    Delay(u32),
}

impl<P: Potential> NeuronConfig<P> {
    fn from_i64s(w_exc: i64, w_inh: i64, threshold: i64, leak: i64, reset: i64, floor: i64) -> Self {
        NeuronConfig {
            w_exc: P::from_i64(w_exc),
            w_inh: P::from_i64(w_inh),
            threshold: P::from_i64(threshold),
            leak: P::from_i64(leak),
            reset: P::from_i64(reset),
            floor: P::from_i64(floor),
        }
    }

    /// Input copy with a refractory period close to `tau_r` ticks.
    ///
    /// The reset can only take values `-(2^n - 1)`; `n` is picked to
    /// minimise `|tau_r - (2^n - 1)/254|`. The floor sits at the reset so
    /// the reset is not clipped.
    pub fn refractory(tau_r: u32) -> Result<Self, ConfigError> {
        if tau_r == 0 || tau_r > 1 << 20 {
            return Err(ConfigError::RefractoryPeriod(tau_r));
        }
        let reset = -refractory_reset_magnitude(tau_r);
        let cfg = Self::from_i64s(REFRACTORY_WEIGHT, 0, 1, REFRACTORY_LEAK, reset, reset);
        cfg.check()?;
        Ok(cfg)
    }

    /// Delay line: climbs from the first input to `Θ = tau_d`.
    pub fn delay(tau_d: u32) -> Result<Self, ConfigError> {
        if tau_d < 2 {
            return Err(ConfigError::Delay(tau_d));
        }
        let cfg = Self::from_i64s(1, 0, tau_d as i64, 1, 0, 0);
        cfg.check()?;
        Ok(cfg)
    }

    /// Direction-selective unit. Reset above threshold makes it burst once
    /// per tick until inhibited.
    pub fn direction_selective() -> Self {
        Self::from_i64s(150, 50, 125, -1, 127, -50)
    }

    /// Relay neuron: re-emits every input on the same tick.
    pub fn identity() -> Self {
        Self::from_i64s(1, 0, 1, 0, 0, 0)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let th = self.threshold.to_i64().unwrap_or(0);
        let fl = self.floor.to_i64().unwrap_or(0);
        if th <= 0 {
            return Err(ConfigError::Threshold(th));
        }
        if fl > 0 {
            return Err(ConfigError::Floor { floor: fl, threshold: th });
        }
        Ok(())
    }

    /// Rest-firing condition `w_e + l ≥ Θ` required of refractory copies.
    pub fn fires_from_rest(&self) -> bool {
        self.w_exc + self.leak >= self.threshold
    }

    pub fn check_refractory(&self) -> Result<(), ConfigError> {
        self.check()?;
        if !self.fires_from_rest() {
            let sum = (self.w_exc + self.leak).to_i64().unwrap_or(0);
            return Err(ConfigError::RestFiring(sum, self.threshold.to_i64().unwrap_or(0)));
        }
        Ok(())
    }
}

/// `2^n - 1` closest to `tau_r · 254`.
pub fn refractory_reset_magnitude(tau_r: u32) -> i64 {
    let target = tau_r as f64;
    (1..=30)
        .map(|n| (1i64 << n) - 1)
        .min_by(|a, b| {
            let da = (target - *a as f64 / -REFRACTORY_LEAK as f64).abs();
            let db = (target - *b as f64 / -REFRACTORY_LEAK as f64).abs();
            da.total_cmp(&db)
        })
        .expect("non-empty range")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(bound = "P: Potential")]
pub struct NeuronState<P> {
    pub v: P,
}

impl<P: Potential> NeuronState<P> {
    pub fn rest() -> Self {
        NeuronState { v: P::zero() }
    }

    pub fn at(v: P) -> Self {
        NeuronState { v }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct TickInput {
    pub n_exc: u32,
    pub n_inh: u32,
}

impl TickInput {
    pub const NONE: TickInput = TickInput { n_exc: 0, n_inh: 0 };

    pub fn exc(n: u32) -> Self {
        TickInput { n_exc: n, n_inh: 0 }
    }

    pub fn inh(n: u32) -> Self {
        TickInput { n_exc: 0, n_inh: n }
    }
}

/// Advances one neuron by one tick.
#[inline]
pub fn step<P: Potential>(state: NeuronState<P>, cfg: &NeuronConfig<P>, input: TickInput) -> (NeuronState<P>, bool) {
    let mut v = state.v;
    if input.n_exc > 0 {
        v = v + cfg.w_exc * P::from_i64(input.n_exc as i64);
    }
    if input.n_inh > 0 {
        v = v - cfg.w_inh * P::from_i64(input.n_inh as i64);
    }
    v = apply_leak(v, cfg.leak);
    let spiked = v >= cfg.threshold;
    if spiked {
        v = cfg.reset;
    }
    if v < cfg.floor {
        v = cfg.floor;
    }
    (NeuronState { v }, spiked)
}

#[inline]
fn apply_leak<P: Potential>(v: P, leak: P) -> P {
    if v.is_zero() || leak.is_zero() {
        return v;
    }
    let next = if v > P::zero() { v + leak } else { v - leak };
    // crossing zero saturates at rest
    if (v > P::zero()) != (next > P::zero()) && !next.is_zero() {
        P::zero()
    } else {
        next
    }
}

/// Ticks for a refractory neuron to leak from its reset back to rest when
/// it receives `s` excitatory spikes during recovery:
/// `⌈(|V_r| − w_e·s)/|l|⌉`, or 0 when the inputs cover the whole reset.
pub fn refractory_period_achieved<P: Potential>(cfg: &NeuronConfig<P>, s: u32) -> u32 {
    let reset = cfg.reset.to_i64().unwrap_or(0).abs();
    let w = cfg.w_exc.to_i64().unwrap_or(0);
    let leak = cfg.leak.to_i64().unwrap_or(0).abs();
    let num = reset - w * s as i64;
    if num <= 0 || leak == 0 {
        return 0;
    }
    ((num + leak - 1) / leak) as u32
}

/// Output ticks of a delay neuron fed by spikes emitted at `input_ticks`.
/// An upstream spike emitted at tick `t` is integrated at `t + 1`, so a
/// lone input at `t₁` comes out at `t₁ + τ_d − 1`.
pub fn delay_response<P: Potential>(cfg: &NeuronConfig<P>, input_ticks: &[u32]) -> Vec<u32> {
    let mut arrivals: Vec<u32> = input_ticks.iter().map(|t| t + 1).collect();
    arrivals.sort_unstable();
    let Some(&first) = arrivals.first() else {
        return Vec::new();
    };
    let last = *arrivals.last().expect("non-empty");
    let threshold = cfg.threshold.to_i64().unwrap_or(0).max(1) as u32;
    let horizon = last + threshold + 2;
    let mut state = NeuronState::rest();
    let mut out = Vec::new();
    let mut idx = 0;
    for tick in first..horizon {
        let mut n = 0;
        while idx < arrivals.len() && arrivals[idx] == tick {
            n += 1;
            idx += 1;
        }
        let (next, spiked) = step(state, cfg, TickInput::exc(n));
        state = next;
        if spiked {
            out.push(tick);
        }
    }
    out
}
