//! Hitting time of state 1 from state 2, and the full 1 -> 1 return time.
//!
//! Two samplers are provided. [`simulate_hitting_direct`] runs the embedded
//! jump chain until it reaches state 1 or exhausts a step budget.
//! [`simulate_hitting_hybrid`] runs the same chain only while the elapsed
//! time stays below `t_min = 1/p`; once the threshold is crossed the partial
//! path is abandoned and the hitting time is drawn from the critical tail law
//! `P(H > t | H > t_min) = t_min / t`.

use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::random::{exponential_quantile, sample_pareto_tail, RandomStream, TailLaw};

/// Per-capita rates of the chain: births at `lambda * N`, deaths at `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    lambda: f64,
}

impl ModelParams {
    pub fn new(lambda: f64) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        Ok(Self { lambda })
    }

    /// Birth and death rates balance (`lambda = 1`).
    pub fn critical() -> Self {
        Self { lambda: 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_critical(&self) -> bool {
        self.lambda == 1.0
    }

    /// Total jump rate out of `state`: `state * (1 + lambda)`.
    pub fn jump_rate(&self, state: u64) -> f64 {
        state as f64 * (1.0 + self.lambda)
    }

    /// Probability that a jump is a birth: `lambda / (1 + lambda)`.
    pub fn birth_probability(&self) -> f64 {
        self.lambda / (1.0 + self.lambda)
    }
}

/// Threshold setup of the hybrid sampler. Only the critical chain is
/// supported; the tail constant is known only there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    p: f64,
    t_min: f64,
}

impl HybridConfig {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("p", format!("tail probability must lie in (0, 1), got {p}")));
        }
        Ok(Self { p, t_min: 1.0 / p })
    }

    /// Rejects any `lambda` other than 1.
    pub fn for_model(p: f64, params: &ModelParams) -> Result<Self> {
        if !params.is_critical() {
            return Err(Error::UnsupportedRegime(format!(
                "hybrid sampling needs the critical chain (lambda = 1), got lambda = {}",
                params.lambda()
            )));
        }
        Self::new(p)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn lambda(&self) -> f64 {
        1.0
    }

    pub fn tail_law(&self) -> TailLaw {
        TailLaw::critical(self.t_min).expect("t_min = 1/p is finite and positive")
    }
}

/// How a record's hitting time was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// State 1 reached by the simulated chain (below the threshold in hybrid mode).
    Direct,
    /// Threshold exceeded; `h` replaced by a tail draw.
    TailDrawn,
    /// Direct mode only: step budget exhausted before reaching state 1.
    Censored,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Direct, Outcome::TailDrawn, Outcome::Censored];

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Direct => "direct",
            Outcome::TailDrawn => "tail",
            Outcome::Censored => "censored",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Outcome::Direct),
            "tail" => Ok(Outcome::TailDrawn),
            "censored" => Ok(Outcome::Censored),
            other => Err(invalid("outcome", format!("unknown outcome `{other}`"))),
        }
    }
}

/// One simulated excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    /// Hitting time of state 1 from state 2.
    pub h: f64,
    /// Initial exponential dwell in state 1.
    pub x: f64,
    /// `x + h`.
    pub return_time: f64,
    /// Jumps of the embedded chain actually applied.
    pub steps: u64,
    /// Chain state when the direct simulation stopped.
    pub final_state: u64,
    pub outcome: Outcome,
}

impl SimRecord {
    fn new(h: f64, x: f64, steps: u64, final_state: u64, outcome: Outcome) -> Self {
        Self {
            h,
            x,
            return_time: x + h,
            steps,
            final_state,
            outcome,
        }
    }
}

/// One jump of the embedded chain out of `state`: the exponential dwell and
/// the direction (`+1` birth, `-1` death).
pub fn step_embedded(
    state: u64,
    params: &ModelParams,
    rng: &mut RandomStream,
) -> Result<(f64, i8)> {
    if state < 2 {
        return Err(Error::InvalidState(state));
    }
    Ok(jump(state, params.jump_rate(state), params.birth_probability(), rng))
}

#[inline]
fn jump(state: u64, rate: f64, p_up: f64, rng: &mut RandomStream) -> (f64, i8) {
    debug_assert!(state >= 2);
    let dwell = exponential_quantile(rate, rng.uniform());
    let delta = if rng.uniform() < p_up { 1 } else { -1 };
    (dwell, delta)
}

/// Runs the chain from state 2 until it hits state 1 or `step_cap` jumps
/// have been applied. Valid for any `lambda > 0`.
pub fn simulate_hitting_direct(
    params: &ModelParams,
    step_cap: u64,
    rng: &mut RandomStream,
) -> Result<SimRecord> {
    if step_cap == 0 {
        return Err(invalid("step_cap", "must be at least 1"));
    }
    let p_up = params.birth_probability();
    let mut state = 2u64;
    let mut h = 0.0;
    let mut steps = 0u64;
    while state != 1 && steps < step_cap {
        let (dwell, delta) = jump(state, params.jump_rate(state), p_up, rng);
        h += dwell;
        state = if delta > 0 { state + 1 } else { state - 1 };
        steps += 1;
    }
    let outcome = if state == 1 {
        Outcome::Direct
    } else {
        Outcome::Censored
    };
    let x = exponential_quantile(params.lambda(), rng.uniform());
    Ok(SimRecord::new(h, x, steps, state, outcome))
}

/// Hybrid sampler for the critical chain.
///
/// While `H <= t_min` and the chain is not in state 1, a dwell with rate `2N`
/// is added to `H`; the state only moves if `H` is still within the
/// threshold. If the loop ends above the threshold (or away from state 1),
/// `H` is discarded and redrawn from the tail law on `(t_min, inf)`.
pub fn simulate_hitting_hybrid(config: &HybridConfig, rng: &mut RandomStream) -> SimRecord {
    let t_min = config.t_min();
    let mut n = 2u64;
    let mut h = 0.0f64;
    let mut steps = 0u64;
    while h <= t_min && n != 1 {
        h += exponential_quantile(2.0 * n as f64, rng.uniform());
        if h <= t_min {
            n = if rng.uniform() < 0.5 { n + 1 } else { n - 1 };
            steps += 1;
        }
    }
    let outcome = if h > t_min || n != 1 {
        // leaving the loop in state 1 implies H <= t_min
        debug_assert!(h > t_min);
        h = sample_pareto_tail(&config.tail_law(), rng);
        Outcome::TailDrawn
    } else {
        Outcome::Direct
    };
    let x = exponential_quantile(1.0, rng.uniform());
    SimRecord::new(h, x, steps, n, outcome)
}

/// Public entry point for one 1 -> 1 return time under the hybrid sampler.
pub fn simulate_return_time(config: &HybridConfig, rng: &mut RandomStream) -> SimRecord {
    simulate_hitting_hybrid(config, rng)
}
