//! Reproducible random streams plus the two analytic samplers used by the
//! simulator: exponential waiting times and the power-law tail draw.
//!
//! Every Monte Carlo repeat gets its own [`RandomStream`], identified by a
//! `(seed, stream_index)` pair. The underlying generator is ChaCha8, whose
//! 64-bit stream selector gives 2^64 non-overlapping streams per seed, so the
//! variates seen by repeat `i` never depend on how repeats are scheduled onto
//! threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_positive, invalid, Result};

/// A deterministic random stream bound to one `(seed, stream_index)` pair.
///
/// Streams are plain values: they can be moved to another thread, but a
/// single stream is never shared.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

/// Builds the stream for repeat `stream_index` under `seed`.
pub fn make_stream(seed: u64, stream_index: u64) -> RandomStream {
    RandomStream::new(seed, stream_index)
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform variate on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform variate on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Inverse CDF of the exponential law: `-ln(1 - u) / rate`.
#[inline]
pub fn exponential_quantile(rate: f64, u: f64) -> f64 {
    -(-u).ln_1p() / rate
}

/// Draws an exponential waiting time with the given rate (mean `1 / rate`).
pub fn sample_exponential(rate: f64, rng: &mut RandomStream) -> Result<f64> {
    ensure_positive("rate", rate)?;
    Ok(exponential_quantile(rate, rng.uniform()))
}

/// Continuous power law on `(t_min, inf)`.
///
/// The survival function is `c * t^-gamma` asymptotically; the sampler uses
/// the normalised form `P(T > t) = (t / t_min)^-(alpha - 1)` with
/// `alpha = gamma + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailLaw {
    t_min: f64,
    alpha: f64,
    c: f64,
}

impl TailLaw {
    pub fn new(t_min: f64, alpha: f64) -> Result<Self> {
        Self::with_constant(t_min, alpha, 1.0)
    }

    pub fn with_constant(t_min: f64, alpha: f64, c: f64) -> Result<Self> {
        ensure_positive("t_min", t_min)?;
        ensure_positive("c", c)?;
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(invalid(
                "alpha",
                format!("density exponent must exceed 1, got {alpha}"),
            ));
        }
        Ok(Self { t_min, alpha, c })
    }

    /// Tail law of the critical chain's hitting time above `t_min`:
    /// `c = 1`, `gamma = 1`, `alpha = 2`.
    pub fn critical(t_min: f64) -> Result<Self> {
        Self::with_constant(t_min, 2.0, 1.0)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.alpha - 1.0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < self.t_min {
            return 0.0;
        }
        (self.alpha - 1.0) / self.t_min * (t / self.t_min).powf(-self.alpha)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.t_min {
            return 0.0;
        }
        1.0 - (t / self.t_min).powf(1.0 - self.alpha)
    }

    pub fn survival(&self, t: f64) -> f64 {
        1.0 - self.cdf(t)
    }

    /// `t_min * (1 - u)^(-1 / (alpha - 1))`, strictly increasing in `u`.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        let gamma = self.alpha - 1.0;
        if gamma == 1.0 {
            self.t_min / (1.0 - u)
        } else {
            self.t_min * (1.0 - u).powf(-1.0 / gamma)
        }
    }
}

/// Inverse-CDF draw from `law`; always `>= law.t_min()`.
pub fn sample_pareto_tail(law: &TailLaw, rng: &mut RandomStream) -> f64 {
    law.quantile(rng.uniform())
}
