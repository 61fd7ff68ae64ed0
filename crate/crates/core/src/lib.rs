//! Monte Carlo simulation of the return time to state 1 in a critical
//! linear birth-death process.
//!
//! The hitting time `H` of state 1 from state 2 has survival function
//! `P(H > t) ~ 1/t`, so its mean is infinite and plain simulation
//! under-samples the tail. [`return_time::simulate_hitting_hybrid`] simulates
//! the chain directly up to a time threshold `1/p` and draws the remainder
//! from the power-law tail. Supporting modules provide the statistics used to
//! check the sampler, an exact solver for truncated mean hitting times, and
//! the fitness-ranked type population the chain describes.

pub mod empirics;
pub mod error;
pub mod mean_divergence;
pub mod random;
pub mod return_time;
pub mod type_dynamics;

pub use empirics::{
    ecdf, fit_survival_slope, fit_tail_slope, kolmogorov_q, ks_one_sample, ks_two_sample,
    EmpiricalCdf, KsResult, TailFit,
};
pub use error::{Error, Result};
pub use mean_divergence::{divergence_profile, solve_truncated, TruncatedHittingTimes};
pub use random::{make_stream, sample_exponential, sample_pareto_tail, RandomStream, TailLaw};
pub use return_time::{
    simulate_hitting_direct, simulate_hitting_hybrid, simulate_return_time, step_embedded,
    HybridConfig, ModelParams, Outcome, SimRecord,
};
pub use type_dynamics::{estimate_persistence, evolve, PersistenceEstimate, TypePopulation};
