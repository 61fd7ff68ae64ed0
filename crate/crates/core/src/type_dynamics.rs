//! Population of fitness-ranked types.
//!
//! With `N` types alive, a new type is born at rate `lambda * N` and the
//! least fit type dies at rate `N`; a lone type cannot die. Fitness values
//! are drawn uniformly on `(0, 1)` since only their ranking matters. The
//! size process is therefore the same birth-death chain that
//! [`crate::return_time`] simulates.
//!
//! The fittest type is never removed while another type is alive, so the
//! dominating type at time `s` is the fittest of all types born by `s`.
//! [`estimate_persistence`] relies on this when a supercritical population
//! outgrows [`MEAN_FIELD_SIZE`]: from there on the total number of types is
//! continued along its exponential growth curve and the persistence event is
//! drawn with probability `K(a) / K(b)`, `K` being the count of types ever
//! born.

use std::collections::BTreeSet;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::random::{exponential_quantile, make_stream, RandomStream};

pub const DEFAULT_POPULATION_CAP: usize = 1_000_000;

/// Supercritical populations switch to the growth-curve continuation once
/// they hold this many types.
pub const MEAN_FIELD_SIZE: usize = 20_000;

/// Order-preserving map from `f64` onto `u64` (total order, NaN last).
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn from_order_key(key: u64) -> f64 {
    if key >> 63 == 1 {
        f64::from_bits(key & !(1 << 63))
    } else {
        f64::from_bits(!key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Birth { id: u64 },
    Death { id: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypePopulation {
    clock: f64,
    lambda: f64,
    // (fitness key, id): ascending fitness, ties broken by id
    types: BTreeSet<(u64, u64)>,
    next_id: u64,
    cap: usize,
}

impl TypePopulation {
    /// A single founding type (id 0) at time 0.
    pub fn founder(lambda: f64, rng: &mut RandomStream) -> Result<Self> {
        ensure_positive("lambda", lambda)?;
        let fitness = rng.uniform_open();
        Self::from_types(lambda, [(0, fitness)])
    }

    /// Population at time 0 with the given `(id, fitness)` pairs. New ids
    /// continue after the largest one supplied.
    pub fn from_types<I>(lambda: f64, types: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        ensure_positive("lambda", lambda)?;
        let mut set = BTreeSet::new();
        let mut next_id = 0;
        for (id, fitness) in types {
            if fitness.is_nan() {
                return Err(invalid("fitness", "NaN fitness"));
            }
            if set.iter().any(|&(_, other)| other == id) {
                return Err(invalid("types", format!("duplicate type id {id}")));
            }
            set.insert((order_key(fitness), id));
            next_id = next_id.max(id + 1);
        }
        if set.is_empty() {
            return Err(invalid("types", "population needs at least one type"));
        }
        Ok(Self {
            clock: 0.0,
            lambda,
            types: set,
            next_id,
            cap: DEFAULT_POPULATION_CAP,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Number of types that have ever existed (founders included).
    pub fn ever_born(&self) -> u64 {
        self.next_id
    }

    /// `(id, fitness)` pairs in ascending fitness order.
    pub fn types(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.types.iter().map(|&(k, id)| (id, from_order_key(k)))
    }

    /// Id of the fittest type (larger id wins a fitness tie).
    pub fn dominating_type(&self) -> u64 {
        self.types.last().expect("population is never empty").1
    }

    fn total_rate(&self) -> f64 {
        let n = self.types.len() as f64;
        let deaths = if self.types.len() > 1 { n } else { 0.0 };
        self.lambda * n + deaths
    }

    /// Waiting time to the next event.
    fn next_dwell(&self, rng: &mut RandomStream) -> f64 {
        exponential_quantile(self.total_rate(), rng.uniform())
    }

    /// Applies one event at the current clock. Fails without changing the
    /// population if a birth would exceed the cap.
    fn apply_event(&mut self, rng: &mut RandomStream) -> Result<Event> {
        let n = self.types.len() as f64;
        let birth = self.types.len() == 1 || rng.uniform() * self.total_rate() < self.lambda * n;
        if birth {
            if self.types.len() >= self.cap {
                return Err(Error::PopulationCap {
                    cap: self.cap,
                    time: self.clock,
                });
            }
            let id = self.next_id;
            self.next_id += 1;
            self.types.insert((order_key(rng.uniform_open()), id));
            Ok(Event::Birth { id })
        } else {
            let (_, id) = self.types.pop_first().expect("size > 1 here");
            Ok(Event::Death { id })
        }
    }

    /// Advances to the next event, whatever its time.
    pub fn step(&mut self, rng: &mut RandomStream) -> Result<(f64, Event)> {
        let dwell = self.next_dwell(rng);
        self.clock += dwell;
        let event = self.apply_event(rng)?;
        Ok((dwell, event))
    }

    /// Advances in place to time `until`. The dwell that would overshoot
    /// `until` is discarded, which is exact by memorylessness.
    pub fn advance_to(&mut self, until: f64, rng: &mut RandomStream) -> Result<()> {
        if until.is_nan() || until < self.clock {
            return Err(invalid(
                "until",
                format!("target time {until} precedes the clock {}", self.clock),
            ));
        }
        loop {
            let next = self.clock + self.next_dwell(rng);
            if next > until {
                self.clock = until;
                return Ok(());
            }
            self.clock = next;
            self.apply_event(rng)?;
        }
    }
}

/// Evolves `pop` to time `until`.
pub fn evolve(mut pop: TypePopulation, until: f64, rng: &mut RandomStream) -> Result<TypePopulation> {
    pop.advance_to(until, rng)?;
    Ok(pop)
}

pub fn dominating_type(pop: &TypePopulation) -> u64 {
    pop.dominating_type()
}

/// Time for the size process to fall from 2 types to 1, or `None` if
/// `step_cap` events pass first.
pub fn size_hitting_time(lambda: f64, step_cap: u64, rng: &mut RandomStream) -> Result<Option<f64>> {
    let a = rng.uniform_open();
    let b = rng.uniform_open();
    let mut pop = TypePopulation::from_types(lambda, [(0, a), (1, b)])?;
    for _ in 0..step_cap {
        pop.step(rng)?;
        if pop.len() == 1 {
            return Ok(Some(pop.clock()));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceEstimate {
    pub lambda: f64,
    pub delta: f64,
    pub horizon_t: f64,
    pub reps: usize,
    /// Repeats in which the dominating types at `delta * t` and `t` agree.
    pub persisted: usize,
    pub p_hat: f64,
    pub std_err: f64,
    /// Repeats finished with the growth-curve continuation.
    pub mean_field_reps: usize,
}

/// Expected count of types ever born at time `s >= tau`, given `ever` types
/// and `size` alive at `tau`, for `lambda > 1`.
fn continued_ever(ever: f64, size: f64, lambda: f64, tau: f64, s: f64) -> f64 {
    let g = lambda - 1.0;
    ever + lambda * size * ((g * (s - tau)).exp_m1() / g)
}

struct RepOutcome {
    persisted: bool,
    mean_field: bool,
}

fn persistence_rep(
    lambda: f64,
    delta: f64,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<RepOutcome> {
    let supercritical = lambda > 1.0;
    let cap = if supercritical {
        MEAN_FIELD_SIZE
    } else {
        DEFAULT_POPULATION_CAP
    };
    let early = delta * horizon;
    let mut pop = TypePopulation::founder(lambda, rng)?.with_cap(cap);

    let continuation = |pop: &TypePopulation, from: f64, to: f64| {
        let k = |s: f64| continued_ever(pop.ever_born() as f64, pop.len() as f64, lambda, pop.clock(), s);
        k(from) / k(to)
    };

    match pop.advance_to(early, rng) {
        Ok(()) => {}
        Err(Error::PopulationCap { .. }) if supercritical => {
            let prob = continuation(&pop, early, horizon);
            return Ok(RepOutcome {
                persisted: rng.uniform() < prob,
                mean_field: true,
            });
        }
        Err(e) => return Err(e),
    }
    let dominating_early = pop.dominating_type();
    let ever_early = pop.ever_born() as f64;
    match pop.advance_to(horizon, rng) {
        Ok(()) => Ok(RepOutcome {
            persisted: pop.dominating_type() == dominating_early,
            mean_field: false,
        }),
        Err(Error::PopulationCap { .. }) if supercritical => {
            let persisted = pop.dominating_type() == dominating_early && {
                let now = pop.clock();
                let prob = continuation(&pop, now, horizon);
                debug_assert!(ever_early <= pop.ever_born() as f64);
                rng.uniform() < prob
            };
            Ok(RepOutcome {
                persisted,
                mean_field: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Frequency with which the dominating type at `delta * horizon` is still
/// dominating at `horizon`, each repeat starting from one founding type.
/// Repeat `i` uses stream `i` of `seed`. `delta = 1` is accepted and gives 1.
pub fn estimate_persistence(
    lambda: f64,
    delta: f64,
    horizon: f64,
    reps: usize,
    seed: u64,
) -> Result<PersistenceEstimate> {
    ensure_positive("lambda", lambda)?;
    ensure_positive("horizon", horizon)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1], got {delta}")));
    }
    if reps == 0 {
        return Err(invalid("reps", "must be at least 1"));
    }
    let run = |i: usize| persistence_rep(lambda, delta, horizon, &mut make_stream(seed, i as u64));

    #[cfg(feature = "parallel")]
    let outcomes: Vec<RepOutcome> = {
        use rayon::prelude::*;
        (0..reps).into_par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<RepOutcome> = (0..reps).map(run).collect::<Result<_>>()?;

    let persisted = outcomes.iter().filter(|o| o.persisted).count();
    let mean_field_reps = outcomes.iter().filter(|o| o.mean_field).count();
    let p_hat = persisted as f64 / reps as f64;
    Ok(PersistenceEstimate {
        lambda,
        delta,
        horizon_t: horizon,
        reps,
        persisted,
        p_hat,
        std_err: (p_hat * (1.0 - p_hat) / reps as f64).sqrt(),
        mean_field_reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_key_is_monotone() {
        let xs = [-3.5, -1e-300, -0.0, 0.0, 1e-300, 0.2, 0.9, 7.0];
        for w in xs.windows(2) {
            assert!(order_key(w[0]) <= order_key(w[1]), "{w:?}");
        }
        for x in xs {
            assert_eq!(from_order_key(order_key(x)).to_bits(), x.to_bits());
        }
    }

    #[test]
    fn argmax_and_single_type() {
        let pop = TypePopulation::from_types(1.0, [(1, 0.2), (2, 0.9)]).unwrap();
        assert_eq!(dominating_type(&pop), 2);
        let pop = TypePopulation::from_types(1.0, [(4, 0.3)]).unwrap();
        assert_eq!(dominating_type(&pop), 4);
    }

    #[test]
    fn fitness_ties_go_to_larger_id() {
        let pop = TypePopulation::from_types(1.0, [(3, 0.5), (8, 0.5), (1, 0.1)]).unwrap();
        assert_eq!(pop.dominating_type(), 8);
    }

    #[test]
    fn lone_type_only_gives_birth() {
        let mut rng = make_stream(1, 0);
        for _ in 0..100 {
            let mut pop = TypePopulation::founder(1.0, &mut rng).unwrap();
            let (_, ev) = pop.step(&mut rng).unwrap();
            assert_eq!(ev, Event::Birth { id: 1 });
            assert_eq!(pop.len(), 2);
        }
    }

    #[test]
    fn death_removes_least_fit() {
        let mut rng = make_stream(2, 0);
        let types: Vec<(u64, f64)> = (0..5).map(|i| (i, 0.1 + 0.15 * i as f64)).collect();
        let mut births = 0;
        for _ in 0..400 {
            let mut pop = TypePopulation::from_types(1.0, types.iter().copied()).unwrap();
            match pop.step(&mut rng).unwrap().1 {
                Event::Death { id } => {
                    assert_eq!(id, 0);
                    assert_eq!(pop.len(), 4);
                }
                Event::Birth { id } => {
                    assert_eq!(id, 5);
                    births += 1;
                }
            }
        }
        assert!((births as f64 / 400.0 - 0.5).abs() < 0.1);
    }

    #[test]
    fn evolve_stops_at_target_time() {
        let mut rng = make_stream(3, 0);
        let pop = TypePopulation::founder(1.0, &mut rng).unwrap();
        let pop = evolve(pop, 25.0, &mut rng).unwrap();
        assert_eq!(pop.clock(), 25.0);
        assert!(pop.len() >= 1);
        assert!(evolve(pop, 10.0, &mut rng).is_err());
    }

    #[test]
    fn population_cap_is_an_error() {
        let mut rng = make_stream(4, 0);
        let pop = TypePopulation::founder(3.0, &mut rng).unwrap().with_cap(50);
        assert!(matches!(
            evolve(pop, 100.0, &mut rng),
            Err(Error::PopulationCap { cap: 50, .. })
        ));
    }

    #[test]
    fn same_instant_comparison_always_persists() {
        let est = estimate_persistence(1.0, 1.0, 20.0, 50, 9).unwrap();
        assert_eq!(est.p_hat, 1.0);
        assert_eq!(est.std_err, 0.0);
        assert!(estimate_persistence(1.0, 0.0, 20.0, 50, 9).is_err());
        assert!(estimate_persistence(1.0, 0.5, 20.0, 0, 9).is_err());
    }

    #[test]
    fn estimate_is_reproducible() {
        let a = estimate_persistence(0.8, 0.5, 30.0, 200, 5).unwrap();
        let b = estimate_persistence(0.8, 0.5, 30.0, 200, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.persisted as f64 / a.reps as f64, a.p_hat);
    }

    #[test]
    fn continuation_counts_grow() {
        let k0 = continued_ever(100.0, 50.0, 3.0, 1.0, 1.0);
        assert_eq!(k0, 100.0);
        let k1 = continued_ever(100.0, 50.0, 3.0, 1.0, 2.0);
        assert!((k1 - (100.0 + 75.0 * (2.0f64.exp() - 1.0))).abs() < 1e-9);
    }

    #[test]
    fn size_excursion_terminates_or_caps() {
        let mut rng = make_stream(6, 0);
        let t = size_hitting_time(1.0, 1_000_000, &mut rng).unwrap();
        assert!(t.is_some_and(|t| t > 0.0));
        let mut hit = 0;
        for i in 0..200 {
            let mut rng = make_stream(6, i + 1);
            hit += size_hitting_time(1.0, 1, &mut rng).unwrap().is_some() as usize;
        }
        // a single event is a death with probability 1/2
        assert!((60..140).contains(&hit), "{hit}");
    }
}
