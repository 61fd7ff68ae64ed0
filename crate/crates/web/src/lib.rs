//! Browser bindings: hybrid survival curves, the truncated mean hitting time
//! profile and persistence of the dominating type.

use critbd::empirics::log_grid;
use critbd::{
    ecdf, estimate_persistence, fit_tail_slope, make_stream, simulate_hitting_hybrid,
    solve_truncated, HybridConfig, Outcome,
};
use wasm_bindgen::prelude::*;

/// Largest number of repeats or ceilings accepted from the page.
pub const MAX_REPEATS: u32 = 2_000_000;
pub const MAX_CEILING: u32 = 1_000_000;

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    t: Vec<f64>,
    survival: Vec<f64>,
    slope: f64,
    tail_fraction: f64,
}

#[wasm_bindgen]
impl SurvivalCurve {
    /// Grid points.
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    /// Empirical `P(H > t)` at each grid point.
    #[wasm_bindgen(getter)]
    pub fn survival(&self) -> Vec<f64> {
        self.survival.clone()
    }

    /// Log-log slope over the upper half of the grid, NaN if the fit fails.
    #[wasm_bindgen(getter)]
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Share of repeats whose hitting time came from the tail law.
    #[wasm_bindgen(getter)]
    pub fn tail_fraction(&self) -> f64 {
        self.tail_fraction
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy)]
pub struct Persistence {
    p_hat: f64,
    std_err: f64,
    mean_field_reps: u32,
}

#[wasm_bindgen]
impl Persistence {
    #[wasm_bindgen(getter)]
    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    #[wasm_bindgen(getter)]
    pub fn std_err(&self) -> f64 {
        self.std_err
    }

    /// Repeats finished on the deterministic growth curve.
    #[wasm_bindgen(getter)]
    pub fn mean_field_reps(&self) -> u32 {
        self.mean_field_reps
    }
}

pub fn survival_curve_impl(
    p: f64,
    repeats: u32,
    seed: u32,
    hi: f64,
    points: u32,
) -> Result<SurvivalCurve, String> {
    let config = HybridConfig::new(p).map_err(|e| e.to_string())?;
    if repeats == 0 || repeats > MAX_REPEATS {
        return Err(format!("repeats must lie in 1..={MAX_REPEATS}"));
    }
    if points < 2 {
        return Err("points must be at least 2".into());
    }
    if !(hi.is_finite() && hi > 1.0) {
        return Err("upper end of the grid must exceed 1".into());
    }
    let mut tails = 0u32;
    let h: Vec<f64> = (0..repeats)
        .map(|i| {
            let rec = simulate_hitting_hybrid(&config, &mut make_stream(u64::from(seed), u64::from(i)));
            if rec.outcome == Outcome::TailDrawn {
                tails += 1;
            }
            rec.h
        })
        .collect();
    let cdf = ecdf(&h).map_err(|e| e.to_string())?;
    let t = log_grid(1.0, hi, points as usize);
    let survival = t.iter().map(|&x| cdf.survival(x)).collect();
    let slope = fit_tail_slope(&cdf, (hi.sqrt(), hi), points as usize / 2 + 1)
        .map_or(f64::NAN, |f| f.slope);
    Ok(SurvivalCurve {
        t,
        survival,
        slope,
        tail_fraction: f64::from(tails) / f64::from(repeats),
    })
}

pub fn hitting_profile_impl(ceilings: &[u32]) -> Result<Vec<f64>, String> {
    ceilings
        .iter()
        .map(|&n| {
            if n > MAX_CEILING {
                return Err(format!("ceiling {n} exceeds {MAX_CEILING}"));
            }
            solve_truncated(u64::from(n)).map(|s| s.h2()).map_err(|e| e.to_string())
        })
        .collect()
}

pub fn persistence_impl(
    lambda: f64,
    delta: f64,
    horizon: f64,
    reps: u32,
    seed: u32,
) -> Result<Persistence, String> {
    if reps > 100_000 {
        return Err("reps must be at most 100000".into());
    }
    let est = estimate_persistence(lambda, delta, horizon, reps as usize, u64::from(seed))
        .map_err(|e| e.to_string())?;
    Ok(Persistence {
        p_hat: est.p_hat,
        std_err: est.std_err,
        mean_field_reps: est.mean_field_reps as u32,
    })
}

/// Survival curve of the hitting time on a log grid over `[1, hi]`.
#[wasm_bindgen]
pub fn survival_curve(p: f64, repeats: u32, seed: u32, hi: f64, points: u32) -> Result<SurvivalCurve, JsError> {
    survival_curve_impl(p, repeats, seed, hi, points).map_err(|e| JsError::new(&e))
}

/// Expected hitting time from state 2 for each ceiling.
#[wasm_bindgen]
pub fn hitting_profile(ceilings: Vec<u32>) -> Result<Vec<f64>, JsError> {
    hitting_profile_impl(&ceilings).map_err(|e| JsError::new(&e))
}

/// Probability that the dominating type at `delta * horizon` still dominates at `horizon`.
#[wasm_bindgen]
pub fn persistence(lambda: f64, delta: f64, horizon: f64, reps: u32, seed: u32) -> Result<Persistence, JsError> {
    persistence_impl(lambda, delta, horizon, reps, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_curve_is_monotone_and_heavy_tailed() {
        let c = survival_curve_impl(0.01, 20_000, 3, 1e4, 40).unwrap();
        assert_eq!(c.t.len(), 40);
        assert!(c.survival.windows(2).all(|w| w[1] <= w[0]));
        assert!((-1.4..-0.6).contains(&c.slope), "{}", c.slope);
        assert!((0.005..0.015).contains(&c.tail_fraction));
    }

    #[test]
    fn survival_curve_rejects_bad_input() {
        assert!(survival_curve_impl(1.5, 10, 0, 100.0, 10).is_err());
        assert!(survival_curve_impl(0.1, 0, 0, 100.0, 10).is_err());
        assert!(survival_curve_impl(0.1, 10, 0, 0.5, 10).is_err());
    }

    #[test]
    fn hitting_profile_is_harmonic() {
        let h = hitting_profile_impl(&[2, 3, 100]).unwrap();
        assert_eq!(h[0], 0.5);
        assert!((h[1] - 5.0 / 6.0).abs() < 1e-14);
        let want: f64 = (2..=100).map(|k| 1.0 / f64::from(k)).sum();
        assert!((h[2] - want).abs() < 1e-10);
        assert!(hitting_profile_impl(&[1]).is_err());
    }

    #[test]
    fn persistence_full_window_is_certain() {
        let p = persistence_impl(0.5, 1.0, 20.0, 50, 1).unwrap();
        assert_eq!(p.p_hat, 1.0);
        assert!(persistence_impl(0.5, 0.0, 20.0, 50, 1).is_err());
    }
}
