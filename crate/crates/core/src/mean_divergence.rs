//! Exact expected hitting times of state 1 for the critical chain with births
//! switched off at a ceiling state `N`.
//!
//! With `h_j` the expected time to reach 1 from `j`, first-step analysis gives
//!
//! ```text
//! h_1 = 0
//! h_j = 1/(2j) + (h_{j-1} + h_{j+1}) / 2      2 <= j < N
//! h_N = 1/N + h_{N-1}
//! ```
//!
//! a tridiagonal system solved here by direct elimination. Its solution has
//! `h_2 = sum_{k=2}^{N} 1/k`, which grows like `ln N`: the untruncated chain
//! has an infinite mean hitting time.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedHittingTimes {
    ceiling: u64,
    /// `values[j - 1]` is the expected hitting time from state `j`.
    values: Vec<f64>,
}

impl TruncatedHittingTimes {
    pub fn ceiling(&self) -> u64 {
        self.ceiling
    }

    /// Expected hitting time from `state`, for `1 <= state <= ceiling`.
    pub fn get(&self, state: u64) -> Option<f64> {
        let idx = usize::try_from(state.checked_sub(1)?).ok()?;
        self.values.get(idx).copied()
    }

    pub fn h2(&self) -> f64 {
        self.values[1]
    }

    /// Expected hitting times for states `1..=ceiling`.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Largest residual of the first-step equations, each divided by the
    /// magnitude of the terms in that equation.
    pub fn max_relative_residual(&self) -> f64 {
        let n = self.values.len();
        let h = &self.values;
        let mut worst = 0.0f64;
        for j in 2..=n {
            let i = j - 1;
            let (lhs, rhs) = if j < n {
                (h[i], 1.0 / (2.0 * j as f64) + 0.5 * (h[i - 1] + h[i + 1]))
            } else {
                (h[i], 1.0 / j as f64 + h[i - 1])
            };
            let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        worst
    }
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(invalid("system", "band and right-hand-side lengths must match and be non-zero"));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(invalid("system", "zero pivot in row 0"));
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 {
            return Err(invalid("system", format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < n { sup[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves the truncated first-step system for ceiling `N >= 2`.
pub fn solve_truncated(ceiling: u64) -> Result<TruncatedHittingTimes> {
    if ceiling < 2 {
        return Err(invalid("ceiling", format!("must be at least 2, got {ceiling}")));
    }
    let top = usize::try_from(ceiling).map_err(|_| invalid("ceiling", "too large"))?;
    // unknowns h_2..h_N
    let m = top - 1;
    let mut sub = vec![-0.5; m];
    let mut diag = vec![1.0; m];
    let mut sup = vec![-0.5; m];
    let mut rhs: Vec<f64> = (2..=top).map(|j| 1.0 / (2.0 * j as f64)).collect();
    sub[0] = 0.0;
    sub[m - 1] = -1.0;
    diag[m - 1] = 1.0;
    sup[m - 1] = 0.0;
    rhs[m - 1] = 1.0 / top as f64;
    let solved = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let mut values = Vec::with_capacity(top);
    values.push(0.0);
    values.extend(solved);
    Ok(TruncatedHittingTimes { ceiling, values })
}

/// `(N, h_2)` for each ceiling.
pub fn divergence_profile(ceilings: &[u64]) -> Result<Vec<(u64, f64)>> {
    ceilings
        .iter()
        .map(|&n| solve_truncated(n).map(|s| (n, s.h2())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // independent oracle: compensated harmonic sum, smallest terms first
    fn harmonic_from_two(n: u64) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in (2..=n).rev() {
            let y = 1.0 / k as f64 - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn ceiling_two_is_single_dwell() {
        let s = solve_truncated(2).unwrap();
        assert_eq!(s.h2(), 0.5);
        assert_eq!(s.get(1), Some(0.0));
        assert_eq!(s.get(3), None);
    }

    #[test]
    fn ceiling_three_brute_force() {
        // h2 = 1/4 + h3/2, h3 = 1/3 + h2, by Cramer's rule on
        // [1, -1/2; -1, 1] [h2; h3] = [1/4; 1/3]
        let det = 1.0 * 1.0 - (-0.5) * (-1.0);
        let h2 = (0.25 * 1.0 - (-0.5) * (1.0 / 3.0)) / det;
        let s = solve_truncated(3).unwrap();
        assert!((s.h2() - h2).abs() < 1e-15);
        assert!((s.h2() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn matches_harmonic_closed_form() {
        for n in [2u64, 3, 10, 100, 1_000, 10_000] {
            let s = solve_truncated(n).unwrap();
            let want = harmonic_from_two(n);
            assert!((s.h2() - want).abs() <= 1e-10 * want, "N={n}: {} vs {want}", s.h2());
        }
    }

    #[test]
    fn doubling_increment_tends_to_ln2() {
        let prof = divergence_profile(&[10, 20]).unwrap();
        let diff = prof[1].1 - prof[0].1;
        let tail: f64 = (11..=20).map(|k| 1.0 / f64::from(k)).sum();
        assert!((diff - tail).abs() < 1e-12);
        // sum_{N+1}^{2N} 1/k = ln 2 - 1/(4N) + O(N^-2)
        assert!((diff - std::f64::consts::LN_2).abs() <= 1.0 / 40.0);
        let prof = divergence_profile(&[10_000, 20_000]).unwrap();
        assert!((prof[1].1 - prof[0].1 - std::f64::consts::LN_2).abs() < 1e-3);
    }

    #[test]
    fn solution_properties() {
        for n in [5u64, 50, 2_000] {
            let s = solve_truncated(n).unwrap();
            let h = s.as_slice();
            assert_eq!(h[0], 0.0);
            assert!(h.windows(2).all(|w| w[1] >= w[0]), "non-decreasing");
            assert!(s.max_relative_residual() < 1e-10);
            // first-step equation at state 2
            assert!((h[1] - (0.25 + h[2] / 2.0)).abs() < 1e-10 * h[1]);
            // h_3 >= sum_{i=3}^{N-1} 1/i
            let lower: f64 = (3..n).map(|i| 1.0 / i as f64).sum();
            assert!(h[2] >= lower - 1e-8);
        }
    }

    #[test]
    fn rejects_small_ceiling() {
        assert!(solve_truncated(1).is_err());
        assert!(solve_truncated(0).is_err());
        assert!(divergence_profile(&[10, 1]).is_err());
    }

    #[test]
    fn tridiagonal_small_system() {
        // [2 1 0; 1 2 1; 0 1 2] x = [4 8 8] -> x = [1 2 3]
        let x = solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0; 3], &[1.0, 1.0, 0.0], &[4.0, 8.0, 8.0])
            .unwrap();
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(solve_tridiagonal(&[], &[], &[], &[]).is_err());
    }
}
