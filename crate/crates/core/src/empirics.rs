//! Empirical survival curves, Kolmogorov-Smirnov tests and log-log tail
//! slope regression.

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};

/// Right-continuous step-function estimate of a CDF built from a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

/// Builds the empirical CDF of `samples`. Ties count with multiplicity.
pub fn ecdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples.to_vec())
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("samples", "empirical CDF needs at least one value"));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(invalid("samples", "NaN in sample"));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of samples `<= t`.
    pub fn count_at_most(&self, t: f64) -> usize {
        self.sorted.partition_point(|&x| x <= t)
    }

    /// `F(t) = #{x <= t} / n`.
    pub fn eval(&self, t: f64) -> f64 {
        self.count_at_most(t) as f64 / self.len() as f64
    }

    /// `S(t) = #{x > t} / n`.
    pub fn survival(&self, t: f64) -> f64 {
        (self.len() - self.count_at_most(t)) as f64 / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub d_stat: f64,
    pub p_value: f64,
    pub n_effective: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
///
/// For small `x` the alternating series converges slowly, so the equivalent
/// theta-function form of the CDF is used there instead.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    let q = if x < 1.18 {
        use std::f64::consts::PI;
        let w = -PI * PI / (8.0 * x * x);
        let mut sum = 0.0;
        for k in 1..=20u32 {
            let odd = f64::from(2 * k - 1);
            let term = (w * odd * odd).exp();
            sum += term;
            if term < 1e-16 * sum {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / x * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100u32 {
            let kf = f64::from(k);
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += sign * term;
            if term < 1e-10 * sum.abs() || term < f64::MIN_POSITIVE {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

fn asymptotic_p(d: f64, n_e: f64) -> f64 {
    let root = n_e.sqrt();
    kolmogorov_q((root + 0.12 + 0.11 / root) * d)
}

fn sorted_copy(name: &'static str, xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(invalid(name, "sample is empty"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(invalid(name, "NaN in sample"));
    }
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample KS test with the asymptotic p-value. Accuracy of the p-value
/// degrades for effective sizes below roughly 50.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted_copy("a", a)?;
    let b = sorted_copy("b", b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = match a[i].total_cmp(&b[j]) {
            Ordering::Greater => b[j],
            _ => a[i],
        };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_e = na * nb / (na + nb);
    Ok(KsResult {
        d_stat: d,
        p_value: asymptotic_p(d, n_e),
        n_effective: n_e,
    })
}

/// One-sample KS test of `a` against a continuous reference CDF.
pub fn ks_one_sample<F>(a: &[f64], cdf: F) -> Result<KsResult>
where
    F: Fn(f64) -> f64,
{
    let a = sorted_copy("a", a)?;
    let n = a.len() as f64;
    let d = a
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0f64, f64::max);
    Ok(KsResult {
        d_stat: d,
        p_value: asymptotic_p(d, n),
        n_effective: n,
    })
}

/// Least-squares line through `(ln t, ln S(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub n_points: usize,
}

pub const DEFAULT_GRID_POINTS: usize = 50;

/// `n` points spaced evenly in `ln t` over `[lo, hi]`, both ends included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi / lo).ln() / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { hi } else { lo * (step * i as f64).exp() })
                .collect()
        }
    }
}

/// OLS fit of `ln S(t)` on `ln t` over a log-spaced grid in the window,
/// for any survival function. Grid points with `S(t) = 0` are skipped.
pub fn fit_survival_slope<S>(survival: S, window: (f64, f64), n_grid: usize) -> Result<TailFit>
where
    S: Fn(f64) -> f64,
{
    let (lo, hi) = window;
    if !(lo.is_finite() && lo > 0.0) {
        return Err(invalid("window", format!("lower end must be > 0, got {lo}")));
    }
    if !(hi.is_finite() && hi > lo) {
        return Err(invalid("window", format!("upper end must exceed lower end, got ({lo}, {hi})")));
    }
    let points: Vec<(f64, f64)> = log_grid(lo, hi, n_grid)
        .into_iter()
        .filter_map(|t| {
            let s = survival(t);
            (s > 0.0).then(|| (t.ln(), s.ln()))
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} grid point(s) with positive survival in ({lo}, {hi}); need 2",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    let slope = sxy / sxx;
    Ok(TailFit {
        slope,
        intercept: my - slope * mx,
        fit_window: window,
        n_points: points.len(),
    })
}

/// Tail slope of an empirical survival curve.
pub fn fit_tail_slope(cdf: &EmpiricalCdf, window: (f64, f64), n_grid: usize) -> Result<TailFit> {
    fit_survival_slope(|t| cdf.survival(t), window, n_grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_counts() {
        let f = ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(3.0), 1.0);
        assert_eq!(f.eval(10.0), 1.0);
        assert_eq!(f.survival(3.0), 0.0);
    }

    #[test]
    fn ecdf_ties_and_errors() {
        let f = ecdf(&[1.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(0.999), 0.0);
        assert!(ecdf(&[]).is_err());
        assert!(ecdf(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn q_limits() {
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(0.1) > 0.999_999);
        assert!(kolmogorov_q(5.0) < 1e-20);
        // standard table value: P(K > 1.358) ~= 0.05
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 5e-4);
        // both branches agree where they meet
        let lo = kolmogorov_q(1.18 - 1e-12);
        let hi = kolmogorov_q(1.18);
        assert!((lo - hi).abs() < 1e-9);
    }

    #[test]
    fn two_sample_degenerate_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.d_stat, r.p_value), (0.0, 1.0));

        let lo: Vec<f64> = (0..500).map(f64::from).collect();
        let hi: Vec<f64> = (1000..1500).map(f64::from).collect();
        let r = ks_two_sample(&lo, &hi).unwrap();
        assert_eq!(r.d_stat, 1.0);
        assert!(r.p_value < 1e-12);
        assert_eq!(r.n_effective, 250.0);
        assert!(ks_two_sample(&[], &a).is_err());
    }

    #[test]
    fn two_sample_with_ties() {
        let r = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r.d_stat - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn one_sample_single_point() {
        let r = ks_one_sample(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(r.d_stat, 0.5);
        assert_eq!(r.n_effective, 1.0);
    }

    #[test]
    fn exact_power_law_slope() {
        let fit = fit_survival_slope(|t| 1.0 / t, (10.0, 2000.0), 50).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12, "{}", fit.slope);
        assert!(fit.intercept.abs() < 1e-10);
        assert_eq!(fit.n_points, 50);
    }

    #[test]
    fn slope_needs_two_positive_points() {
        let f = ecdf(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            fit_tail_slope(&f, (10.0, 100.0), 50),
            Err(Error::InsufficientData(_))
        ));
        assert!(fit_tail_slope(&f, (0.0, 100.0), 50).is_err());
        assert!(fit_tail_slope(&f, (5.0, 4.0), 50).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(10.0, 1000.0, 3);
        assert_eq!(g[0], 10.0);
        assert!((g[1] - 100.0).abs() < 1e-12);
        assert_eq!(g[2], 1000.0);
    }
}
