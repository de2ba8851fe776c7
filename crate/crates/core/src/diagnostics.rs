//! Meeting-time diagnostics: total-variation upper bounds, survival curves,
//! tail regressions, and percentile bootstrap intervals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Empirical mean of max(0, ⌈(τ - L - t)/L⌉): an upper bound on the total
/// variation distance between the chain at time t and its target.
pub fn tv_upper_bound(taus: &[usize], lag: usize, t: usize) -> Result<f64> {
    if taus.is_empty() {
        return Err(Error::InsufficientData("no meeting times".into()));
    }
    if lag == 0 {
        return Err(Error::param("lag", "must be at least 1"));
    }
    let total: u64 = taus
        .iter()
        .map(|&tau| {
            let excess = tau.saturating_sub(lag + t);
            excess.div_ceil(lag) as u64
        })
        .sum();
    Ok(total as f64 / taus.len() as f64)
}

/// The bound at t = 0, 1, ..., t_max.
pub fn tv_curve(taus: &[usize], lag: usize, t_max: usize) -> Result<Vec<(usize, f64)>> {
    (0..=t_max)
        .map(|t| tv_upper_bound(taus, lag, t).map(|b| (t, b)))
        .collect()
}

/// Fraction of samples with τ - L > t, for t = 0..=t_max.
pub fn survival_curve(taus: &[usize], lag: usize, t_max: usize) -> Vec<(usize, f64)> {
    let mut s: Vec<usize> = taus.iter().map(|&t| t.saturating_sub(lag)).collect();
    s.sort_unstable();
    let n = s.len() as f64;
    (0..=t_max)
        .map(|t| {
            let above = s.len() - s.partition_point(|&v| v <= t);
            (t, above as f64 / n)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    #[serde(rename = "tmin")]
    pub t_min: f64,
    #[serde(rename = "tmax")]
    pub t_max: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Distinct values t ≥ t_min (t > 0) of the samples with their empirical
/// survival #{s > t}/n, keeping only positive survival.
fn survival_points(samples: &[f64], t_min: Option<f64>) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    let t_min = t_min.unwrap_or_else(|| s[n / 2]);
    let above = n - s.partition_point(|&v| v <= t_min);
    if above < 100 {
        return Err(Error::InsufficientData(format!(
            "only {above} samples exceed t_min = {t_min}; need at least 100"
        )));
    }
    let mut ts = Vec::new();
    let mut surv = Vec::new();
    let mut i = 0;
    while i < n {
        let v = s[i];
        let mut j = i;
        while j < n && s[j] == v {
            j += 1;
        }
        let sv = (n - j) as f64 / n as f64;
        if v >= t_min && v > 0.0 && sv > 0.0 {
            ts.push(v);
            surv.push(sv);
        }
        i = j;
    }
    if ts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "only {} distinct points with positive survival above t_min; need at least 10",
            ts.len()
        )));
    }
    Ok((ts, surv, t_min))
}

/// Least-squares fit of log survival of (τ - L) against log t over t ≥ t_min.
/// A straight line indicates polynomial decay with exponent -slope.
/// `t_min` defaults to the median of τ - L.
pub fn tail_fit(taus: &[usize], lag: usize, t_min: Option<f64>) -> Result<TailFit> {
    let s: Vec<f64> = taus.iter().map(|&t| t.saturating_sub(lag) as f64).collect();
    tail_fit_samples(&s, t_min)
}

/// [`tail_fit`] on arbitrary positive samples.
pub fn tail_fit_samples(samples: &[f64], t_min: Option<f64>) -> Result<TailFit> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let (ts, surv, t_min) = survival_points(samples, t_min)?;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = surv.iter().map(|s| s.ln()).collect();
    let (slope, intercept, r_squared) = ols(&lx, &ly);
    Ok(TailFit {
        slope,
        intercept,
        r_squared,
        t_min,
        t_max: *ts.last().unwrap(),
    })
}

/// Least-squares fit of log survival against t (geometric decay gives a
/// straight line); same point selection as [`tail_fit_samples`].
pub fn geometric_fit_samples(samples: &[f64], t_min: Option<f64>) -> Result<TailFit> {
    let (ts, surv, t_min) = survival_points(samples, t_min)?;
    let ly: Vec<f64> = surv.iter().map(|s| s.ln()).collect();
    let (slope, intercept, r_squared) = ols(&ts, &ly);
    Ok(TailFit {
        slope,
        intercept,
        r_squared,
        t_min,
        t_max: *ts.last().unwrap(),
    })
}

/// Order statistics bounding the central `level` mass of sorted resamples:
/// positions ⌊(α/2)B⌋ and ⌈(1-α/2)B⌉ - 1.
pub fn percentile_interval(sorted: &[f64], level: f64) -> (f64, f64) {
    let b = sorted.len();
    let alpha = 1.0 - level;
    let lo = ((alpha / 2.0 * b as f64 + 1e-9).floor() as usize).min(b - 1);
    let hi = (((1.0 - alpha / 2.0) * b as f64 - 1e-9).ceil() as usize).clamp(1, b) - 1;
    (sorted[lo], sorted[hi])
}

/// Resample index vectors: resample `b` draws `n` indices with replacement
/// from `rng.child(b)` and passes them to `stat`.
pub fn bootstrap_statistics<F>(n: usize, n_resamples: usize, rng: &RngStream, stat: F) -> Vec<Vec<f64>>
where
    F: Fn(&[usize]) -> Vec<f64>,
{
    let mut idx = vec![0usize; n];
    (0..n_resamples)
        .map(|b| {
            let mut r = rng.child(b as u64);
            for i in idx.iter_mut() {
                *i = r.index(n);
            }
            stat(&idx)
        })
        .collect()
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(values: &[f64], n_resamples: usize, level: f64, rng: &RngStream) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData("bootstrap needs at least 2 values".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", "must lie in (0, 1)"));
    }
    if n_resamples == 0 {
        return Err(Error::param("n_resamples", "must be positive"));
    }
    let n = values.len() as f64;
    let mut means: Vec<f64> = bootstrap_statistics(values.len(), n_resamples, rng, |idx| {
        vec![idx.iter().map(|&i| values[i]).sum::<f64>() / n]
    })
    .into_iter()
    .map(|v| v[0])
    .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    Ok(percentile_interval(&means, level))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        assert_eq!(tv_upper_bound(&[3, 5, 6], 2, 4).unwrap(), 0.0);
        for lag in 1..6 {
            assert_eq!(tv_upper_bound(&[lag + 3 + 1], lag, 3).unwrap(), 1.0);
        }
        assert_eq!(tv_upper_bound(&[6, 15], 5, 0).unwrap(), 1.5);
        assert!(tv_upper_bound(&[], 1, 0).is_err());
    }

    #[test]
    fn tv_curve_monotone_and_vanishing() {
        let taus = [2, 9, 14, 30, 31, 7];
        let c = tv_curve(&taus, 3, 40).unwrap();
        for w in c.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        assert_eq!(c[31 - 3].1, 0.0);
    }

    #[test]
    fn percentile_positions() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(percentile_interval(&v, 0.9), (5.0, 94.0));
    }

    #[test]
    fn constant_data_degenerate_interval() {
        let r = RngStream::new(0, 0);
        assert_eq!(bootstrap_ci(&[2.5; 10], 500, 0.95, &r).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn survival_counts() {
        let s = survival_curve(&[1, 2, 3, 4], 1, 3);
        assert_eq!(s, vec![(0, 0.75), (1, 0.5), (2, 0.25), (3, 0.0)]);
    }

    #[test]
    fn constant_tau_is_an_error() {
        assert!(tail_fit(&[50; 1000], 1, None).is_err());
    }
}
