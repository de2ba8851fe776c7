//! Goodness-of-fit tests used to check samplers against each other.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic Kolmogorov tail probability Q(λ) = 2 Σ (-1)^{j-1} e^{-2j²λ²}.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    TestResult {
        statistic: d,
        p_value: p_value(d, n * m / (n + m)),
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> TestResult {
    let mut a = a.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in a.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    TestResult {
        statistic: d,
        p_value: p_value(d, n),
    }
}

fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).expect("positive degrees of freedom").cdf(stat)
}

/// Pearson goodness-of-fit test of counts against expected probabilities.
/// Categories with zero probability are skipped.
pub fn chi2_goodness_of_fit(counts: &[u64], probs: &[f64]) -> TestResult {
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cats = 0;
    for (c, p) in counts.iter().zip(probs) {
        if *p > 0.0 {
            let e = *p * n as f64;
            stat += (*c as f64 - e).powi(2) / e;
            cats += 1;
        }
    }
    TestResult {
        statistic: stat,
        p_value: chi2_sf(stat, cats as f64 - 1.0),
    }
}

/// Pearson test that two count vectors come from the same categorical law.
pub fn chi2_homogeneity(a: &[u64], b: &[u64]) -> TestResult {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cats = 0;
    for (x, y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cats += 1;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (*x as f64 - ea).powi(2) / ea + (*y as f64 - eb).powi(2) / eb;
    }
    TestResult {
        statistic: stat,
        p_value: chi2_sf(stat, cats as f64 - 1.0),
    }
}

/// Standard Normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
