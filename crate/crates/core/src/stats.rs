//! Small statistical helpers: standard errors, Kolmogorov–Smirnov distances,
//! a chi-square goodness-of-fit test, and log-slope (growth-rate) fitting.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "empty sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic sup |F̂₁ − F̂₂|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "empty sample");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Chi-square goodness-of-fit of `samples` against Exponential(rate), using
/// equal-probability bins. Returns (statistic, p-value). No parameters are
/// estimated from the data, so the statistic is χ²(n_bins − 1) under the null.
pub fn chi_square_exponential(samples: &[f64], rate: f64, n_bins: usize) -> Result<(f64, f64)> {
    if samples.len() < 10 * n_bins {
        return Err(Error::TrajectoryTooShort {
            len: samples.len(),
            needed: 10 * n_bins,
        });
    }
    // Equal-probability bin edges: F^{-1}(i/k) = -ln(1 - i/k)/rate.
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let u = 1.0 - (-rate * x).exp(); // CDF value in [0,1)
        let mut idx = (u * n_bins as f64) as usize;
        if idx >= n_bins {
            idx = n_bins - 1;
        }
        counts[idx] += 1;
    }
    let expected = samples.len() as f64 / n_bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((n_bins - 1) as f64).expect("valid dof");
    Ok((stat, dist.sf(stat)))
}

/// Ordinary least-squares fit y = a + b·x; returns (slope b, intercept a).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares exponential rate: slope of ln y over x. All y must be > 0.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if ys.iter().any(|&y| y <= 0.0 || !y.is_finite()) {
        return Err(Error::InvalidConfig(
            "log-slope fit requires strictly positive finite values".into(),
        ));
    }
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    Ok(linear_fit(xs, &logs).0)
}
