//! Sample moments with standard errors and the Kolmogorov–Smirnov test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{PclError, Result};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Sample variance (divisor R − 1).
    pub variance: f64,
    pub variance_se: f64,
    /// E[Y³] estimate and its standard error.
    pub third: f64,
    pub third_se: f64,
    pub skewness: f64,
    /// Standardized fourth moment m₄/m₂².
    pub kurtosis: f64,
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    let v = xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
        let (m2, m3, m4) = (c(2), c(3), c(4));
        let variance = m2 * n / (n - 1.0);
        let (third, third_se) = mean_and_se(xs.iter().map(|x| x.powi(3)));
        Moments {
            count: xs.len(),
            mean,
            mean_se: (variance / n).sqrt(),
            variance,
            variance_se: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
            third,
            third_se,
            skewness: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2),
        }
    }
}

/// Sample mean of f(x) with its standard error.
pub fn mean_se_of(xs: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    mean_and_se(xs.iter().map(|&x| f(x)))
}

/// Sample covariance of paired data with a standard error from the spread
/// of the centred products.
pub fn covariance_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let (m, se) = mean_and_se(prods.iter().copied());
    (m * n / (n - 1.0), se)
}

/// Lag-1 autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let den: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}

/// Asymptotic Kolmogorov tail P(K > λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against N(0, σ²), with Stephens' small-sample
/// correction of the asymptotic p-value.
pub fn ks_normal(sample: &[f64], sigma: f64) -> Result<KsResult> {
    if sample.len() < 2 {
        return Err(PclError::invalid("sample", "need at least two observations"));
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| PclError::invalid("sigma", e.to_string()))?;
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = dist.cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    let p = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
    Ok(KsResult { statistic: d, p_value: p })
}
