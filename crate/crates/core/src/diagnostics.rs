//! Output analysis: moments, batch-means asymptotic variance, ESS, quantiles
//! and Kolmogorov-Smirnov statistics.

use serde::{Deserialize, Serialize};

use crate::chain::ChainTrace;
use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Batch-means estimate of the CLT asymptotic variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub asymptotic_variance: f64,
    /// Large-sample standard error, `σ² √(2 / (b - 1))` for `b` batches.
    pub standard_error: f64,
    pub batch_size: usize,
}

/// Splits `xs` into `n_batches` equal batches (dropping the remainder at the
/// front) and returns `batch_size · Var(batch means)`.
pub fn batch_means(xs: &[f64], n_batches: usize) -> Result<BatchMeans> {
    if n_batches < 2 || xs.len() < 2 * n_batches {
        return Err(Error::DegenerateTrace(format!(
            "{} values cannot form {n_batches} batches of size >= 2",
            xs.len()
        )));
    }
    let size = xs.len() / n_batches;
    let skip = xs.len() - size * n_batches;
    let means: Vec<f64> = xs[skip..].chunks_exact(size).map(mean).collect();
    let s2 = size as f64 * variance(&means);
    Ok(BatchMeans {
        asymptotic_variance: s2,
        standard_error: s2 * (2.0 / (n_batches as f64 - 1.0)).sqrt(),
        batch_size: size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
    pub batch_means_asymptotic_variance: f64,
    pub batch_means_standard_error: f64,
    pub acceptance_rate: f64,
    pub mean_loops: f64,
}

/// Summary statistics of `f` along a trace.
///
/// ESS follows `N · Var(f) / σ²_asym` with both variances taken from the trace.
pub fn chain_stats<S: Clone>(
    trace: &ChainTrace<S>,
    f: impl Fn(&S) -> f64,
    n_batches: usize,
) -> Result<ChainStats> {
    let xs: Vec<f64> = trace.states.iter().map(f).collect();
    if xs.len() < 2 * n_batches {
        return Err(Error::DegenerateTrace(format!(
            "trace of length {} too short for {n_batches} batches",
            xs.len()
        )));
    }
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        return Err(Error::DegenerateTrace(format!(
            "f is constant ({first}) along the trace"
        )));
    }
    let bm = batch_means(&xs, n_batches)?;
    let var = variance(&xs);
    Ok(ChainStats {
        n: xs.len(),
        mean: mean(&xs),
        variance: var,
        ess: xs.len() as f64 * var / bm.asymptotic_variance,
        batch_means_asymptotic_variance: bm.asymptotic_variance,
        batch_means_standard_error: bm.standard_error,
        acceptance_rate: trace.acceptance_rate(),
        mean_loops: trace.mean_loops(),
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    // the alternating series converges slowly near zero, where P ≈ 1 anyway
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS statistic of `xs` against the continuous CDF `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS test.
pub fn ks_pvalue(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = xs.len() as f64;
    let d = ks_statistic(xs, cdf);
    // Stephens' small-sample correction.
    kolmogorov_survival(d * (n.sqrt() + 0.12 + 0.11 / n.sqrt()))
}

/// Two-sample KS statistic.
pub fn ks_two_sample_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample KS test.
pub fn ks_two_sample_pvalue(xs: &[f64], ys: &[f64]) -> f64 {
    let d = ks_two_sample_statistic(xs, ys);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let ne = (n * m / (n + m)).sqrt();
    kolmogorov_survival(d * (ne + 0.12 + 0.11 / ne))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn iid_normal_asymptotic_variance_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 400_000;
        let mut trace = ChainTrace::new(0.0);
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            trace.push(Step::exact(x, true), 0);
        }
        let s = chain_stats(&trace, |x| *x, 400).unwrap();
        assert!(
            (s.batch_means_asymptotic_variance - 1.0).abs() < 3.0 * s.batch_means_standard_error,
            "{s:?}"
        );
        assert!((s.ess / s.n as f64 - 1.0).abs() < 0.25);
        assert!((s.variance - 1.0).abs() < 0.01);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let mut trace = ChainTrace::new(2.0);
        for _ in 0..100 {
            trace.push(Step::exact(2.0, false), 0);
        }
        assert!(matches!(
            chain_stats(&trace, |x| *x, 10),
            Err(Error::DegenerateTrace(_))
        ));
    }

    #[test]
    fn short_trace_is_rejected() {
        let trace = ChainTrace::new(2.0);
        assert!(chain_stats(&trace, |x| *x, 10).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert!((quantile(&xs, 0.125) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Tabulated: P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_accepts_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        assert!(ks_pvalue(&xs, normal_cdf) > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.1).collect();
        assert!(ks_pvalue(&shifted, normal_cdf) < 1e-6);
        assert!(ks_two_sample_pvalue(&xs, &shifted) < 1e-6);
    }
}
