//! Statistical helpers for the acceptance checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Exp};

/// Two-sided one-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` on `n` samples (Stephens' correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        p += if k as u64 % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let d = ks_statistic(samples, cdf);
    (d, ks_pvalue(d, samples.len()))
}

pub fn chi_squared_cdf(k: f64) -> impl Fn(f64) -> f64 {
    let dist = ChiSquared::new(k).expect("positive degrees of freedom");
    move |x| dist.cdf(x)
}

pub fn unit_exponential_cdf() -> impl Fn(f64) -> f64 {
    let dist = Exp::new(1.0).expect("unit rate");
    move |x| dist.cdf(x)
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_on_a_perfect_uniform_grid() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let (d, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        assert!(p > 0.99);
    }

    #[test]
    fn ks_rejects_a_shifted_sample() {
        let xs: Vec<f64> = (0..500).map(|i| 0.3 + 0.7 * i as f64 / 500.0).collect();
        assert!(ks_test(&xs, |x| x.clamp(0.0, 1.0)).1 < 1e-6);
    }

    #[test]
    fn ks_pvalue_matches_the_kolmogorov_table() {
        // P(K > 1.6276) = 0.01 and P(K > 1.3581) = 0.05 for the limiting distribution
        let n = 1_000_000;
        let at = |x: f64| ks_pvalue(x / (n as f64).sqrt(), n);
        assert!((at(1.6276) - 0.01).abs() < 2e-4);
        assert!((at(1.3581) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn chi_squared_median_of_one_degree() {
        assert!((chi_squared_cdf(1.0)(0.454_936_4) - 0.5).abs() < 1e-6);
    }
}
