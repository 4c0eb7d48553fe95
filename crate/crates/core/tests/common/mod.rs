#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic Kolmogorov tail probability at `sqrt(n_eff)·d`.
pub fn kolmogorov_pvalue(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-2.0 * k * k * x * x).exp();
        p += if k as u64 % 2 == 1 { term } else { -term };
    }
    p.clamp(0.0, 1.0)
}

/// Two-sample KS p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
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
    kolmogorov_pvalue(d, n * m / (n + m))
}

pub fn chi_squared_sf(x: f64, dof: f64) -> f64 {
    1.0 - ChiSquared::new(dof).expect("positive degrees of freedom").cdf(x)
}

/// Sample mean and its standard error.
pub fn batch_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
