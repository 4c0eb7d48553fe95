//! Hawkes network parameters, stationarity checks and mean-field summaries.

use nalgebra::DMatrix;

use crate::error::{HawkesError, Result};
use crate::kernel::KernelSpec;
use crate::scalar::Real;

/// Kernels for every edge `j → i`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelTable<T> {
    Shared(KernelSpec<T>),
    /// Row-major `D×D` table; entry `(i, j)` is the kernel of edge `j → i`.
    PerEdge(Vec<KernelSpec<T>>),
}

/// Multivariate Hawkes process with constant base rates.
///
/// `alpha(i, j)` is the influence of node `j` on node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel<T> {
    mu: Vec<T>,
    alpha: Vec<T>,
    kernels: KernelTable<T>,
}

impl<T: Real> HawkesModel<T> {
    /// Builds a model with a kernel shared by all edges. Only shapes are
    /// checked here; use [`HawkesModel::validate`] for the statistical invariants.
    pub fn new(mu: Vec<T>, a: Vec<Vec<T>>, kernel: KernelSpec<T>) -> Result<Self> {
        Self::with_kernels(mu, a, KernelTable::Shared(kernel))
    }

    pub fn with_kernels(mu: Vec<T>, a: Vec<Vec<T>>, kernels: KernelTable<T>) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(HawkesError::InvalidModel("network must have at least one node".into()));
        }
        if a.len() != d {
            return Err(HawkesError::DimensionMismatch { expected: d, got: a.len() });
        }
        let mut alpha = Vec::with_capacity(d * d);
        for row in &a {
            if row.len() != d {
                return Err(HawkesError::DimensionMismatch { expected: d, got: row.len() });
            }
            alpha.extend_from_slice(row);
        }
        if let KernelTable::PerEdge(table) = &kernels {
            if table.len() != d * d {
                return Err(HawkesError::DimensionMismatch { expected: d * d, got: table.len() });
            }
        }
        Ok(Self { mu, alpha, kernels })
    }

    /// Same as [`HawkesModel::new`] but fails unless [`HawkesModel::validate`] is clean.
    pub fn validated(mu: Vec<T>, a: Vec<Vec<T>>, kernel: KernelSpec<T>) -> Result<Self> {
        let model = Self::new(mu, a, kernel)?;
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    #[inline]
    pub fn alpha(&self, i: usize, j: usize) -> T {
        self.alpha[i * self.dim() + j]
    }

    /// Row-major influence matrix.
    pub fn alpha_flat(&self) -> &[T] {
        &self.alpha
    }

    pub fn alpha_rows(&self) -> Vec<Vec<T>> {
        self.alpha.chunks(self.dim()).map(<[T]>::to_vec).collect()
    }

    pub fn kernels(&self) -> &KernelTable<T> {
        &self.kernels
    }

    #[inline]
    pub fn kernel(&self, i: usize, j: usize) -> &KernelSpec<T> {
        match &self.kernels {
            KernelTable::Shared(k) => k,
            KernelTable::PerEdge(table) => &table[i * self.dim() + j],
        }
    }

    /// The shared kernel, when every edge uses the same one.
    pub fn shared_kernel(&self) -> Option<&KernelSpec<T>> {
        match &self.kernels {
            KernelTable::Shared(k) => Some(k),
            KernelTable::PerEdge(_) => None,
        }
    }

    /// Copy with a different influence matrix (same `μ` and kernels).
    pub fn with_alpha(&self, a: Vec<Vec<T>>) -> Result<Self> {
        Self::with_kernels(self.mu.clone(), a, self.kernels.clone())
    }

    /// Copy with the truncation width of every kernel replaced.
    pub fn with_truncation(&self, width: Option<T>) -> Result<Self> {
        let kernels = match &self.kernels {
            KernelTable::Shared(k) => KernelTable::Shared(k.clone().with_truncation(width)?),
            KernelTable::PerEdge(table) => KernelTable::PerEdge(
                table
                    .iter()
                    .map(|k| k.clone().with_truncation(width))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self { kernels, ..self.clone() })
    }

    /// Largest width beyond which no edge kernel has influence, if finite.
    pub fn support(&self) -> Option<T> {
        match &self.kernels {
            KernelTable::Shared(k) => k.support(),
            KernelTable::PerEdge(table) => {
                let mut widest = T::zero();
                for k in table {
                    widest = widest.max(k.support()?);
                }
                Some(widest)
            }
        }
    }

    /// `Σ_i α_ij Φ̃_ij(hi) - Φ̃_ij(lo)`: compensator mass an event on node `j`
    /// adds to the whole network between ages `lo` and `hi`.
    #[inline]
    pub fn column_mass(&self, j: usize, lo: T, hi: T) -> T {
        match &self.kernels {
            KernelTable::Shared(k) => {
                let c: T = (0..self.dim()).map(|i| self.alpha(i, j)).fold(T::zero(), |a, b| a + b);
                if c == T::zero() {
                    T::zero()
                } else {
                    c * k.cumulative_increment(lo, hi)
                }
            }
            KernelTable::PerEdge(_) => (0..self.dim())
                .map(|i| self.alpha(i, j) * self.kernel(i, j).cumulative_increment(lo, hi))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| self.alpha(i, j).as_f64());
        m.complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Every violated invariant; empty when the model is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, &m) in self.mu.iter().enumerate() {
            if !(m > T::zero()) || !m.is_finite() {
                out.push(format!("base rate mu[{i}] = {m} must be positive"));
            }
        }
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                let a = self.alpha(i, j);
                if !(a >= T::zero()) || !a.is_finite() {
                    out.push(format!("influence a[{i}][{j}] = {a} must be nonnegative"));
                }
            }
        }
        if out.is_empty() {
            let rho = self.spectral_radius();
            if rho >= 1.0 {
                out.push(format!("spectral radius >= 1 (got {rho:.6})"));
            }
        }
        match &self.kernels {
            KernelTable::Shared(k) => out.extend(k.diagnostics()),
            KernelTable::PerEdge(table) => {
                for (idx, k) in table.iter().enumerate() {
                    for msg in k.diagnostics() {
                        out.push(format!("kernel ({}, {}): {msg}", idx / d, idx % d));
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let diagnostics = self.validate();
        if diagnostics.is_empty() {
            Ok(())
        } else {
            Err(HawkesError::InvalidModel(diagnostics.join("; ")))
        }
    }

    /// Stationary mean rate `(I - A)⁻¹ μ`.
    pub fn mean_field_intensity(&self) -> Result<Vec<T>> {
        if self.spectral_radius() >= 1.0 {
            return Err(HawkesError::Nonstationary);
        }
        let d = self.dim();
        let mut m: Vec<T> = (0..d * d)
            .map(|k| {
                let (i, j) = (k / d, k % d);
                let id = if i == j { T::one() } else { T::zero() };
                id - self.alpha[k]
            })
            .collect();
        let mut x = solve_dense(&mut m.clone(), self.mu.clone(), d)?;
        // one step of iterative refinement
        let residual: Vec<T> = (0..d)
            .map(|i| {
                let ax = (0..d).fold(T::zero(), |acc, j| acc + m[i * d + j] * x[j]);
                self.mu[i] - ax
            })
            .collect();
        let correction = solve_dense(&mut m, residual, d)?;
        for (xi, ci) in x.iter_mut().zip(correction) {
            *xi = *xi + ci;
        }
        if x.iter().any(|&v| !(v > T::zero())) {
            return Err(HawkesError::Nonstationary);
        }
        Ok(x)
    }
}

/// Gaussian elimination with partial pivoting; `m` is overwritten.
fn solve_dense<T: Real>(m: &mut [T], mut rhs: Vec<T>, d: usize) -> Result<Vec<T>> {
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tiny = scale * T::epsilon() * T::lit(d as f64 * 16.0);
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&a, &b| {
                m[a * d + col]
                    .abs()
                    .partial_cmp(&m[b * d + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if !(m[pivot * d + col].abs() > tiny) {
            return Err(HawkesError::Nonstationary);
        }
        if pivot != col {
            for k in 0..d {
                m.swap(pivot * d + k, col * d + k);
            }
            rhs.swap(pivot, col);
        }
        let p = m[col * d + col];
        for row in col + 1..d {
            let f = m[row * d + col] / p;
            if f == T::zero() {
                continue;
            }
            for k in col..d {
                m[row * d + k] = m[row * d + k] - f * m[col * d + k];
            }
            rhs[row] = rhs[row] - f * rhs[col];
        }
    }
    let mut x = vec![T::zero(); d];
    for row in (0..d).rev() {
        let mut acc = rhs[row];
        for k in row + 1..d {
            acc = acc - m[row * d + k] * x[k];
        }
        x[row] = acc / m[row * d + row];
    }
    Ok(x)
}

/// Mean-field KL divergence rate between the post- and pre-change laws:
/// `λ̄₁ᵀ(log λ̄₁ − log λ̄₀) − 1ᵀ(λ̄₁ − λ̄₀)`.
pub fn kl_mean_field<T: Real>(pre: &HawkesModel<T>, post: &HawkesModel<T>) -> Result<T> {
    if pre.dim() != post.dim() {
        return Err(HawkesError::DimensionMismatch { expected: pre.dim(), got: post.dim() });
    }
    let l0 = pre.mean_field_intensity()?;
    let l1 = post.mean_field_intensity()?;
    Ok(l0
        .iter()
        .zip(&l1)
        .fold(T::zero(), |acc, (&a, &b)| acc + b * (b.ln() - a.ln()) - (b - a)))
}

/// Pre- and post-change laws with the change time `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSpec<T> {
    pub pre: HawkesModel<T>,
    pub post: HawkesModel<T>,
    pub kappa: T,
}

impl<T: Real> ChangeSpec<T> {
    pub fn new(pre: HawkesModel<T>, post: HawkesModel<T>, kappa: T) -> Result<Self> {
        if pre.dim() != post.dim() {
            return Err(HawkesError::DimensionMismatch { expected: pre.dim(), got: post.dim() });
        }
        if pre.mu() != post.mu() {
            return Err(HawkesError::InvalidModel(
                "pre- and post-change base rates must coincide".into(),
            ));
        }
        if !(kappa >= T::zero()) {
            return Err(HawkesError::InvalidArgument(format!("change time {kappa} must be >= 0")));
        }
        Ok(Self { pre, post, kappa })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp1() -> KernelSpec<f64> {
        KernelSpec::exponential(1.0).unwrap()
    }

    fn one_d(mu: f64, a: f64) -> HawkesModel<f64> {
        HawkesModel::new(vec![mu], vec![vec![a]], exp1()).unwrap()
    }

    #[test]
    fn validation_boundaries() {
        assert!(one_d(0.5, 0.99).validate().is_empty());
        let diag = one_d(0.5, 1.0).validate();
        assert_eq!(diag.len(), 1);
        assert!(diag[0].starts_with("spectral radius >= 1"));
        let m = HawkesModel::new(vec![0.5, 0.5], vec![vec![0.0, 0.9], vec![0.9, 0.0]], exp1())
            .unwrap();
        assert!(m.validate().is_empty());
        assert_abs_diff_eq!(m.spectral_radius(), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn validation_lists_every_violation() {
        let m = HawkesModel::new(vec![-1.0, 0.0], vec![vec![-0.1, 0.0], vec![0.0, 0.2]], exp1())
            .unwrap();
        let diag = m.validate();
        assert_eq!(diag.len(), 3, "{diag:?}");
    }

    #[test]
    fn mean_field_examples() {
        let m = HawkesModel::new(vec![0.3, 0.7], vec![vec![0.0; 2]; 2], exp1()).unwrap();
        assert_eq!(m.mean_field_intensity().unwrap(), vec![0.3, 0.7]);
        assert_abs_diff_eq!(one_d(0.5, 0.5).mean_field_intensity().unwrap()[0], 1.0, epsilon = 1e-14);
        assert!(one_d(0.5, 1.0).mean_field_intensity().is_err());
    }

    #[test]
    fn kl_examples() {
        let pre = one_d(0.5, 0.0);
        let post = one_d(0.5, 0.5);
        assert_eq!(kl_mean_field(&pre, &pre).unwrap(), 0.0);
        let kl = kl_mean_field(&pre, &post).unwrap();
        assert_abs_diff_eq!(kl, (2.0f64).ln() - 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(kl, 0.19315, epsilon = 1e-5);
        let swapped = kl_mean_field(&post, &pre).unwrap();
        assert!((swapped - kl).abs() > 1e-3);
    }

    #[test]
    fn kl_rejects_mismatched_dimensions() {
        let two = HawkesModel::new(vec![0.5, 0.5], vec![vec![0.0; 2]; 2], exp1()).unwrap();
        assert!(matches!(
            kl_mean_field(&one_d(0.5, 0.0), &two),
            Err(HawkesError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn change_spec_requires_equal_mu() {
        assert!(ChangeSpec::new(one_d(0.5, 0.0), one_d(0.6, 0.2), 1.0).is_err());
        assert!(ChangeSpec::new(one_d(0.5, 0.0), one_d(0.5, 0.2), 1.0).is_ok());
    }

    #[test]
    fn generic_over_f32() {
        let m = HawkesModel::<f32>::new(
            vec![0.5],
            vec![vec![0.5]],
            KernelSpec::exponential(1.0).unwrap(),
        )
        .unwrap();
        assert!((m.mean_field_intensity().unwrap()[0] - 1.0).abs() < 1e-6);
    }

    fn random_stationary(d: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mu: Vec<f64> = (0..d).map(|_| 0.2 + rng.random::<f64>()).collect();
        let mut a: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        // rescale so the largest row sum is below 0.95
        let max_row = a.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
        let s = 0.95 * rng.random::<f64>() / max_row;
        a.iter_mut().flatten().for_each(|v| *v *= s);
        (mu, a)
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        for seed in 0..1000u64 {
            let d = 1 + (seed % 5) as usize;
            let (mu, a0) = random_stationary(d, seed);
            let (_, a1) = random_stationary(d, seed + 10_000);
            let pre = HawkesModel::new(mu.clone(), a0, exp1()).unwrap();
            let post = HawkesModel::new(mu, a1, exp1()).unwrap();
            let kl = kl_mean_field(&pre, &post).unwrap();
            assert!(kl >= -1e-12, "seed {seed}: {kl}");
        }
    }

    #[test]
    fn mean_field_is_a_fixed_point() {
        for seed in 0..200u64 {
            let d = 1 + (seed % 8) as usize;
            let (mu, a) = random_stationary(d, seed);
            let m = HawkesModel::new(mu.clone(), a.clone(), exp1()).unwrap();
            let x = m.mean_field_intensity().unwrap();
            for i in 0..d {
                let rhs = mu[i] + (0..d).map(|j| a[i][j] * x[j]).sum::<f64>();
                assert!((x[i] - rhs).abs() <= 1e-12, "seed {seed} node {i}");
            }
        }
    }
}
