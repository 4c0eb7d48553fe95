//! Influence-matrix estimation by branching-structure EM, and Monte Carlo
//! Fisher information.
//!
//! The window likelihood restarts history at the window start: only events
//! inside `(a, b]` excite, and each contributes its kernel mass up to `b`.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::baseline::score_vector;
use crate::error::{HawkesError, Result};
use crate::simulate::{simulate, SimConfig};
use crate::{EventStream, HawkesModel};

#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// Every `α_ij` starts at this value.
    Uniform(f64),
    /// Row-major `D×D` starting matrix, e.g. the previous window's estimate.
    Matrix(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Stop once an iteration improves the log-likelihood by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub init: EmInit,
    /// Also update the base rates (otherwise they stay at the template's).
    pub fit_mu: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 1000, init: EmInit::Uniform(0.1), fit_mu: false }
    }
}

impl EmConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(HawkesError::InvalidArgument(format!("EM tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(HawkesError::InvalidArgument("EM needs max_iter >= 1".into()));
        }
        match &self.init {
            EmInit::Uniform(v) if !(*v >= 0.0) => {
                Err(HawkesError::InvalidArgument(format!("EM initial value {v} must be >= 0")))
            }
            EmInit::Matrix(m) if m.len() != d * d => Err(HawkesError::DimensionMismatch { expected: d * d, got: m.len() }),
            EmInit::Matrix(m) if m.iter().any(|v| !(*v >= 0.0)) => {
                Err(HawkesError::InvalidArgument("EM initial matrix must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub mu: Vec<f64>,
    /// Row-major `D×D` estimate.
    pub alpha: Vec<f64>,
    pub log_likelihood: f64,
    /// M-steps applied.
    pub iterations: usize,
    pub converged: bool,
    /// Window log-likelihood before each M-step and at the returned iterate.
    pub trace: Vec<f64>,
}

impl EmFit {
    pub fn alpha_rows(&self) -> Vec<Vec<f64>> {
        let d = self.mu.len();
        self.alpha.chunks(d).map(<[f64]>::to_vec).collect()
    }
}

/// Events per logarithm in the EM likelihood pass.
const LOG_CHUNK: usize = 8;

/// Sufficient statistics of a window for the EM iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmProblem {
    d: usize,
    length: f64,
    /// Node of each window event.
    nodes: Vec<usize>,
    /// `g[e·D + j] = Σ_{in-window l < e, u_l = j} φ_{u_e j}(t_e − t_l)`.
    excitation: Vec<f64>,
    /// `mass[i·D + j] = Σ_{in-window l, u_l = j} Φ_ij(b − t_l)`.
    mass: Vec<f64>,
}

impl EmProblem {
    pub(crate) fn from_parts(d: usize, length: f64, nodes: Vec<usize>, excitation: Vec<f64>, mass: Vec<f64>) -> Self {
        debug_assert_eq!(excitation.len(), nodes.len() * d);
        debug_assert_eq!(mass.len(), d * d);
        Self { d, length, nodes, excitation, mass }
    }

    /// Builds the window `(a, b]` of `events` under `model`'s kernels.
    pub fn from_events(model: &HawkesModel, events: &EventStream, window: (f64, f64)) -> Result<Self> {
        let (a, b) = window;
        if !(a < b) || a < 0.0 || b > events.horizon() {
            return Err(HawkesError::InvalidArgument(format!(
                "window ({a}, {b}] must be nonempty and inside [0, {}]",
                events.horizon()
            )));
        }
        let d = model.dim();
        let win = events.window(a, b);
        if let Some(e) = win.iter().find(|e| e.u >= d) {
            return Err(HawkesError::InvalidArgument(format!("event on node {} outside the network", e.u)));
        }
        let mut excitation = vec![0.0; win.len() * d];
        let beta = model
            .shared_kernel()
            .filter(|k| k.truncation.is_none())
            .and_then(|k| k.exponential_rate());
        if let Some(beta) = beta {
            let mut source = vec![0.0; d];
            let mut last = a;
            for (k, e) in win.iter().enumerate() {
                let decay = (-beta * (e.t - last)).exp();
                source.iter_mut().for_each(|s| *s *= decay);
                excitation[k * d..(k + 1) * d].copy_from_slice(&source);
                source[e.u] += beta;
                last = e.t;
            }
        } else {
            let support = model.support();
            let mut first = 0;
            for (k, e) in win.iter().enumerate() {
                if let Some(w) = support {
                    while e.t - win[first].t > w {
                        first += 1;
                    }
                }
                for l in &win[first..k] {
                    excitation[k * d + l.u] += model.kernel(e.u, l.u).density(e.t - l.t);
                }
            }
        }
        let mut mass = vec![0.0; d * d];
        for l in win {
            for i in 0..d {
                mass[i * d + l.u] += model.kernel(i, l.u).cumulative(b - l.t);
            }
        }
        Ok(Self::from_parts(d, b - a, win.iter().map(|e| e.u).collect(), excitation, mass))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Window log-likelihood `Σ_e log λ_e − Σ_i μ_i (b − a) − Σ_ij α_ij mass_ij`.
    pub fn log_likelihood(&self, mu: &[f64], alpha: &[f64]) -> f64 {
        let d = self.d;
        let mut ll = 0.0;
        for (k, &i) in self.nodes.iter().enumerate() {
            let g = &self.excitation[k * d..(k + 1) * d];
            let row = &alpha[i * d..(i + 1) * d];
            ll += (mu[i] + row.iter().zip(g).map(|(a, x)| a * x).sum::<f64>()).ln();
        }
        ll - mu.iter().sum::<f64>() * self.length - alpha.iter().zip(&self.mass).map(|(a, m)| a * m).sum::<f64>()
    }

    /// Runs EM from `mu` and `cfg.init`.
    pub fn solve(&self, mu: &[f64], cfg: &EmConfig) -> Result<EmFit> {
        let d = self.d;
        cfg.validate(d)?;
        if mu.len() != d {
            return Err(HawkesError::DimensionMismatch { expected: d, got: mu.len() });
        }
        let mut mu = mu.to_vec();
        let mut alpha = match &cfg.init {
            EmInit::Uniform(v) => vec![*v; d * d],
            EmInit::Matrix(m) => m.clone(),
        };
        let mut trace = Vec::new();
        let mut num = vec![0.0; d * d];
        let mut mu_num = vec![0.0; d];
        let mut converged = false;
        let mut iterations = 0;
        loop {
            // one pass: likelihood at the current iterate plus the E-step sums
            num.iter_mut().for_each(|v| *v = 0.0);
            mu_num.iter_mut().for_each(|v| *v = 0.0);
            let mut log_sum = 0.0;
            // logs of short products: one `ln` per chunk instead of per event
            let mut product = 1.0;
            for (k, (g, &i)) in self.excitation.chunks_exact(d).zip(&self.nodes).enumerate() {
                let row = &alpha[i * d..(i + 1) * d];
                let lambda = mu[i] + row.iter().zip(g).map(|(a, x)| a * x).sum::<f64>();
                product *= lambda;
                if k % LOG_CHUNK == LOG_CHUNK - 1 || !(1e-150..1e150).contains(&product) {
                    log_sum += product.ln();
                    product = 1.0;
                }
                let inv = 1.0 / lambda;
                for ((n, a), x) in num[i * d..(i + 1) * d].iter_mut().zip(row).zip(g) {
                    *n += a * x * inv;
                }
                mu_num[i] += mu[i] * inv;
            }
            log_sum += product.ln();
            let ll = log_sum
                - mu.iter().sum::<f64>() * self.length
                - alpha.iter().zip(&self.mass).map(|(a, m)| a * m).sum::<f64>();
            if let Some(&prev) = trace.last() {
                if ll - prev < cfg.tol {
                    converged = true;
                }
            }
            trace.push(ll);
            if converged || iterations == cfg.max_iter {
                if !converged {
                    log::warn!("EM stopped after {iterations} iterations without converging");
                }
                return Ok(EmFit { mu, alpha, log_likelihood: ll, iterations, converged, trace });
            }
            for (k, a) in alpha.iter_mut().enumerate() {
                *a = if self.mass[k] > 0.0 { num[k] / self.mass[k] } else { 0.0 };
            }
            if cfg.fit_mu {
                for (m, n) in mu.iter_mut().zip(&mu_num) {
                    // a node without events has MLE zero; keep it strictly positive
                    *m = (n / self.length).max(f64::MIN_POSITIVE);
                }
            }
            iterations += 1;
        }
    }
}

/// EM estimate of the influence matrix on the window `(a, b]`, with kernels
/// and base rates (fixed unless `cfg.fit_mu`) taken from `template`.
pub fn em_mle(events: &EventStream, window: (f64, f64), template: &HawkesModel, cfg: &EmConfig) -> Result<EmFit> {
    let problem = EmProblem::from_events(template, events, window)?;
    problem.solve(template.mu(), cfg)
}

/// Per-unit-time Fisher information of the influence matrix at `model`,
/// `(1/(reps·w)) Σ u uᵀ` over window scores `u` of independent simulations of
/// length `sim_length` (the window is the last `w` time units of each run).
pub fn fisher_info_mc(model: &HawkesModel, sim_length: f64, w: f64, reps: usize, seed: u64) -> Result<DMatrix<f64>> {
    model.ensure_valid()?;
    if !(w > 0.0 && w <= sim_length) || reps == 0 {
        return Err(HawkesError::InvalidArgument(format!(
            "need 0 < w <= sim_length and reps >= 1, got w = {w}, sim_length = {sim_length}, reps = {reps}"
        )));
    }
    let scores: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let events = simulate(model, &SimConfig::new(sim_length, seed).with_stream(r))?;
            score_vector(model, &events, (sim_length - w, sim_length))
        })
        .collect::<Result<_>>()?;
    let n = model.dim() * model.dim();
    let mut info = DMatrix::zeros(n, n);
    for u in &scores {
        let u = nalgebra::DVector::from_column_slice(u);
        info.ger(1.0, &u, &u, 1.0);
    }
    Ok(info / (reps as f64 * w))
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(HawkesError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(HawkesError::InvalidArgument("matrix is not symmetric".into()));
    }
    Ok(())
}

/// Cholesky factor of `M + λI`; fails if that is not positive definite.
pub fn regularized_cholesky(m: &DMatrix<f64>, ridge: f64) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    check_symmetric(m)?;
    if !(ridge >= 0.0) {
        return Err(HawkesError::InvalidArgument(format!("ridge {ridge} must be >= 0")));
    }
    let n = m.nrows();
    Cholesky::new(m + DMatrix::identity(n, n) * ridge).ok_or(HawkesError::NotPositiveDefinite)
}

/// `(M + λI)⁻¹` through a Cholesky factorization.
pub fn regularized_inverse(m: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    Ok(regularized_cholesky(m, ridge)?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::log_likelihood;
    use crate::{Event, KernelSpec};
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp1() -> KernelSpec {
        KernelSpec::exponential(1.0).unwrap()
    }

    #[test]
    fn problem_likelihood_matches_restarted_window_likelihood() {
        let m = HawkesModel::new(vec![0.4, 0.3], vec![vec![0.2, 0.1], vec![0.3, 0.2]], exp1()).unwrap();
        let s = simulate(&m, &SimConfig::new(50.0, 3)).unwrap();
        let p = EmProblem::from_events(&m, &s, (10.0, 50.0)).unwrap();
        let direct = log_likelihood(&m, &s, (10.0, 50.0), 10.0).unwrap();
        assert_abs_diff_eq!(p.log_likelihood(m.mu(), m.alpha_flat()), direct, epsilon = 1e-10);

        let tab = KernelSpec::tabulated(&[(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)]).unwrap();
        let mt = HawkesModel::new(vec![0.4, 0.3], vec![vec![0.2, 0.1], vec![0.3, 0.2]], tab).unwrap();
        let p = EmProblem::from_events(&mt, &s, (10.0, 50.0)).unwrap();
        let direct = log_likelihood(&mt, &s, (10.0, 50.0), 10.0).unwrap();
        assert_abs_diff_eq!(p.log_likelihood(mt.mu(), mt.alpha_flat()), direct, epsilon = 1e-10);
    }

    #[test]
    fn em_never_decreases_the_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rep in 0..20 {
            let d = 1 + rep % 3;
            let mu: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..1.0)).collect();
            let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(0.0..0.5 / d as f64)).collect()).collect();
            let m = HawkesModel::new(mu, a, exp1()).unwrap();
            let s = simulate(&m, &SimConfig::new(200.0, rep as u64)).unwrap();
            let cfg = EmConfig { tol: 1e-9, fit_mu: rep % 2 == 0, ..EmConfig::default() };
            let fit = em_mle(&s, (0.0, 200.0), &m, &cfg).unwrap();
            for w in fit.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{:?}", fit.trace);
            }
            assert!(fit.alpha.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn one_dimensional_estimate_is_consistent() {
        let m = HawkesModel::new(vec![0.5], vec![vec![0.5]], exp1()).unwrap();
        let s = simulate(&m, &SimConfig::new(5000.0, 21)).unwrap();
        let fit = em_mle(&s, (0.0, 5000.0), &m, &EmConfig::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.alpha[0] - 0.5).abs() < 0.05, "{}", fit.alpha[0]);
    }

    #[test]
    fn poisson_data_gives_small_estimates() {
        let m = HawkesModel::new(vec![1.0, 0.5], vec![vec![0.0; 2]; 2], exp1()).unwrap();
        let s = simulate(&m, &SimConfig::new(5000.0, 2)).unwrap();
        let fit = em_mle(&s, (0.0, 5000.0), &m, &EmConfig::default()).unwrap();
        assert!(fit.alpha.iter().all(|&v| v <= 0.05), "{:?}", fit.alpha);
    }

    #[test]
    fn empty_window_returns_zero_matrix() {
        let m = HawkesModel::new(vec![1.0], vec![vec![0.3]], exp1()).unwrap();
        let s = EventStream::new(vec![Event::new(1.0, 0)], 10.0).unwrap();
        let fit = em_mle(&s, (2.0, 10.0), &m, &EmConfig::default()).unwrap();
        assert_eq!(fit.alpha, vec![0.0]);
        assert_abs_diff_eq!(fit.log_likelihood, -8.0, epsilon = 1e-12);
    }

    #[test]
    fn fits_base_rates_jointly() {
        let m = HawkesModel::new(vec![0.8, 0.3], vec![vec![0.3, 0.0], vec![0.2, 0.2]], exp1()).unwrap();
        let s = simulate(&m, &SimConfig::new(4000.0, 8)).unwrap();
        let start = HawkesModel::new(vec![1.0, 1.0], vec![vec![0.0; 2]; 2], exp1()).unwrap();
        let cfg = EmConfig { fit_mu: true, tol: 1e-6, ..EmConfig::default() };
        let fit = em_mle(&s, (0.0, 4000.0), &start, &cfg).unwrap();
        assert!((fit.mu[0] - 0.8).abs() < 0.12 && (fit.mu[1] - 0.3).abs() < 0.08, "{:?}", fit.mu);
        for (est, truth) in fit.alpha.iter().zip(m.alpha_flat()) {
            assert!((est - truth).abs() < 0.1, "{:?}", fit.alpha);
        }
    }

    #[test]
    fn reports_non_convergence_with_last_iterate() {
        let m = HawkesModel::new(vec![0.5], vec![vec![0.5]], exp1()).unwrap();
        let s = simulate(&m, &SimConfig::new(500.0, 1)).unwrap();
        let cfg = EmConfig { tol: 1e-300, max_iter: 3, ..EmConfig::default() };
        let fit = em_mle(&s, (0.0, 500.0), &m, &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
        assert_eq!(fit.trace.len(), 4);
    }

    #[test]
    fn config_validation() {
        let bad = EmConfig { tol: 0.0, ..EmConfig::default() };
        assert!(bad.validate(1).is_err());
        let bad = EmConfig { init: EmInit::Matrix(vec![0.1; 3]), ..EmConfig::default() };
        assert!(bad.validate(2).is_err());
        let bad = EmConfig { max_iter: 0, ..EmConfig::default() };
        assert!(bad.validate(1).is_err());
    }

    #[test]
    fn regularized_inverse_examples() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_abs_diff_eq!(regularized_inverse(&id, 0.0).unwrap(), id, epsilon = 1e-15);
        assert_abs_diff_eq!(regularized_inverse(&DMatrix::zeros(4, 4), 1.0).unwrap(), id, epsilon = 1e-15);
        assert!(matches!(regularized_inverse(&DMatrix::zeros(3, 3), 0.0), Err(HawkesError::NotPositiveDefinite)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let psd = &x * x.transpose();
        let inv = regularized_inverse(&psd, 1.0).unwrap();
        let resid = (psd + DMatrix::identity(6, 6)) * inv - DMatrix::<f64>::identity(6, 6);
        assert!(resid.amax() < 1e-10);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(regularized_inverse(&asym, 0.0).is_err());
    }
}
