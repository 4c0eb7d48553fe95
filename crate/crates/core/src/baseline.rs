//! Sliding-window baselines: score statistic, GLR with windowed EM, and a
//! Shewhart event-count chart.
//!
//! The window at grid time `g` is `(max(g − w, 0), g]`. The null intensity
//! `λ_∞` keeps the full history (or the `B`-truncated one when the model's
//! kernels are truncated); the window only limits which events and which
//! stretch of the compensator enter the statistic.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::detector::{grid_time, replay, DetectionOutcome, Detector, GridReport};
use crate::error::{HawkesError, Result};
use crate::estimation::{regularized_cholesky, EmConfig, EmFit, EmInit, EmProblem};
use crate::{Event, EventStream, HawkesModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub w: f64,
    pub gamma: f64,
    /// Alarm threshold; the upper count limit `b₂` for Shewhart.
    pub b: f64,
    /// Shewhart lower count limit `b₁`.
    pub b1: f64,
    pub max_time: Option<f64>,
}

impl WindowConfig {
    pub fn new(w: f64, gamma: f64, b: f64) -> Result<Self> {
        let cfg = Self { w, gamma, b, b1: 0.0, max_time: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_lower(mut self, b1: f64) -> Result<Self> {
        self.b1 = b1;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_time(mut self, max_time: Option<f64>) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(HawkesError::InvalidArgument(format!("window w = {} must be positive", self.w)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(HawkesError::InvalidArgument(format!("grid size γ = {} must be positive", self.gamma)));
        }
        if !self.b.is_finite() {
            return Err(HawkesError::InvalidArgument(format!("threshold {} must be finite", self.b)));
        }
        if !(self.b1 >= 0.0 && self.b1 < self.b) {
            return Err(HawkesError::InvalidArgument(format!("need 0 <= b1 < b2, got b1 = {}, b2 = {}", self.b1, self.b)));
        }
        Ok(())
    }
}

fn check_window(model: &HawkesModel, events: &EventStream, window: (f64, f64)) -> Result<()> {
    let (a, b) = window;
    if !(a >= 0.0 && a < b && b <= events.horizon()) {
        return Err(HawkesError::InvalidArgument(format!(
            "window ({a}, {b}] must be nonempty and inside [0, {}]",
            events.horizon()
        )));
    }
    if let Some(e) = events.events().iter().find(|e| e.u >= model.dim()) {
        return Err(HawkesError::InvalidArgument(format!("event on node {} outside the network", e.u)));
    }
    Ok(())
}

fn shared_exponential(model: &HawkesModel) -> Option<f64> {
    model.shared_kernel().filter(|k| k.truncation.is_none()).and_then(|k| k.exponential_rate())
}

/// Gradient of the window log-likelihood increment `ℓ_b − ℓ_a` with respect
/// to `vec(A)` at `model`'s influence matrix; coordinate `i·D + j` is
/// `∂/∂α_ij` (row `i`'s incoming influences are contiguous).
pub fn score_vector(model: &HawkesModel, events: &EventStream, window: (f64, f64)) -> Result<Vec<f64>> {
    check_window(model, events, window)?;
    let (a, b) = window;
    let d = model.dim();
    let evs = &events.events()[..events.index_after(b)];
    let mut u = vec![0.0; d * d];
    let mut g = vec![0.0; d];
    let jump = |u: &mut [f64], e: &Event, g: &[f64]| -> Result<()> {
        let i = e.u;
        let lambda = model.mu()[i] + (0..d).map(|j| model.alpha(i, j) * g[j]).sum::<f64>();
        if !(lambda > 0.0) {
            return Err(HawkesError::NonPositiveIntensity { node: i, time: e.t, value: lambda });
        }
        for j in 0..d {
            u[i * d + j] += g[j] / lambda;
        }
        Ok(())
    };
    if let Some(beta) = shared_exponential(model) {
        let mut last = 0.0;
        for e in evs {
            let decay = (-beta * (e.t - last)).exp();
            g.iter_mut().for_each(|s| *s *= decay);
            if e.t > a {
                jump(&mut u, e, &g)?;
            }
            g[e.u] += beta;
            last = e.t;
        }
    } else {
        let support = model.support();
        let mut first = 0;
        for (k, e) in evs.iter().enumerate().filter(|(_, e)| e.t > a) {
            if let Some(w) = support {
                while e.t - evs[first].t > w {
                    first += 1;
                }
            }
            g.iter_mut().for_each(|x| *x = 0.0);
            for l in &evs[first..k] {
                g[l.u] += model.kernel(e.u, l.u).density(e.t - l.t);
            }
            jump(&mut u, e, &g)?;
        }
    }
    for l in evs {
        for i in 0..d {
            u[i * d + l.u] -= model.kernel(i, l.u).cumulative_increment(a - l.t, b - l.t);
        }
    }
    Ok(u)
}

/// Event of the current window with its null intensity and per-source
/// excitation `g_j = Σ_{t_l < t, u_l = j} φ_{u j}(t − t_l)` over the full history.
#[derive(Debug, Clone)]
struct WindowEvent {
    t: f64,
    u: usize,
    lambda0: f64,
    g: Vec<f64>,
}

#[derive(Debug, Clone)]
enum History {
    /// Shared untruncated exponential kernel: `lead` sums `β e^{-β(s − t_l)}`
    /// over all events, `lag` over events that have left the window.
    Exponential { beta: f64, lead: Vec<f64>, lead_t: f64, lag: Vec<f64>, lag_t: f64 },
    /// Events before the window that can still excite.
    Generic { past: VecDeque<Event> },
}

/// Full-history null intensities plus the events of a sliding window.
#[derive(Debug, Clone)]
struct WindowedHistory {
    model: HawkesModel,
    window: VecDeque<WindowEvent>,
    history: History,
    start: f64,
    last_t: f64,
}

impl WindowedHistory {
    fn new(model: &HawkesModel) -> Self {
        let d = model.dim();
        let history = match shared_exponential(model) {
            Some(beta) => History::Exponential { beta, lead: vec![0.0; d], lead_t: 0.0, lag: vec![0.0; d], lag_t: 0.0 },
            None => History::Generic { past: VecDeque::new() },
        };
        Self { model: model.clone(), window: VecDeque::new(), history, start: 0.0, last_t: 0.0 }
    }

    fn push(&mut self, e: Event) -> Result<()> {
        let d = self.model.dim();
        if e.u >= d {
            return Err(HawkesError::InvalidArgument(format!("node {} outside the network", e.u)));
        }
        if !(e.t > self.start.max(self.last_t)) {
            return Err(HawkesError::OutOfOrder { prev: self.start.max(self.last_t), next: e.t });
        }
        let mut g = vec![0.0; d];
        match &mut self.history {
            History::Exponential { beta, lead, lead_t, .. } => {
                let decay = (-*beta * (e.t - *lead_t)).exp();
                lead.iter_mut().for_each(|s| *s *= decay);
                g.copy_from_slice(lead);
                lead[e.u] += *beta;
                *lead_t = e.t;
            }
            History::Generic { past } => {
                let m = &self.model;
                for l in past.iter().map(|p| (p.t, p.u)).chain(self.window.iter().map(|w| (w.t, w.u))) {
                    g[l.1] += m.kernel(e.u, l.1).density(e.t - l.0);
                }
            }
        }
        let lambda0 = self.model.mu()[e.u] + (0..d).map(|j| self.model.alpha(e.u, j) * g[j]).sum::<f64>();
        if !(lambda0 > 0.0) {
            return Err(HawkesError::NonPositiveIntensity { node: e.u, time: e.t, value: lambda0 });
        }
        self.window.push_back(WindowEvent { t: e.t, u: e.u, lambda0, g });
        self.last_t = e.t;
        Ok(())
    }

    /// Moves the window start to `a`.
    fn slide(&mut self, a: f64) {
        while self.window.front().is_some_and(|e| e.t <= a) {
            let e = self.window.pop_front().unwrap();
            match &mut self.history {
                History::Exponential { beta, lag, lag_t, .. } => {
                    let decay = (-*beta * (e.t - *lag_t)).exp();
                    lag.iter_mut().for_each(|s| *s *= decay);
                    lag[e.u] += *beta;
                    *lag_t = e.t;
                }
                History::Generic { past } => past.push_back(Event::new(e.t, e.u)),
            }
        }
        if let (History::Generic { past }, Some(w)) = (&mut self.history, self.model.support()) {
            while past.front().is_some_and(|e| a - e.t > w) {
                past.pop_front();
            }
        }
        self.start = a;
    }

    /// `β`-scaled excitation at `a` from events at or before `a`, for the
    /// exponential history.
    fn lag_at(&self, a: f64) -> Option<(f64, Vec<f64>)> {
        match &self.history {
            History::Exponential { beta, lag, lag_t, .. } => {
                let decay = (-*beta * (a - *lag_t)).exp();
                Some((*beta, lag.iter().map(|s| s * decay).collect()))
            }
            History::Generic { .. } => None,
        }
    }

    /// `I[i·D + j] = ∫_a^b Σ_{u_l = j} φ_ij(s − t_l) ds` over the full history.
    fn excitation_integrals(&self, a: f64, b: f64) -> Vec<f64> {
        let d = self.model.dim();
        let mut out = vec![0.0; d * d];
        match &self.history {
            History::Exponential { .. } => {
                let (beta, lag) = self.lag_at(a).unwrap();
                let old = -(-beta * (b - a)).exp_m1() / beta;
                let kernel = self.model.shared_kernel().unwrap();
                let mut col: Vec<f64> = lag.iter().map(|r| r * old).collect();
                for e in &self.window {
                    col[e.u] += kernel.cumulative(b - e.t);
                }
                for i in 0..d {
                    out[i * d..(i + 1) * d].copy_from_slice(&col);
                }
            }
            History::Generic { past } => {
                for (t, u) in past.iter().map(|p| (p.t, p.u)).chain(self.window.iter().map(|w| (w.t, w.u))) {
                    for i in 0..d {
                        out[i * d + u] += self.model.kernel(i, u).cumulative_increment(a - t, b - t);
                    }
                }
            }
        }
        out
    }

    /// Null log-likelihood of the window `(a, b]`.
    fn null_log_likelihood(&self, a: f64, b: f64, integrals: &[f64]) -> f64 {
        let logs: f64 = self.window.iter().map(|e| e.lambda0.ln()).sum();
        let mu: f64 = self.model.mu().iter().sum();
        let excite: f64 = self.model.alpha_flat().iter().zip(integrals).map(|(a, i)| a * i).sum();
        logs - mu * (b - a) - excite
    }

    /// EM sufficient statistics for the window with history restarted at `a`.
    fn restarted_problem(&self, a: f64, b: f64) -> EmProblem {
        let d = self.model.dim();
        let n = self.window.len();
        let mut excitation = vec![0.0; n * d];
        match self.lag_at(a) {
            Some((beta, lag)) => {
                for (k, e) in self.window.iter().enumerate() {
                    let decay = (-beta * (e.t - a)).exp();
                    for j in 0..d {
                        excitation[k * d + j] = (e.g[j] - lag[j] * decay).max(0.0);
                    }
                }
            }
            None => {
                let support = self.model.support();
                let mut first = 0;
                for (k, e) in self.window.iter().enumerate() {
                    if let Some(w) = support {
                        while e.t - self.window[first].t > w {
                            first += 1;
                        }
                    }
                    for l in self.window.range(first..k) {
                        excitation[k * d + l.u] += self.model.kernel(e.u, l.u).density(e.t - l.t);
                    }
                }
            }
        }
        let mut mass = vec![0.0; d * d];
        for l in &self.window {
            for i in 0..d {
                mass[i * d + l.u] += self.model.kernel(i, l.u).cumulative(b - l.t);
            }
        }
        EmProblem::from_parts(d, b - a, self.window.iter().map(|e| e.u).collect(), excitation, mass)
    }
}

/// Sliding-window score statistic `(1/w) uᵀ I₀⁻¹ u`.
#[derive(Debug, Clone)]
pub struct ScoreDetector {
    hist: WindowedHistory,
    chol: Cholesky<f64, Dyn>,
    cfg: WindowConfig,
    n: u64,
}

impl ScoreDetector {
    /// `fisher` is the per-unit-time information `I₀` (`D²×D²`); `ridge` adds `λI`.
    pub fn new(pre: &HawkesModel, fisher: &DMatrix<f64>, ridge: f64, cfg: &WindowConfig) -> Result<Self> {
        cfg.validate()?;
        pre.ensure_valid()?;
        let n = pre.dim() * pre.dim();
        if fisher.nrows() != n || fisher.ncols() != n {
            return Err(HawkesError::DimensionMismatch { expected: n, got: fisher.nrows() });
        }
        let chol = regularized_cholesky(fisher, ridge).map_err(|e| match e {
            HawkesError::NotPositiveDefinite => HawkesError::InvalidArgument(
                "Fisher information is not positive definite; add a ridge (e.g. --ridge 1)".into(),
            ),
            other => other,
        })?;
        Ok(Self { hist: WindowedHistory::new(pre), chol, cfg: *cfg, n: 0 })
    }
}

impl Detector for ScoreDetector {
    fn push(&mut self, e: Event) -> Result<()> {
        self.hist.push(e)
    }

    fn step(&mut self) -> Result<GridReport> {
        let g = grid_time(self.n + 1, self.cfg.gamma);
        let a = (g - self.cfg.w).max(0.0);
        self.hist.slide(a);
        let d = self.hist.model.dim();
        let mut u = DVector::from_vec(self.hist.excitation_integrals(a, g));
        u.neg_mut();
        for e in &self.hist.window {
            for j in 0..d {
                u[e.u * d + j] += e.g[j] / e.lambda0;
            }
        }
        let z = self.chol.l_dirty().solve_lower_triangular(&u).expect("Cholesky factor is invertible");
        let stat = z.norm_squared() / (g - a);
        self.n += 1;
        Ok(GridReport { t: g, stat, tau_hat: None, alarm: stat >= self.cfg.b })
    }

    fn next_grid_time(&self) -> f64 {
        grid_time(self.n + 1, self.cfg.gamma)
    }
}

/// Sliding-window GLR with warm-started EM.
#[derive(Debug, Clone)]
pub struct GlrDetector {
    hist: WindowedHistory,
    cfg: WindowConfig,
    em: EmConfig,
    warm_floor: f64,
    previous: Option<Vec<f64>>,
    iterations: Vec<usize>,
    n: u64,
}

/// Warm starts lift entries below this back up: zero is a fixed point of EM.
pub const DEFAULT_WARM_FLOOR: f64 = 1e-6;

impl GlrDetector {
    pub fn new(pre: &HawkesModel, cfg: &WindowConfig, em: &EmConfig) -> Result<Self> {
        cfg.validate()?;
        pre.ensure_valid()?;
        em.validate(pre.dim())?;
        Ok(Self {
            hist: WindowedHistory::new(pre),
            cfg: *cfg,
            em: em.clone(),
            warm_floor: DEFAULT_WARM_FLOOR,
            previous: None,
            iterations: Vec::new(),
            n: 0,
        })
    }

    pub fn with_warm_floor(mut self, floor: f64) -> Self {
        self.warm_floor = floor;
        self
    }

    /// Disables warm starts: every window starts from `em.init`.
    pub fn cold(mut self) -> Self {
        self.warm_floor = f64::NAN;
        self
    }

    /// EM iterations used in each evaluated window.
    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    /// Estimate and statistic on the current window ending at grid time `g`.
    fn evaluate(&mut self, g: f64) -> Result<(EmFit, f64)> {
        let a = (g - self.cfg.w).max(0.0);
        self.hist.slide(a);
        let problem = self.hist.restarted_problem(a, g);
        let mut em = self.em.clone();
        if let (Some(prev), false) = (&self.previous, self.warm_floor.is_nan()) {
            em.init = EmInit::Matrix(prev.iter().map(|v| v.max(self.warm_floor)).collect());
        }
        let fit = problem.solve(self.hist.model.mu(), &em)?;
        let integrals = self.hist.excitation_integrals(a, g);
        let stat = fit.log_likelihood - self.hist.null_log_likelihood(a, g, &integrals);
        Ok((fit, stat))
    }
}

impl Detector for GlrDetector {
    fn push(&mut self, e: Event) -> Result<()> {
        self.hist.push(e)
    }

    fn step(&mut self) -> Result<GridReport> {
        let g = grid_time(self.n + 1, self.cfg.gamma);
        let (fit, stat) = self.evaluate(g)?;
        self.iterations.push(fit.iterations);
        self.previous = Some(fit.alpha);
        self.n += 1;
        Ok(GridReport { t: g, stat, tau_hat: None, alarm: stat >= self.cfg.b })
    }

    fn next_grid_time(&self) -> f64 {
        grid_time(self.n + 1, self.cfg.gamma)
    }
}

/// Window estimate `Â` (row-major) and GLR statistic on `(a, b]`, with
/// `Â`'s history restarted at `a` and the null keeping the full history.
pub fn glr_window(pre: &HawkesModel, events: &EventStream, window: (f64, f64), em: &EmConfig) -> Result<(EmFit, f64)> {
    check_window(pre, events, window)?;
    pre.ensure_valid()?;
    let (a, b) = window;
    let mut hist = WindowedHistory::new(pre);
    for e in &events.events()[..events.index_after(b)] {
        hist.push(*e)?;
    }
    hist.slide(a);
    let fit = hist.restarted_problem(a, b).solve(pre.mu(), em)?;
    let integrals = hist.excitation_integrals(a, b);
    let stat = fit.log_likelihood - hist.null_log_likelihood(a, b, &integrals);
    Ok((fit, stat))
}

/// Event-count chart: alarms when the window count leaves `[b₁, b₂]`.
///
/// The lower limit is only checked once a full window is available.
#[derive(Debug, Clone)]
pub struct ShewhartDetector {
    times: VecDeque<f64>,
    cfg: WindowConfig,
    n: u64,
}

impl ShewhartDetector {
    pub fn new(cfg: &WindowConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { times: VecDeque::new(), cfg: *cfg, n: 0 })
    }
}

impl Detector for ShewhartDetector {
    fn push(&mut self, e: Event) -> Result<()> {
        if self.times.back().is_some_and(|&t| e.t <= t) {
            return Err(HawkesError::OutOfOrder { prev: *self.times.back().unwrap(), next: e.t });
        }
        self.times.push_back(e.t);
        Ok(())
    }

    fn step(&mut self) -> Result<GridReport> {
        let g = grid_time(self.n + 1, self.cfg.gamma);
        let a = g - self.cfg.w;
        while self.times.front().is_some_and(|&t| t <= a) {
            self.times.pop_front();
        }
        let count = self.times.len() as f64;
        let full = a >= 0.0;
        let alarm = count > self.cfg.b || (full && count < self.cfg.b1);
        self.n += 1;
        Ok(GridReport { t: g, stat: count, tau_hat: None, alarm })
    }

    fn next_grid_time(&self) -> f64 {
        grid_time(self.n + 1, self.cfg.gamma)
    }
}

pub fn score_run(
    pre: &HawkesModel,
    fisher: &DMatrix<f64>,
    ridge: f64,
    events: &EventStream,
    cfg: &WindowConfig,
) -> Result<DetectionOutcome> {
    let mut det = ScoreDetector::new(pre, fisher, ridge, cfg)?;
    replay(&mut det, events, cfg.max_time, true)
}

/// GLR over a recorded stream; also returns the EM iterations per window.
pub fn glr_run(
    pre: &HawkesModel,
    events: &EventStream,
    cfg: &WindowConfig,
    em: &EmConfig,
) -> Result<(DetectionOutcome, Vec<usize>)> {
    let mut det = GlrDetector::new(pre, cfg, em)?;
    let out = replay(&mut det, events, cfg.max_time, true)?;
    Ok((out, det.iterations))
}

pub fn shewhart_run(events: &EventStream, cfg: &WindowConfig) -> Result<DetectionOutcome> {
    let mut det = ShewhartDetector::new(cfg)?;
    replay(&mut det, events, cfg.max_time, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::log_likelihood;
    use crate::simulate::{simulate, SimConfig};
    use crate::KernelSpec;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp(beta: f64) -> KernelSpec {
        KernelSpec::exponential(beta).unwrap()
    }

    fn perturbed(m: &HawkesModel, k: usize, eps: f64) -> HawkesModel {
        let d = m.dim();
        let mut rows = m.alpha_rows();
        rows[k / d][k % d] += eps;
        m.with_alpha(rows).unwrap()
    }

    #[test]
    fn score_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rep in 0..50 {
            let d = 1 + rep % 3;
            let mu: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..1.0)).collect();
            let a: Vec<Vec<f64>> =
                (0..d).map(|_| (0..d).map(|_| rng.random_range(0.05..0.5 / d as f64)).collect()).collect();
            let kernel = if rep % 4 == 3 { exp(1.5).with_truncation(Some(2.0)).unwrap() } else { exp(1.5) };
            let m = HawkesModel::new(mu, a, kernel).unwrap();
            let s = simulate(&m, &SimConfig::new(60.0, rep as u64)).unwrap();
            let window = (20.0, 60.0);
            let u = score_vector(&m, &s, window).unwrap();
            let eps = 1e-5;
            for (k, &uk) in u.iter().enumerate() {
                let ll = |m: &HawkesModel| {
                    log_likelihood(m, &s, (20.0, 60.0), 0.0).unwrap()
                };
                let fd = (ll(&perturbed(&m, k, eps)) - ll(&perturbed(&m, k, -eps))) / (2.0 * eps);
                assert!((uk - fd).abs() <= 1e-4 * fd.abs().max(1.0), "coordinate {k}: {uk} vs {fd}");
            }
        }
    }

    #[test]
    fn score_is_zero_without_events() {
        let m = HawkesModel::new(vec![0.5, 0.5], vec![vec![0.2; 2]; 2], exp(1.0)).unwrap();
        let s = EventStream::empty(10.0);
        assert_eq!(score_vector(&m, &s, (2.0, 10.0)).unwrap(), vec![0.0; 4]);
        assert!(score_vector(&m, &s, (3.0, 3.0)).is_err());
    }

    #[test]
    fn streaming_score_matches_direct_score() {
        let m = HawkesModel::new(vec![0.5, 0.4], vec![vec![0.2, 0.1], vec![0.3, 0.1]], exp(1.0)).unwrap();
        let s = simulate(&m, &SimConfig::new(40.0, 5)).unwrap();
        let fisher = DMatrix::identity(4, 4);
        let cfg = WindowConfig::new(7.0, 0.5, 1e9).unwrap();
        for model in [m.clone(), m.with_truncation(Some(3.0)).unwrap()] {
            let out = score_run(&model, &fisher, 0.0, &s, &cfg).unwrap();
            for r in &out.trajectory {
                let a = (r.t - 7.0).max(0.0);
                let u = score_vector(&model, &s, (a, r.t)).unwrap();
                let direct = u.iter().map(|x| x * x).sum::<f64>() / (r.t - a);
                assert_abs_diff_eq!(r.stat, direct, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn score_rejects_singular_information() {
        let m = HawkesModel::new(vec![0.5], vec![vec![0.2]], exp(1.0)).unwrap();
        let cfg = WindowConfig::new(5.0, 1.0, 1.0).unwrap();
        assert!(ScoreDetector::new(&m, &DMatrix::zeros(1, 1), 0.0, &cfg).is_err());
        assert!(ScoreDetector::new(&m, &DMatrix::zeros(1, 1), 1.0, &cfg).is_ok());
    }

    #[test]
    fn glr_empty_window_is_boundary_solution() {
        let m = HawkesModel::new(vec![0.5], vec![vec![0.4]], exp(1.0)).unwrap();
        let s = EventStream::new(vec![Event::new(1.0, 0), Event::new(1.5, 0)], 10.0).unwrap();
        let (fit, stat) = glr_window(&m, &s, (4.0, 10.0), &EmConfig::default()).unwrap();
        assert_eq!(fit.alpha, vec![0.0]);
        // Σ ∫ (λ_∞ − μ) over the window
        let expected = 0.4 * ((-3.0f64).exp() - (-9.0f64).exp() + (-2.5f64).exp() - (-8.5f64).exp());
        assert_abs_diff_eq!(stat, expected, epsilon = 1e-12);
        assert!(stat >= 0.0);
    }

    #[test]
    fn glr_window_matches_direct_likelihoods() {
        let m = HawkesModel::new(vec![0.5, 0.4], vec![vec![0.2, 0.1], vec![0.3, 0.1]], exp(1.0)).unwrap();
        let s = simulate(&m, &SimConfig::new(50.0, 6)).unwrap();
        let (fit, stat) = glr_window(&m, &s, (20.0, 50.0), &EmConfig::default()).unwrap();
        let hat = HawkesModel::new(m.mu().to_vec(), fit.alpha_rows(), exp(1.0)).unwrap();
        let ll_hat = log_likelihood(&hat, &s, (20.0, 50.0), 20.0).unwrap();
        let ll0 = log_likelihood(&m, &s, (20.0, 50.0), 0.0).unwrap();
        assert_abs_diff_eq!(stat, ll_hat - ll0, epsilon = 1e-9);
    }

    #[test]
    fn streaming_glr_matches_window_evaluation() {
        let m = HawkesModel::new(vec![0.5, 0.4], vec![vec![0.2, 0.1], vec![0.3, 0.1]], exp(1.0)).unwrap();
        let s = simulate(&m, &SimConfig::new(30.0, 7)).unwrap();
        let cfg = WindowConfig::new(10.0, 1.0, 1e9).unwrap();
        let em = EmConfig { tol: 1e-10, ..EmConfig::default() };
        for model in [m.clone(), m.with_truncation(Some(3.0)).unwrap()] {
            let mut det = GlrDetector::new(&model, &cfg, &em).unwrap().cold();
            let out = replay(&mut det, &s, None, true).unwrap();
            for r in &out.trajectory {
                let (_, stat) = glr_window(&model, &s, ((r.t - 10.0).max(0.0), r.t), &em).unwrap();
                assert_abs_diff_eq!(r.stat, stat, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn warm_start_saves_iterations() {
        let m = HawkesModel::new(vec![0.5, 0.4], vec![vec![0.2, 0.1], vec![0.3, 0.1]], exp(1.0)).unwrap();
        let s = simulate(&m, &SimConfig::new(200.0, 8)).unwrap();
        let cfg = WindowConfig::new(60.0, 1.0, 1e9).unwrap();
        let em = EmConfig::default();
        let (_, warm) = glr_run(&m, &s, &cfg, &em).unwrap();
        let mut cold = GlrDetector::new(&m, &cfg, &em).unwrap().cold();
        replay(&mut cold, &s, None, false).unwrap();
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
        assert!(mean(&warm) < mean(cold.iterations()), "{} vs {}", mean(&warm), mean(cold.iterations()));
    }

    #[test]
    fn shewhart_examples() {
        let cfg = WindowConfig::new(2.0, 1.0, 2.0).unwrap();
        let out = shewhart_run(&EventStream::empty(10.0), &cfg).unwrap();
        assert!(!out.alarmed);
        let ev = [0.5, 3.1, 3.2, 3.9, 7.0].iter().map(|&t| Event::new(t, 0)).collect();
        let out = shewhart_run(&EventStream::new(ev, 10.0).unwrap(), &cfg).unwrap();
        assert!(out.alarmed);
        assert_eq!(out.stop_time, 4.0);
        assert_eq!(out.stat, 3.0);
        assert!(WindowConfig::new(2.0, 1.0, 2.0).unwrap().with_lower(3.0).is_err());
        // lower limit applies once the window is full
        let cfg = WindowConfig::new(2.0, 1.0, 5.0).unwrap().with_lower(1.0).unwrap();
        let out = shewhart_run(&EventStream::empty(10.0), &cfg).unwrap();
        assert_eq!(out.stop_time, 2.0);
        assert!(out.alarmed);
    }
}
