//! CUSUM for Hawkes networks.
//!
//! The statistic at grid time `g` is `S_g = max_τ ℓ_{g,τ}` over the candidates
//! `τ ∈ {0} ∪ {t_k⁺}`, where `ℓ_{t,τ}` is the log-likelihood ratio of a change
//! to the post-change influence matrix at `τ` (post-change excitation counts
//! only events after `τ`) against no change. A candidate `τ = t_k` stands for
//! `t_k⁺`: the event at `t_k` itself does not excite the post-change intensity.
//!
//! [`CusumDetector`] updates every candidate recursively between grid points.
//! With a truncation width `B` it keeps only events in `[g − B, g]` and merges
//! candidates older than that into the best of them, whose future increments
//! no longer depend on `τ`.

use std::collections::VecDeque;

use crate::detector::{grid_time, replay, DetectionOutcome, Detector, GridReport};
use crate::error::{HawkesError, Result};
use crate::likelihood::{compensator, conditional_intensity, Compensator};
use crate::model::KernelTable;
use crate::{Event, EventStream, HawkesModel, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusumConfig {
    pub b: f64,
    pub gamma: f64,
    pub truncation: Option<f64>,
    /// Last grid time evaluated; defaults to the stream horizon on replay.
    pub max_time: Option<f64>,
}

impl CusumConfig {
    pub fn new(b: f64, gamma: f64) -> Result<Self> {
        let cfg = Self { b, gamma, truncation: None, max_time: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_truncation(mut self, width: Option<f64>) -> Result<Self> {
        self.truncation = width;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_time(mut self, max_time: Option<f64>) -> Self {
        self.max_time = max_time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(HawkesError::InvalidArgument(format!("threshold b = {} must be positive", self.b)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(HawkesError::InvalidArgument(format!("grid size γ = {} must be positive", self.gamma)));
        }
        if let Some(w) = self.truncation {
            if !(w >= self.gamma) {
                return Err(HawkesError::InvalidArgument(format!(
                    "truncation B = {w} must be at least γ = {}",
                    self.gamma
                )));
            }
        }
        Ok(())
    }
}

fn check_pair(pre: &HawkesModel, post: &HawkesModel) -> Result<()> {
    if pre.dim() != post.dim() {
        return Err(HawkesError::DimensionMismatch { expected: pre.dim(), got: post.dim() });
    }
    pre.ensure_valid()?;
    post.ensure_valid()
}

fn compensator_method(pre: &HawkesModel, post: &HawkesModel) -> Compensator {
    let closed = |m: &HawkesModel| match m.kernels() {
        KernelTable::Shared(k) => k.has_closed_form_cumulative(),
        KernelTable::PerEdge(ks) => ks.iter().all(KernelSpec::has_closed_form_cumulative),
    };
    if closed(pre) && closed(post) {
        Compensator::Analytic
    } else {
        Compensator::Quadrature
    }
}

fn log_ratio(pre: &HawkesModel, post: &HawkesModel, events: &EventStream, e: &Event, tau: f64) -> Result<f64> {
    let l1 = conditional_intensity(post, events, e.u, e.t, tau)?;
    let l0 = conditional_intensity(pre, events, e.u, e.t, 0.0)?;
    for value in [l1, l0] {
        if !(value > 0.0) {
            return Err(HawkesError::NonPositiveIntensity { node: e.u, time: e.t, value });
        }
    }
    Ok(l1.ln() - l0.ln())
}

/// `Σ_i ∫_a^b (λ_{i,τ} − λ_{i,∞}) ds`.
fn compensator_gap(pre: &HawkesModel, post: &HawkesModel, events: &EventStream, tau: f64, a: f64, b: f64) -> f64 {
    let method = compensator_method(pre, post);
    (0..pre.dim())
        .map(|i| compensator(post, events, i, a, b, tau, method) - compensator(pre, events, i, a, b, 0.0, method))
        .sum()
}

/// Direct evaluation of `ℓ_{t,τ}`.
pub fn llr_at(pre: &HawkesModel, post: &HawkesModel, events: &EventStream, tau: f64, t: f64) -> Result<f64> {
    check_pair(pre, post)?;
    if !(tau >= 0.0) || tau > t || t > events.horizon() {
        return Err(HawkesError::InvalidArgument(format!(
            "need 0 <= τ <= t <= horizon, got τ = {tau}, t = {t}, horizon = {}",
            events.horizon()
        )));
    }
    let mut ell = 0.0;
    for e in events.window(tau, t) {
        ell += log_ratio(pre, post, events, e, tau)?;
    }
    Ok(ell - compensator_gap(pre, post, events, tau, tau, t))
}

/// One grid step of the recursion: `ℓ_{(n+1)γ,τ}` from `ℓ_{nγ,τ}`.
pub fn llr_step(
    pre: &HawkesModel,
    post: &HawkesModel,
    events: &EventStream,
    ell: f64,
    n: u64,
    gamma: f64,
    tau: f64,
) -> Result<f64> {
    check_pair(pre, post)?;
    let a = grid_time(n, gamma);
    let b = grid_time(n + 1, gamma);
    if !(tau >= 0.0) || tau > a || b > events.horizon() {
        return Err(HawkesError::InvalidArgument(format!(
            "need 0 <= τ <= nγ and (n+1)γ <= horizon, got τ = {tau}, nγ = {a}, horizon = {}",
            events.horizon()
        )));
    }
    let mut next = ell;
    for e in events.window(a, b) {
        next += log_ratio(pre, post, events, e, tau)?;
    }
    Ok(next - compensator_gap(pre, post, events, tau, a, b))
}

/// `Σ_i α_ij (Φ̃_ij(hi) − Φ̃_ij(lo))` with column sums cached for shared kernels.
#[derive(Debug, Clone)]
enum ColumnMass {
    Shared { col: Vec<f64>, kernel: KernelSpec },
    PerEdge(HawkesModel),
}

impl ColumnMass {
    fn new(model: &HawkesModel) -> Self {
        match model.shared_kernel() {
            Some(k) => {
                let d = model.dim();
                let col = (0..d).map(|j| (0..d).map(|i| model.alpha(i, j)).sum()).collect();
                ColumnMass::Shared { col, kernel: k.clone() }
            }
            None => ColumnMass::PerEdge(model.clone()),
        }
    }

    #[inline]
    fn get(&self, j: usize, lo: f64, hi: f64) -> f64 {
        match self {
            ColumnMass::Shared { col, kernel } => {
                if col[j] == 0.0 {
                    0.0
                } else {
                    col[j] * kernel.cumulative_increment(lo, hi)
                }
            }
            ColumnMass::PerEdge(m) => m.column_mass(j, lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    tau: f64,
    /// Sequence number of the first event that excites the post-change intensity.
    start: u64,
    /// `ℓ` at the last grid point (or the offset for a fresh candidate).
    base: f64,
    /// Log-intensity ratios accumulated since the last grid point.
    logs: f64,
}

/// Online CUSUM detector, exact or truncated.
#[derive(Debug, Clone)]
pub struct CusumDetector {
    pre: HawkesModel,
    post: HawkesModel,
    mass0: ColumnMass,
    mass1: ColumnMass,
    b: f64,
    gamma: f64,
    /// Events older than this no longer influence anything.
    width: Option<f64>,
    n: u64,
    events: VecDeque<Event>,
    first_seq: u64,
    next_seq: u64,
    candidates: Vec<Candidate>,
    last_t: f64,
    stat: f64,
    tau_hat: f64,
    scratch: Vec<f64>,
}

impl CusumDetector {
    /// Exact detector if `cfg.truncation` is `None`, else the truncated one
    /// with both models' kernels cut at `B`.
    pub fn new(pre: &HawkesModel, post: &HawkesModel, cfg: &CusumConfig) -> Result<Self> {
        cfg.validate()?;
        check_pair(pre, post)?;
        let (pre, post) = match cfg.truncation {
            Some(w) => (pre.with_truncation(Some(w))?, post.with_truncation(Some(w))?),
            None => (pre.clone(), post.clone()),
        };
        let width = match (pre.support(), post.support()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(Self {
            mass0: ColumnMass::new(&pre),
            mass1: ColumnMass::new(&post),
            pre,
            post,
            b: cfg.b,
            gamma: cfg.gamma,
            width,
            n: 0,
            events: VecDeque::new(),
            first_seq: 0,
            next_seq: 0,
            candidates: vec![Candidate { tau: 0.0, start: 0, base: 0.0, logs: 0.0 }],
            last_t: 0.0,
            stat: 0.0,
            tau_hat: 0.0,
            scratch: Vec::new(),
        })
    }

    pub fn statistic(&self) -> f64 {
        self.stat
    }

    pub fn tau_hat(&self) -> f64 {
        self.tau_hat
    }

    /// Number of live candidates (including the one at the earliest `τ`).
    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn retained_events(&self) -> usize {
        self.events.len()
    }

    fn current_grid(&self) -> f64 {
        grid_time(self.n, self.gamma)
    }

    /// Position in `events` of the first event exciting candidate `c`.
    #[inline]
    fn offset(&self, c: &Candidate) -> usize {
        (c.start.saturating_sub(self.first_seq) as usize).min(self.events.len())
    }
}

impl Detector for CusumDetector {
    fn push(&mut self, e: Event) -> Result<()> {
        let g = self.current_grid();
        if e.u >= self.pre.dim() {
            return Err(HawkesError::InvalidArgument(format!("node {} outside the network", e.u)));
        }
        if !(e.t > g.max(self.last_t)) {
            return Err(HawkesError::OutOfOrder { prev: self.last_t.max(g), next: e.t });
        }
        // suffix sums of post-change excitation give every candidate's λ_τ
        let k = self.events.len();
        self.scratch.clear();
        self.scratch.resize(k + 1, 0.0);
        let mut lambda0 = self.pre.mu()[e.u];
        let mut offset = 0.0;
        for (idx, ev) in self.events.iter().enumerate() {
            let age = e.t - ev.t;
            let a0 = self.pre.alpha(e.u, ev.u);
            if a0 != 0.0 {
                lambda0 += a0 * self.pre.kernel(e.u, ev.u).density(age);
            }
            let a1 = self.post.alpha(e.u, ev.u);
            if a1 != 0.0 {
                self.scratch[idx] = a1 * self.post.kernel(e.u, ev.u).density(age);
            }
            offset += self.mass0.get(ev.u, g - ev.t, age);
        }
        for idx in (0..k).rev() {
            self.scratch[idx] += self.scratch[idx + 1];
        }
        if !(lambda0 > 0.0) {
            return Err(HawkesError::NonPositiveIntensity { node: e.u, time: e.t, value: lambda0 });
        }
        let log0 = lambda0.ln();
        let mu = self.post.mu()[e.u];
        for c in 0..self.candidates.len() {
            let idx = self.offset(&self.candidates[c]);
            let lambda1 = mu + self.scratch[idx];
            if !(lambda1 > 0.0) {
                return Err(HawkesError::NonPositiveIntensity { node: e.u, time: e.t, value: lambda1 });
            }
            self.candidates[c].logs += lambda1.ln() - log0;
        }
        self.events.push_back(e);
        self.next_seq += 1;
        self.candidates.push(Candidate { tau: e.t, start: self.next_seq, base: -offset, logs: 0.0 });
        self.last_t = e.t;
        Ok(())
    }

    fn step(&mut self) -> Result<GridReport> {
        let g_prev = self.current_grid();
        let g = grid_time(self.n + 1, self.gamma);
        let k = self.events.len();
        self.scratch.clear();
        self.scratch.resize(k + 1, 0.0);
        let mut gain0 = 0.0;
        for (idx, ev) in self.events.iter().enumerate() {
            gain0 += self.mass0.get(ev.u, g_prev - ev.t, g - ev.t);
            self.scratch[idx] = self.mass1.get(ev.u, g_prev - ev.t, g - ev.t);
        }
        for idx in (0..k).rev() {
            self.scratch[idx] += self.scratch[idx + 1];
        }

        let mut best: Option<(f64, f64)> = None;
        for c in 0..self.candidates.len() {
            let idx = self.offset(&self.candidates[c]);
            let cand = &mut self.candidates[c];
            let ell = cand.base + cand.logs + gain0 - self.scratch[idx];
            cand.base = ell;
            cand.logs = 0.0;
            if cand.tau < g && best.is_none_or(|(s, _)| ell > s) {
                best = Some((ell, cand.tau));
            }
        }
        let (stat, tau_hat) = best.expect("the earliest candidate precedes every grid time");
        self.stat = stat;
        self.tau_hat = tau_hat;
        self.n += 1;

        if let Some(w) = self.width {
            let cutoff = g - w;
            let aged = self.candidates.partition_point(|c| c.tau < cutoff);
            if aged > 1 {
                let mut keep = self.candidates[0];
                for c in &self.candidates[1..aged] {
                    if c.base > keep.base {
                        keep = *c;
                    }
                }
                keep.start = 0;
                self.candidates.splice(0..aged, std::iter::once(keep));
            } else if aged == 1 {
                self.candidates[0].start = 0;
            }
            while self.events.front().is_some_and(|e| e.t < cutoff) {
                self.events.pop_front();
                self.first_seq += 1;
            }
        }

        Ok(GridReport { t: g, stat, tau_hat: Some(tau_hat), alarm: stat > self.b })
    }

    fn next_grid_time(&self) -> f64 {
        grid_time(self.n + 1, self.gamma)
    }
}

/// Exact CUSUM over a recorded stream, with the full trajectory.
pub fn cusum_run(pre: &HawkesModel, post: &HawkesModel, events: &EventStream, cfg: &CusumConfig) -> Result<DetectionOutcome> {
    if cfg.truncation.is_some() {
        return Err(HawkesError::InvalidArgument("cusum_run is the exact detector; unset the truncation".into()));
    }
    let mut det = CusumDetector::new(pre, post, cfg)?;
    replay(&mut det, events, cfg.max_time, true)
}

/// Memory-bounded CUSUM with truncation width `cfg.truncation`.
pub fn cusum_truncated_run(
    pre: &HawkesModel,
    post: &HawkesModel,
    events: &EventStream,
    cfg: &CusumConfig,
) -> Result<DetectionOutcome> {
    if cfg.truncation.is_none() {
        return Err(HawkesError::InvalidArgument("truncated CUSUM needs a truncation width".into()));
    }
    let mut det = CusumDetector::new(pre, post, cfg)?;
    replay(&mut det, events, cfg.max_time, true)
}
