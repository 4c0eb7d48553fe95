//! Ogata thinning for Hawkes networks, with an optional change in the
//! influence matrix at `κ`.
//!
//! After `κ` the post-change excitation only integrates events after `κ`.
//! Randomness comes from a ChaCha8 stream: the master seed selects the key
//! and the replication index selects the stream, so replication `r` draws
//! the same numbers regardless of how replications are scheduled.

use std::collections::VecDeque;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HawkesError, Result};
use crate::{ChangeSpec, Event, EventStream, HawkesModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub seed: u64,
    /// Replication index; selects an independent stream under `seed`.
    pub stream: u64,
    pub max_events: usize,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self { horizon, seed, stream: 0, max_events: 50_000_000 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_max_events(mut self, max_events: usize) -> Self {
        self.max_events = max_events;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(HawkesError::InvalidArgument(format!("horizon {} must be positive", self.horizon)));
        }
        if self.max_events == 0 {
            return Err(HawkesError::InvalidArgument("max_events must be positive".into()));
        }
        Ok(())
    }
}

/// RNG for replication `stream` under master `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // 1 - U lies in (0, 1]
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Intensity state of the active regime.
enum Excitation {
    /// Shared untruncated exponential kernel: `R_j(t) = Σ β e^{-β(t − t_k)}`
    /// over node-`j` events of the regime, as of time `at`.
    Exponential { beta: f64, source: Vec<f64>, at: f64 },
    /// Any kernel: direct sums over retained events of the regime.
    Window { events: VecDeque<Event>, support: Option<f64> },
}

impl Excitation {
    fn for_model(model: &HawkesModel) -> Self {
        match model.shared_kernel() {
            Some(k) if k.truncation.is_none() && k.exponential_rate().is_some() => Excitation::Exponential {
                beta: k.exponential_rate().unwrap(),
                source: vec![0.0; model.dim()],
                at: 0.0,
            },
            _ => Excitation::Window { events: VecDeque::new(), support: model.support() },
        }
    }

    fn reset(&mut self, t: f64) {
        match self {
            Excitation::Exponential { source, at, .. } => {
                source.iter_mut().for_each(|s| *s = 0.0);
                *at = t;
            }
            Excitation::Window { events, .. } => events.clear(),
        }
    }

    fn advance(&mut self, t: f64) {
        match self {
            Excitation::Exponential { beta, source, at } => {
                let decay = (-*beta * (t - *at)).exp();
                source.iter_mut().for_each(|s| *s *= decay);
                *at = t;
            }
            Excitation::Window { events, support } => {
                if let Some(w) = *support {
                    while events.front().is_some_and(|e| t - e.t > w) {
                        events.pop_front();
                    }
                }
            }
        }
    }

    fn record(&mut self, e: Event) {
        match self {
            Excitation::Exponential { beta, source, .. } => source[e.u] += *beta,
            Excitation::Window { events, .. } => events.push_back(e),
        }
    }

    /// Left-limit intensities at the state's current time (exponential) or at `t`.
    fn intensities(&self, model: &HawkesModel, t: f64, out: &mut [f64]) {
        let d = model.dim();
        out.copy_from_slice(model.mu());
        match self {
            Excitation::Exponential { source, .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &model.alpha_flat()[i * d..(i + 1) * d];
                    *o += row.iter().zip(source).map(|(a, s)| a * s).sum::<f64>();
                }
            }
            Excitation::Window { events, .. } => {
                for e in events.iter().filter(|e| e.t < t) {
                    for (i, o) in out.iter_mut().enumerate() {
                        let a = model.alpha(i, e.u);
                        if a != 0.0 {
                            *o += a * model.kernel(i, e.u).density(t - e.t);
                        }
                    }
                }
            }
        }
    }

    /// Upper bound on the total intensity over `[t, next event)`.
    fn bound(&self, model: &HawkesModel, t: f64, scratch: &mut [f64]) -> f64 {
        match self {
            // λ is nonincreasing between events, so the right limit bounds it
            Excitation::Exponential { .. } => {
                self.intensities(model, t, scratch);
                scratch.iter().sum()
            }
            Excitation::Window { events, .. } => {
                let mut total: f64 = model.mu().iter().sum();
                for e in events {
                    for i in 0..model.dim() {
                        let a = model.alpha(i, e.u);
                        if a != 0.0 {
                            total += a * model.kernel(i, e.u).tail_sup(t - e.t);
                        }
                    }
                }
                total
            }
        }
    }
}

/// Lazy event generator; yields events in time order up to the horizon.
pub struct HawkesSampler {
    pre: HawkesModel,
    post: Option<HawkesModel>,
    kappa: f64,
    in_post: bool,
    excitation: Excitation,
    rng: ChaCha8Rng,
    t: f64,
    horizon: f64,
    emitted: usize,
    max_events: usize,
    lambda: Vec<f64>,
    done: bool,
}

impl HawkesSampler {
    pub fn new(model: &HawkesModel, cfg: &SimConfig) -> Result<Self> {
        cfg.check()?;
        model.ensure_valid()?;
        Ok(Self::build(model.clone(), None, f64::INFINITY, cfg))
    }

    pub fn with_change(spec: &ChangeSpec, cfg: &SimConfig) -> Result<Self> {
        cfg.check()?;
        spec.pre.ensure_valid()?;
        spec.post.ensure_valid()?;
        Ok(Self::build(spec.pre.clone(), Some(spec.post.clone()), spec.kappa, cfg))
    }

    fn build(pre: HawkesModel, post: Option<HawkesModel>, kappa: f64, cfg: &SimConfig) -> Self {
        let d = pre.dim();
        Self {
            excitation: Excitation::for_model(&pre),
            pre,
            post,
            kappa,
            in_post: false,
            rng: replication_rng(cfg.seed, cfg.stream),
            t: 0.0,
            horizon: cfg.horizon,
            emitted: 0,
            max_events: cfg.max_events,
            lambda: vec![0.0; d],
            done: false,
        }
    }

    fn active(&self) -> &HawkesModel {
        match (&self.post, self.in_post) {
            (Some(post), true) => post,
            _ => &self.pre,
        }
    }

    pub fn next_event(&mut self) -> Result<Option<Event>> {
        if self.done {
            return Ok(None);
        }
        let mut scratch = std::mem::take(&mut self.lambda);
        let out = self.draw(&mut scratch);
        self.lambda = scratch;
        if !matches!(out, Ok(Some(_))) {
            self.done = true;
        }
        out
    }

    fn draw(&mut self, scratch: &mut [f64]) -> Result<Option<Event>> {
        loop {
            let model = match (&self.post, self.in_post) {
                (Some(post), true) => post,
                _ => &self.pre,
            };
            let bound = self.excitation.bound(model, self.t, scratch);
            let candidate = self.t + exp_draw(&mut self.rng, bound);
            if candidate > self.horizon {
                self.t = self.horizon;
                return Ok(None);
            }
            if let (false, Some(post)) = (self.in_post, &self.post) {
                if candidate > self.kappa {
                    // memoryless restart at the change time under the post-change law
                    self.t = self.kappa;
                    self.in_post = true;
                    self.excitation = Excitation::for_model(post);
                    self.excitation.reset(self.kappa);
                    continue;
                }
            }
            let u: f64 = self.rng.random();
            self.excitation.advance(candidate);
            self.t = candidate;
            let model = self.active();
            self.excitation.intensities(model, candidate, scratch);
            let total: f64 = scratch.iter().sum();
            if total > bound * (1.0 + 1e-9) {
                return Err(HawkesError::DominatingRateExceeded { bound, value: total, time: candidate });
            }
            let level = u * bound;
            if level < total {
                let mut cum = 0.0;
                let mut node = scratch.len() - 1;
                for (i, l) in scratch.iter().enumerate() {
                    cum += l;
                    if level < cum {
                        node = i;
                        break;
                    }
                }
                if self.emitted >= self.max_events {
                    return Err(HawkesError::EventCap { cap: self.max_events, time: candidate });
                }
                let e = Event::new(candidate, node);
                self.excitation.record(e);
                self.emitted += 1;
                return Ok(Some(e));
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

impl Iterator for HawkesSampler {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_event().transpose()
    }
}

fn collect(mut sampler: HawkesSampler, horizon: f64) -> Result<EventStream> {
    let mut events = Vec::new();
    while let Some(e) = sampler.next_event()? {
        events.push(e);
    }
    EventStream::new(events, horizon)
}

/// Exact Hawkes sample on `[0, horizon]`.
pub fn simulate(model: &HawkesModel, cfg: &SimConfig) -> Result<EventStream> {
    collect(HawkesSampler::new(model, cfg)?, cfg.horizon)
}

/// Sample following `pre` up to `κ` and `post` (with history restarted at `κ`) after.
pub fn simulate_with_change(spec: &ChangeSpec, cfg: &SimConfig) -> Result<EventStream> {
    collect(HawkesSampler::with_change(spec, cfg)?, cfg.horizon)
}

/// Thinning against fixed per-node dominating rates `bound[i] ≥ sup λ_i`.
///
/// The candidate points and uniforms do not depend on the model, so two
/// models driven by the same seed share their random numbers; if `A ≤ A'`
/// elementwise the accepted events under `A` are a subset of those under `A'`.
/// Fails if an intensity exceeds its bound.
pub fn simulate_dominated(model: &HawkesModel, cfg: &SimConfig, bound: &[f64]) -> Result<EventStream> {
    cfg.check()?;
    model.ensure_valid()?;
    let d = model.dim();
    if bound.len() != d {
        return Err(HawkesError::DimensionMismatch { expected: d, got: bound.len() });
    }
    let total: f64 = bound.iter().sum();
    let mut rng = replication_rng(cfg.seed, cfg.stream);
    let mut excitation = Excitation::for_model(model);
    let mut lambda = vec![0.0; d];
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp_draw(&mut rng, total);
        if t > cfg.horizon {
            break;
        }
        let pick: f64 = rng.random::<f64>() * total;
        let u: f64 = rng.random();
        let mut node = d - 1;
        let mut cum = 0.0;
        for (i, b) in bound.iter().enumerate() {
            cum += b;
            if pick < cum {
                node = i;
                break;
            }
        }
        excitation.advance(t);
        excitation.intensities(model, t, &mut lambda);
        if lambda[node] > bound[node] {
            return Err(HawkesError::DominatingRateExceeded { bound: bound[node], value: lambda[node], time: t });
        }
        if u * bound[node] < lambda[node] {
            if events.len() >= cfg.max_events {
                return Err(HawkesError::EventCap { cap: cfg.max_events, time: t });
            }
            let e = Event::new(t, node);
            excitation.record(e);
            events.push(e);
        }
    }
    EventStream::new(events, cfg.horizon)
}
