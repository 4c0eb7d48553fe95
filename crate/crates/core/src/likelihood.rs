//! Conditional intensities and window log-likelihoods.
//!
//! Intensities are left limits: an event at exactly `t` does not excite
//! `λ(t)`. A `history_start` of `h` means only events with `t_k > h` excite.

use crate::error::{HawkesError, Result};
use crate::events::{Event, EventStream};
use crate::model::HawkesModel;
use crate::quadrature::adaptive_simpson;
use crate::scalar::Real;

/// How the compensator `∫ λ` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compensator {
    /// Through the cumulative kernels `Φ`.
    #[default]
    Analytic,
    /// Adaptive Simpson quadrature of `λ` between breakpoints.
    Quadrature,
}

const QUADRATURE_TOL: f64 = 1e-13;

/// Index range of events that can excite at time `t` given the history start
/// and the model's kernel support.
fn exciting_range<T: Real>(model: &HawkesModel<T>, events: &[Event<T>], t: T, history_start: T) -> (usize, usize) {
    let hi = events.partition_point(|e| e.t < t);
    let mut lo = events.partition_point(|e| e.t <= history_start);
    if let Some(w) = model.support() {
        lo = lo.max(events.partition_point(|e| e.t < t - w));
    }
    (lo, hi.max(lo))
}

/// `λ_i(t) = μ_i + Σ_j α_ij Σ_{h < t_k < t, u_k = j} φ_ij(t − t_k)`.
pub fn conditional_intensity<T: Real>(
    model: &HawkesModel<T>,
    events: &EventStream<T>,
    node: usize,
    t: T,
    history_start: T,
) -> Result<T> {
    if history_start > t {
        return Err(HawkesError::InvalidArgument(format!(
            "history start {history_start} is after evaluation time {t}"
        )));
    }
    if node >= model.dim() {
        return Err(HawkesError::InvalidArgument(format!("node {node} outside the network")));
    }
    Ok(intensity_unchecked(model, events.events(), node, t, history_start))
}

pub(crate) fn intensity_unchecked<T: Real>(
    model: &HawkesModel<T>,
    events: &[Event<T>],
    node: usize,
    t: T,
    history_start: T,
) -> T {
    let (lo, hi) = exciting_range(model, events, t, history_start);
    let mut lambda = model.mu()[node];
    for e in &events[lo..hi] {
        let a = model.alpha(node, e.u);
        if a != T::zero() {
            lambda = lambda + a * model.kernel(node, e.u).density(t - e.t);
        }
    }
    lambda
}

/// Events that can excite anywhere in `[a, b]`.
fn compensating_range<T: Real>(model: &HawkesModel<T>, events: &[Event<T>], a: T, b: T, history_start: T) -> (usize, usize) {
    let hi = events.partition_point(|e| e.t < b);
    let mut lo = events.partition_point(|e| e.t <= history_start);
    if let Some(w) = model.support() {
        lo = lo.max(events.partition_point(|e| e.t < a - w));
    }
    (lo, hi.max(lo))
}

/// `∫_a^b λ_i(s) ds` with history from `history_start`.
pub fn compensator<T: Real>(
    model: &HawkesModel<T>,
    events: &EventStream<T>,
    node: usize,
    a: T,
    b: T,
    history_start: T,
    method: Compensator,
) -> T {
    match method {
        Compensator::Analytic => analytic_compensator(model, events.events(), node, a, b, history_start),
        Compensator::Quadrature => quadrature_compensator(model, events.events(), node, a, b, history_start),
    }
}

fn analytic_compensator<T: Real>(
    model: &HawkesModel<T>,
    events: &[Event<T>],
    node: usize,
    a: T,
    b: T,
    history_start: T,
) -> T {
    let (lo, hi) = compensating_range(model, events, a, b, history_start);
    let mut acc = model.mu()[node] * (b - a);
    for e in &events[lo..hi] {
        let alpha = model.alpha(node, e.u);
        if alpha != T::zero() {
            acc = acc + alpha * model.kernel(node, e.u).cumulative_increment(a - e.t, b - e.t);
        }
    }
    acc
}

fn quadrature_compensator<T: Real>(
    model: &HawkesModel<T>,
    events: &[Event<T>],
    node: usize,
    a: T,
    b: T,
    history_start: T,
) -> T {
    // λ is smooth between event times and, for finite-support kernels,
    // between the times where an event's influence switches off
    let mut breaks = vec![a, b];
    let (lo, hi) = compensating_range(model, events, a, b, history_start);
    for e in &events[lo..hi] {
        if e.t > a && e.t < b {
            breaks.push(e.t);
        }
        if let Some(w) = model.kernel(node, e.u).support() {
            let end = e.t + w;
            if end > a && end < b {
                breaks.push(end);
            }
        }
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    breaks.dedup();
    let tol = T::lit(QUADRATURE_TOL);
    let half = T::lit(0.5);
    breaks
        .windows(2)
        .map(|w| {
            // the exciting set is fixed on each piece; take it at the midpoint so
            // jumps at the piece ends fall on the correct side
            let mid = (w[0] + w[1]) * half;
            let active: Vec<&Event<T>> = events[lo..hi]
                .iter()
                .filter(|e| {
                    e.t < mid
                        && model.alpha(node, e.u) != T::zero()
                        && model.kernel(node, e.u).support().is_none_or(|sw| mid - e.t <= sw)
                })
                .collect();
            let f = |s: T| {
                active.iter().fold(model.mu()[node], |acc, e| {
                    acc + model.alpha(node, e.u) * model.kernel(node, e.u).density((s - e.t).max(T::zero()))
                })
            };
            adaptive_simpson(&f, w[0], w[1], tol, 40)
        })
        .fold(T::zero(), |x, y| x + y)
}

/// Per-node log-likelihood over `(a, b]`:
/// `Σ_{t_k ∈ (a,b], u_k = i} log λ_i(t_k) − ∫_a^b λ_i(s) ds`.
pub fn node_log_likelihood<T: Real>(
    model: &HawkesModel<T>,
    events: &EventStream<T>,
    node: usize,
    window: (T, T),
    history_start: T,
    method: Compensator,
) -> Result<T> {
    let (a, b) = check_window(events, window, history_start)?;
    let mut log_sum = T::zero();
    for e in events.window(a, b).iter().filter(|e| e.u == node) {
        let lambda = intensity_unchecked(model, events.events(), node, e.t, history_start);
        if !(lambda > T::zero()) {
            return Err(HawkesError::NonPositiveIntensity {
                node,
                time: e.t.as_f64(),
                value: lambda.as_f64(),
            });
        }
        log_sum = log_sum + lambda.ln();
    }
    Ok(log_sum - compensator(model, events, node, a, b, history_start, method))
}

fn check_window<T: Real>(events: &EventStream<T>, window: (T, T), history_start: T) -> Result<(T, T)> {
    let (a, b) = window;
    if !(history_start <= a && a <= b && b <= events.horizon()) {
        return Err(HawkesError::InvalidArgument(format!(
            "need history_start <= a <= b <= horizon, got {history_start}, ({a}, {b}], {}",
            events.horizon()
        )));
    }
    Ok((a, b))
}

/// Network log-likelihood over `(a, b]`, the sum of the per-node terms.
pub fn log_likelihood<T: Real>(
    model: &HawkesModel<T>,
    events: &EventStream<T>,
    window: (T, T),
    history_start: T,
) -> Result<T> {
    log_likelihood_with(model, events, window, history_start, Compensator::Analytic)
}

pub fn log_likelihood_with<T: Real>(
    model: &HawkesModel<T>,
    events: &EventStream<T>,
    window: (T, T),
    history_start: T,
    method: Compensator,
) -> Result<T> {
    if let Some(e) = events.events().iter().find(|e| e.u >= model.dim()) {
        return Err(HawkesError::InvalidArgument(format!("event on node {} outside the network", e.u)));
    }
    let mut total = T::zero();
    for node in 0..model.dim() {
        total = total + node_log_likelihood(model, events, node, window, history_start, method)?;
    }
    Ok(total)
}

/// Closed-form log-likelihood for a model whose edges all share one
/// untruncated exponential kernel, using the recursion
/// `R_j(t_k) = e^{-β(t_k − t_{k−1})}(R_j(t_{k−1}) + β 1{u_{k−1} = j})`.
/// Returns `None` for other kernels.
pub fn exponential_log_likelihood<T: Real>(
    model: &HawkesModel<T>,
    events: &EventStream<T>,
    window: (T, T),
    history_start: T,
) -> Result<Option<T>> {
    let beta = match model.shared_kernel() {
        Some(k) if k.truncation.is_none() => match k.exponential_rate() {
            Some(beta) => beta,
            None => return Ok(None),
        },
        _ => return Ok(None),
    };
    let (a, b) = check_window(events, window, history_start)?;
    let d = model.dim();
    let mut source = vec![T::zero(); d];
    let mut last_t = history_start;
    let mut log_sum = T::zero();
    let mut count = vec![T::zero(); d];
    let start = events.index_after(history_start);
    let stop = events.index_after(b);
    for e in &events.events()[start..stop] {
        let decay = (-beta * (e.t - last_t)).exp();
        source.iter_mut().for_each(|s| *s = *s * decay);
        if e.t > a {
            let i = e.u;
            let lambda = (0..d).fold(model.mu()[i], |acc, j| acc + model.alpha(i, j) * source[j]);
            if !(lambda > T::zero()) {
                return Err(HawkesError::NonPositiveIntensity { node: i, time: e.t.as_f64(), value: lambda.as_f64() });
            }
            log_sum = log_sum + lambda.ln();
        }
        source[e.u] = source[e.u] + beta;
        last_t = e.t;
        count[e.u] = count[e.u] + T::one();
    }
    // compensator: μ(b − a) + Σ_k c_{u_k} [Φ(b − t_k) − Φ(a − t_k)]
    let mu_total = model.mu().iter().fold(T::zero(), |x, &y| x + y);
    let mut comp = mu_total * (b - a);
    for e in &events.events()[start..stop] {
        comp = comp + model.column_mass(e.u, a - e.t, b - e.t);
    }
    Ok(Some(log_sum - comp))
}
