use crate::error::{HawkesError, Result};
use crate::scalar::Real;

/// A mark `(t, u)`: an event at time `t` on node `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T> {
    pub t: T,
    pub u: usize,
}

impl<T> Event<T> {
    pub fn new(t: T, u: usize) -> Self {
        Self { t, u }
    }
}

/// Time-sorted event sequence observed on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream<T> {
    events: Vec<Event<T>>,
    horizon: T,
}

impl<T: Real> EventStream<T> {
    /// Checks strict time ordering and `0 <= t <= horizon`.
    pub fn new(events: Vec<Event<T>>, horizon: T) -> Result<Self> {
        if !(horizon >= T::zero()) || !horizon.is_finite() {
            return Err(HawkesError::InvalidArgument(format!("horizon {horizon} must be finite and >= 0")));
        }
        let mut prev: Option<T> = None;
        for e in &events {
            if !(e.t >= T::zero()) || e.t > horizon {
                return Err(HawkesError::InvalidArgument(format!(
                    "event time {} outside [0, {horizon}]",
                    e.t
                )));
            }
            if let Some(p) = prev {
                if e.t <= p {
                    return Err(HawkesError::OutOfOrder { prev: p.as_f64(), next: e.t.as_f64() });
                }
            }
            prev = Some(e.t);
        }
        Ok(Self { events, horizon })
    }

    /// Like [`EventStream::new`], additionally checking node labels against `d`.
    pub fn with_nodes(events: Vec<Event<T>>, horizon: T, d: usize) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| e.u >= d) {
            return Err(HawkesError::InvalidArgument(format!("node {} outside [0, {d})", e.u)));
        }
        Self::new(events, horizon)
    }

    pub fn empty(horizon: T) -> Self {
        Self { events: Vec::new(), horizon }
    }

    pub fn events(&self) -> &[Event<T>] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event<T>> {
        self.events
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Index of the first event with time `> t`.
    pub fn index_after(&self, t: T) -> usize {
        self.events.partition_point(|e| e.t <= t)
    }

    /// Index of the first event with time `>= t`.
    pub fn index_at_or_after(&self, t: T) -> usize {
        self.events.partition_point(|e| e.t < t)
    }

    /// Events with `a < t <= b`.
    pub fn window(&self, a: T, b: T) -> &[Event<T>] {
        let lo = self.index_after(a);
        let hi = self.index_after(b).max(lo);
        &self.events[lo..hi]
    }

    /// Largest node label plus one (zero for an empty stream).
    pub fn node_bound(&self) -> usize {
        self.events.iter().map(|e| e.u + 1).max().unwrap_or(0)
    }
}

/// Rate of node `node`'s events in `(a, b]`.
pub fn empirical_rate<T: Real>(events: &EventStream<T>, node: usize, a: T, b: T) -> Result<T> {
    if !(a < b) {
        return Err(HawkesError::InvalidArgument(format!("empty window ({a}, {b}]")));
    }
    let n = events.window(a, b).iter().filter(|e| e.u == node).count();
    Ok(T::lit(n as f64) / (b - a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ties_and_disorder() {
        let ev = vec![Event::new(1.0, 0), Event::new(1.0, 1)];
        assert!(matches!(EventStream::new(ev, 2.0), Err(HawkesError::OutOfOrder { .. })));
        let ev = vec![Event::new(1.0, 0), Event::new(3.0, 1)];
        assert!(EventStream::new(ev, 2.0).is_err());
        assert!(EventStream::with_nodes(vec![Event::new(0.5, 3)], 1.0, 2).is_err());
    }

    #[test]
    fn empirical_rate_examples() {
        let s = EventStream::<f64>::empty(10.0);
        assert_eq!(empirical_rate(&s, 0, 0.0, 10.0).unwrap(), 0.0);
        let ev = (0..10).map(|k| Event::new(0.5 * k as f64 + 0.25, 0)).collect();
        let s = EventStream::new(ev, 5.0).unwrap();
        assert_eq!(empirical_rate(&s, 0, 0.0, 5.0).unwrap(), 2.0);
        assert!(empirical_rate(&s, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn window_is_left_open_right_closed() {
        let ev = vec![Event::new(1.0, 0), Event::new(2.0, 0), Event::new(3.0, 0)];
        let s = EventStream::new(ev, 3.0).unwrap();
        let w = s.window(1.0, 3.0);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].t, 2.0);
    }
}
