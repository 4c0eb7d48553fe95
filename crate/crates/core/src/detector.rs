//! Streaming detector interface and the replay loop shared by all statistics.

use crate::error::{HawkesError, Result};
use crate::{Event, EventStream};

/// Statistic reported at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridReport {
    pub t: f64,
    pub stat: f64,
    /// Estimated change time, for statistics that maximize over one.
    pub tau_hat: Option<f64>,
    pub alarm: bool,
}

/// An online detector fed events in time order and polled on a grid.
///
/// Callers push every event with `t <= next_grid_time()` before calling
/// [`Detector::step`], which evaluates the statistic at that grid time.
pub trait Detector {
    fn push(&mut self, e: Event) -> Result<()>;
    fn step(&mut self) -> Result<GridReport>;
    fn next_grid_time(&self) -> f64;
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn push(&mut self, e: Event) -> Result<()> {
        (**self).push(e)
    }
    fn step(&mut self) -> Result<GridReport> {
        (**self).step()
    }
    fn next_grid_time(&self) -> f64 {
        (**self).next_grid_time()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub alarmed: bool,
    /// Grid time of the alarm, or of the last evaluation without one.
    pub stop_time: f64,
    pub tau_hat: Option<f64>,
    /// Last reported statistic.
    pub stat: f64,
    pub trajectory: Vec<GridReport>,
    /// Events pushed before stopping.
    pub events_seen: usize,
}

/// Replays `source` through `det` until an alarm or `max_time`.
///
/// Grid points up to and including `max_time` are evaluated; events after
/// the stopping grid time are not consumed.
pub fn run_detector<D, I>(det: &mut D, source: I, max_time: f64, record: bool) -> Result<DetectionOutcome>
where
    D: Detector + ?Sized,
    I: IntoIterator<Item = Result<Event>>,
{
    if !max_time.is_finite() || max_time < 0.0 {
        return Err(HawkesError::InvalidArgument(format!("max_time {max_time} must be finite and >= 0")));
    }
    let mut out = DetectionOutcome {
        alarmed: false,
        stop_time: 0.0,
        tau_hat: None,
        stat: 0.0,
        trajectory: Vec::new(),
        events_seen: 0,
    };
    let poll = |det: &mut D, out: &mut DetectionOutcome| -> Result<bool> {
        let r = det.step()?;
        out.stop_time = r.t;
        out.tau_hat = r.tau_hat;
        out.stat = r.stat;
        out.alarmed = r.alarm;
        if record {
            out.trajectory.push(r);
        }
        Ok(r.alarm)
    };
    for e in source {
        let e = e?;
        while det.next_grid_time() < e.t {
            if det.next_grid_time() > max_time {
                return Ok(out);
            }
            if poll(det, &mut out)? {
                return Ok(out);
            }
        }
        if e.t > max_time {
            break;
        }
        det.push(e)?;
        out.events_seen += 1;
    }
    while det.next_grid_time() <= max_time {
        if poll(det, &mut out)? {
            return Ok(out);
        }
    }
    Ok(out)
}

/// [`run_detector`] over a recorded stream, up to `max_time` or its horizon.
pub fn replay<D: Detector + ?Sized>(
    det: &mut D,
    events: &EventStream,
    max_time: Option<f64>,
    record: bool,
) -> Result<DetectionOutcome> {
    let end = max_time.unwrap_or(events.horizon()).min(events.horizon());
    run_detector(det, events.events().iter().copied().map(Ok), end, record)
}

/// `k`-th grid time `kγ`, computed without accumulating rounding error.
#[inline]
pub(crate) fn grid_time(k: u64, gamma: f64) -> f64 {
    k as f64 * gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts events; alarms once `limit` have been seen.
    struct Counter {
        n: u64,
        count: usize,
        limit: usize,
        pushed: Vec<f64>,
    }

    impl Detector for Counter {
        fn push(&mut self, e: Event) -> Result<()> {
            assert!(e.t <= self.next_grid_time());
            self.pushed.push(e.t);
            self.count += 1;
            Ok(())
        }
        fn step(&mut self) -> Result<GridReport> {
            let t = self.next_grid_time();
            self.n += 1;
            Ok(GridReport { t, stat: self.count as f64, tau_hat: None, alarm: self.count >= self.limit })
        }
        fn next_grid_time(&self) -> f64 {
            grid_time(self.n + 1, 1.0)
        }
    }

    fn stream() -> EventStream {
        let ev = [0.5, 1.0, 2.5, 2.7, 6.0].iter().map(|&t| Event::new(t, 0)).collect();
        EventStream::new(ev, 8.0).unwrap()
    }

    #[test]
    fn events_on_grid_points_are_pushed_first() {
        let mut det = Counter { n: 0, count: 0, limit: usize::MAX, pushed: vec![] };
        let out = replay(&mut det, &stream(), None, true).unwrap();
        let stats: Vec<f64> = out.trajectory.iter().map(|r| r.stat).collect();
        assert_eq!(stats, vec![2.0, 2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 5.0]);
        assert_eq!(out.stop_time, 8.0);
        assert!(!out.alarmed);
    }

    #[test]
    fn stops_at_first_alarm_without_consuming_later_events() {
        let mut det = Counter { n: 0, count: 0, limit: 3, pushed: vec![] };
        let out = replay(&mut det, &stream(), None, false).unwrap();
        assert!(out.alarmed);
        assert_eq!(out.stop_time, 3.0);
        assert_eq!(out.events_seen, 4);
        assert!(out.trajectory.is_empty());
    }

    #[test]
    fn max_time_caps_the_run() {
        let mut det = Counter { n: 0, count: 0, limit: usize::MAX, pushed: vec![] };
        let out = replay(&mut det, &stream(), Some(2.0), true).unwrap();
        assert_eq!(out.trajectory.len(), 2);
        assert_eq!(det.pushed, vec![0.5, 1.0]);
    }
}
