//! Monte Carlo ARL/EDD evaluation and threshold calibration.
//!
//! Replications run in parallel with per-replication RNG streams and are
//! aggregated in replication order, so results do not depend on the number
//! of worker threads.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::RngExt;
use rayon::prelude::*;

use crate::baseline::{GlrDetector, ScoreDetector, ShewhartDetector, WindowConfig};
use crate::cusum::{CusumConfig, CusumDetector};
use crate::detector::{run_detector, Detector};
use crate::error::{HawkesError, Result};
use crate::estimation::EmConfig;
use crate::simulate::{replication_rng, HawkesSampler, SimConfig};
use crate::{ChangeSpec, HawkesModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cusum,
    Score,
    Glr,
    Shewhart,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cusum, Method::Score, Method::Glr, Method::Shewhart];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cusum => "cusum",
            Method::Score => "score",
            Method::Glr => "glr",
            Method::Shewhart => "shewhart",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HawkesError::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// A detector family with everything but its threshold fixed.
#[derive(Debug, Clone)]
pub enum DetectorSpec {
    Cusum { pre: HawkesModel, post: HawkesModel, gamma: f64, truncation: Option<f64> },
    Score { pre: HawkesModel, fisher: DMatrix<f64>, ridge: f64, w: f64, gamma: f64 },
    Glr { pre: HawkesModel, w: f64, gamma: f64, em: EmConfig },
    /// One-sided count chart; the threshold is the upper limit `b₂`.
    Shewhart { w: f64, gamma: f64 },
}

/// Threshold large enough that a detector never alarms.
const NEVER: f64 = f64::MAX;

impl DetectorSpec {
    pub fn method(&self) -> Method {
        match self {
            DetectorSpec::Cusum { .. } => Method::Cusum,
            DetectorSpec::Score { .. } => Method::Score,
            DetectorSpec::Glr { .. } => Method::Glr,
            DetectorSpec::Shewhart { .. } => Method::Shewhart,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            DetectorSpec::Cusum { gamma, .. }
            | DetectorSpec::Score { gamma, .. }
            | DetectorSpec::Glr { gamma, .. }
            | DetectorSpec::Shewhart { gamma, .. } => *gamma,
        }
    }

    /// Same detector on another grid. A CUSUM truncation width narrower than
    /// the new grid step is widened to it.
    pub fn with_gamma(&self, g: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            DetectorSpec::Cusum { gamma, truncation, .. } => {
                *gamma = g;
                *truncation = truncation.map(|b| b.max(g));
            }
            DetectorSpec::Score { gamma, .. }
            | DetectorSpec::Glr { gamma, .. }
            | DetectorSpec::Shewhart { gamma, .. } => *gamma = g,
        }
        out
    }

    pub fn window(&self) -> Option<f64> {
        match self {
            DetectorSpec::Cusum { .. } => None,
            DetectorSpec::Score { w, .. } | DetectorSpec::Glr { w, .. } | DetectorSpec::Shewhart { w, .. } => Some(*w),
        }
    }

    /// Whether the alarm rule is `stat > b` (otherwise `stat >= b`).
    pub fn strict(&self) -> bool {
        matches!(self, DetectorSpec::Cusum { .. } | DetectorSpec::Shewhart { .. })
    }

    /// Dimension of the monitored network, when the detector knows it.
    pub fn dim(&self) -> Option<usize> {
        match self {
            DetectorSpec::Cusum { pre, .. } | DetectorSpec::Score { pre, .. } | DetectorSpec::Glr { pre, .. } => {
                Some(pre.dim())
            }
            DetectorSpec::Shewhart { .. } => None,
        }
    }

    /// Initial bisection bracket for calibration.
    pub fn bracket(&self) -> (f64, f64) {
        match self {
            DetectorSpec::Cusum { .. } => (0.5, 20.0),
            DetectorSpec::Score { pre, .. } => {
                let d2 = (pre.dim() * pre.dim()) as f64;
                (d2, 10.0 * d2)
            }
            DetectorSpec::Glr { .. } => (1.0, 200.0),
            DetectorSpec::Shewhart { w, .. } => (1.0, 10.0 * w),
        }
    }

    pub fn build(&self, b: f64) -> Result<Box<dyn Detector + Send>> {
        Ok(match self {
            DetectorSpec::Cusum { pre, post, gamma, truncation } => {
                let cfg = CusumConfig::new(b, *gamma)?.with_truncation(*truncation)?;
                Box::new(CusumDetector::new(pre, post, &cfg)?)
            }
            DetectorSpec::Score { pre, fisher, ridge, w, gamma } => {
                Box::new(ScoreDetector::new(pre, fisher, *ridge, &WindowConfig::new(*w, *gamma, b)?)?)
            }
            DetectorSpec::Glr { pre, w, gamma, em } => {
                Box::new(GlrDetector::new(pre, &WindowConfig::new(*w, *gamma, b)?, em)?)
            }
            DetectorSpec::Shewhart { w, gamma } => Box::new(ShewhartDetector::new(&WindowConfig::new(*w, *gamma, b)?)?),
        })
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Some(Self { mean, stderr, n })
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4} (n={})", self.mean, self.stderr, self.n)
    }
}

/// How the change time is chosen in each replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaPolicy {
    Fixed(f64),
    /// Uniform over the grid cell `[⌊κ₀/γ⌋γ, ⌊κ₀/γ⌋γ + γ)`.
    UniformInGridCell(f64),
}

impl KappaPolicy {
    fn draw(&self, gamma: f64, u: f64) -> f64 {
        match *self {
            KappaPolicy::Fixed(k) => k,
            KappaPolicy::UniformInGridCell(k) => ((k / gamma).floor() + u) * gamma,
        }
    }
}

/// What the simulated streams look like.
#[derive(Debug, Clone)]
pub enum Scenario {
    Null(HawkesModel),
    Change { pre: HawkesModel, post: HawkesModel, kappa: KappaPolicy },
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub detector: DetectorSpec,
    pub b: f64,
    pub scenario: Scenario,
    pub reps: usize,
    pub seed: u64,
    /// Last grid time evaluated in each replication.
    pub max_time: f64,
}

/// One replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub kappa: Option<f64>,
    /// Alarm time, or `max_time` when censored.
    pub stop_time: f64,
    pub censored: bool,
    /// Alarm at or before the change.
    pub false_alarm: bool,
    pub events_seen: usize,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub method: Method,
    pub b: f64,
    /// Mean stopping time; censored runs count as `max_time`.
    pub arl: Estimate,
    /// Mean `T − κ` over replications with `T > κ`; censored runs count as `max_time − κ`.
    pub edd: Option<Estimate>,
    pub false_alarm_fraction: f64,
    pub censored: usize,
    pub warnings: Vec<String>,
    pub records: Vec<RepRecord>,
}

/// Seed offset for the stream that draws change times.
const KAPPA_STREAM: u64 = 0x6b61_7070_6100_0000;

fn run_rep(spec: &BenchSpec, rep: usize) -> Result<RepRecord> {
    let mut det = spec.detector.build(spec.b)?;
    let cfg = SimConfig::new(spec.max_time, spec.seed).with_stream(rep as u64);
    let (out, kappa) = match &spec.scenario {
        Scenario::Null(model) => {
            let source = HawkesSampler::new(model, &cfg)?;
            (run_detector(&mut det, source, spec.max_time, false)?, None)
        }
        Scenario::Change { pre, post, kappa } => {
            let u = replication_rng(spec.seed ^ KAPPA_STREAM, rep as u64).random::<f64>();
            let k = kappa.draw(spec.detector.gamma(), u);
            let change = ChangeSpec::new(pre.clone(), post.clone(), k)?;
            let source = HawkesSampler::with_change(&change, &cfg)?;
            (run_detector(&mut det, source, spec.max_time, false)?, Some(k))
        }
    };
    let stop_time = if out.alarmed { out.stop_time } else { spec.max_time };
    Ok(RepRecord {
        rep,
        kappa,
        stop_time,
        censored: !out.alarmed,
        false_alarm: out.alarmed && kappa.is_some_and(|k| out.stop_time <= k),
        events_seen: out.events_seen,
    })
}

/// Runs every replication of `spec` and aggregates in replication order.
pub fn bench(spec: &BenchSpec) -> Result<BenchResult> {
    if spec.reps == 0 {
        return Err(HawkesError::InvalidArgument("reps must be at least 1".into()));
    }
    if !(spec.max_time > 0.0) || !spec.max_time.is_finite() {
        return Err(HawkesError::InvalidArgument(format!("max_time {} must be positive", spec.max_time)));
    }
    let records = (0..spec.reps).into_par_iter().map(|r| run_rep(spec, r)).collect::<Result<Vec<_>>>()?;
    summarize(spec, records)
}

fn summarize(spec: &BenchSpec, records: Vec<RepRecord>) -> Result<BenchResult> {
    let n = records.len();
    let stops: Vec<f64> = records.iter().map(|r| r.stop_time).collect();
    let arl = Estimate::from_samples(&stops).expect("at least one replication");
    let censored = records.iter().filter(|r| r.censored).count();
    let false_alarms = records.iter().filter(|r| r.false_alarm).count();
    let mut warnings = Vec::new();
    if censored * 10 > n {
        warnings.push(format!("{censored} of {n} runs censored at max_time {}", spec.max_time));
    }
    let edd = match spec.scenario {
        Scenario::Null(_) => None,
        Scenario::Change { .. } => {
            let delays: Vec<f64> =
                records.iter().filter(|r| !r.false_alarm).map(|r| r.stop_time - r.kappa.expect("change run")).collect();
            if delays.len() * 2 < n {
                warnings.push(format!("only {} of {n} runs survived past the change", delays.len()));
            }
            Estimate::from_samples(&delays)
        }
    };
    for w in &warnings {
        log::warn!("{} b={}: {w}", spec.detector.method(), spec.b);
    }
    Ok(BenchResult {
        method: spec.detector.method(),
        b: spec.b,
        arl,
        edd,
        false_alarm_fraction: false_alarms as f64 / n as f64,
        censored,
        warnings,
        records,
    })
}

/// Monte Carlo ARL under the null model.
pub fn arl_mc(detector: &DetectorSpec, b: f64, model: &HawkesModel, reps: usize, seed: u64, max_time: f64) -> Result<BenchResult> {
    bench(&BenchSpec { detector: detector.clone(), b, scenario: Scenario::Null(model.clone()), reps, seed, max_time })
}

/// Monte Carlo EDD conditional on no alarm before the change.
#[allow(clippy::too_many_arguments)]
pub fn edd_mc(
    detector: &DetectorSpec,
    b: f64,
    pre: &HawkesModel,
    post: &HawkesModel,
    kappa: KappaPolicy,
    reps: usize,
    seed: u64,
    max_time: f64,
) -> Result<BenchResult> {
    let scenario = Scenario::Change { pre: pre.clone(), post: post.clone(), kappa };
    bench(&BenchSpec { detector: detector.clone(), b, scenario, reps, seed, max_time })
}

/// Running maxima of a detector's statistic along null replications.
///
/// Each replication stores `(t, m)` whenever the statistic reaches a new
/// maximum `m`, which yields the stopping time for every threshold at once.
#[derive(Debug, Clone)]
pub struct RecordCurve {
    pub strict: bool,
    pub cap: f64,
    pub gamma: f64,
    pub records: Vec<Vec<(f64, f64)>>,
    pub events: Vec<usize>,
}

impl RecordCurve {
    /// Stopping time of one replication at threshold `b`, or `None` if censored.
    pub fn stop_time(&self, rep: usize, b: f64) -> Option<f64> {
        self.records[rep].iter().find(|&&(_, m)| if self.strict { m > b } else { m >= b }).map(|&(t, _)| t)
    }

    /// ARL at `b`, with censored runs counted as the cap, and the censored count.
    pub fn arl(&self, b: f64) -> (Estimate, usize) {
        let mut censored = 0;
        let stops: Vec<f64> = (0..self.records.len())
            .map(|r| {
                self.stop_time(r, b).unwrap_or_else(|| {
                    censored += 1;
                    self.cap
                })
            })
            .collect();
        (Estimate::from_samples(&stops).expect("at least one replication"), censored)
    }

    /// Largest statistic value observed in any replication.
    pub fn max_stat(&self) -> f64 {
        self.records.iter().filter_map(|r| r.last().map(|&(_, m)| m)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs `reps` null replications up to `cap` without stopping and records running maxima.
pub fn null_records(detector: &DetectorSpec, model: &HawkesModel, reps: usize, seed: u64, cap: f64) -> Result<RecordCurve> {
    if reps == 0 {
        return Err(HawkesError::InvalidArgument("reps must be at least 1".into()));
    }
    let runs = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<(f64, f64)>, usize)> {
            let mut det = detector.build(NEVER)?;
            let cfg = SimConfig::new(cap, seed).with_stream(rep as u64);
            let mut best = f64::NEG_INFINITY;
            let mut recs = Vec::new();
            let mut seen = 0;
            let mut poll = |det: &mut Box<dyn Detector + Send>| -> Result<()> {
                let r = det.step()?;
                if r.stat > best {
                    best = r.stat;
                    recs.push((r.t, r.stat));
                }
                Ok(())
            };
            for e in HawkesSampler::new(model, &cfg)? {
                let e = e?;
                while det.next_grid_time() < e.t {
                    poll(&mut det)?;
                }
                det.push(e)?;
                seen += 1;
            }
            while det.next_grid_time() <= cap {
                poll(&mut det)?;
            }
            Ok((recs, seen))
        })
        .collect::<Result<Vec<_>>>()?;
    let (records, events) = runs.into_iter().unzip();
    Ok(RecordCurve { strict: detector.strict(), cap, gamma: detector.gamma(), records, events })
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub b: f64,
    pub arl: Estimate,
    pub censored: usize,
    pub target: f64,
}

/// Smallest threshold whose empirical ARL on `curve` reaches `target`.
///
/// Bisects on the record curve, checking that the ARL is monotone in `b`
/// at every probe; the bracket starts at `bracket` and grows geometrically.
pub fn calibrate_on_curve(curve: &RecordCurve, target: f64, bracket: (f64, f64)) -> Result<Calibration> {
    if !(target > curve.gamma) {
        return Err(HawkesError::InvalidArgument(format!("target ARL {target} must exceed γ = {}", curve.gamma)));
    }
    if curve.cap < target {
        return Err(HawkesError::Bracket(format!("cap {} is below the target ARL {target}", curve.cap)));
    }
    let arl = |b: f64| curve.arl(b).0.mean;
    let (mut lo, mut hi) = bracket;
    let mut guard = 0;
    while arl(lo) >= target {
        lo /= 2.0;
        guard += 1;
        if guard > 200 || lo < f64::MIN_POSITIVE {
            return Err(HawkesError::Bracket(format!("ARL stays above {target} as b → 0")));
        }
    }
    guard = 0;
    while arl(hi) < target {
        lo = lo.max(hi);
        hi *= 2.0;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(HawkesError::Bracket(format!("ARL never reaches {target}")));
        }
    }
    let (mut a_lo, mut a_hi) = (arl(lo), arl(hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let a_mid = arl(mid);
        if a_mid < a_lo || a_mid > a_hi {
            return Err(HawkesError::Bracket(format!("empirical ARL is not monotone near b = {mid}")));
        }
        if a_mid >= target {
            hi = mid;
            a_hi = a_mid;
        } else {
            lo = mid;
            a_lo = a_mid;
        }
    }
    let (est, censored) = curve.arl(hi);
    if (est.mean - target).abs() > 0.1 * target {
        log::warn!("calibrated ARL {} is not within 10% of {target}", est.mean);
    }
    Ok(Calibration { b: hi, arl: est, censored, target })
}

/// Multiple of the target ARL used as the null-run cap during calibration.
pub const CALIBRATION_CAP: f64 = 5.0;

/// Threshold giving ARL ≈ `target` under `model`.
pub fn calibrate_threshold(detector: &DetectorSpec, model: &HawkesModel, target: f64, reps: usize, seed: u64) -> Result<Calibration> {
    if !(target > detector.gamma()) {
        return Err(HawkesError::InvalidArgument(format!("target ARL {target} must exceed γ = {}", detector.gamma())));
    }
    let curve = null_records(detector, model, reps, seed, CALIBRATION_CAP * target)?;
    calibrate_on_curve(&curve, target, detector.bracket())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::one_dim;

    fn cusum_1d(gamma: f64) -> (HawkesModel, DetectorSpec) {
        let pre = one_dim(1.0, 0.0, 1.0).unwrap();
        let post = one_dim(1.0, 0.5, 1.0).unwrap();
        (pre.clone(), DetectorSpec::Cusum { pre, post, gamma, truncation: Some(10.0) })
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cusm".parse::<Method>().is_err());
    }

    #[test]
    fn estimate_of_constant_samples() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((e.mean, e.stderr, e.n), (2.0, 0.0, 3));
        assert!(Estimate::from_samples(&[]).is_none());
    }

    #[test]
    fn tiny_threshold_alarms_at_first_grid_point() {
        let pre = one_dim(1.0, 0.3, 1.0).unwrap();
        let det = DetectorSpec::Shewhart { w: 5.0, gamma: 0.5 };
        let r = arl_mc(&det, 1e-9, &pre, 20, 1, 100.0).unwrap();
        // a count of zero never exceeds b, so the first alarm is the first grid point with an event
        assert!(r.arl.mean < 5.0);
        let (pre, det) = cusum_1d(0.1);
        let curve = null_records(&det, &pre, 20, 2, 50.0).unwrap();
        let first = curve.records.iter().map(|r| r[0].0).collect::<Vec<_>>();
        assert!(first.iter().all(|&t| (t - 0.1).abs() < 1e-12), "{first:?}");
    }

    #[test]
    fn bench_is_deterministic_and_matches_record_curves() {
        let (pre, det) = cusum_1d(0.2);
        let a = arl_mc(&det, 2.0, &pre, 30, 9, 400.0).unwrap();
        let b = arl_mc(&det, 2.0, &pre, 30, 9, 400.0).unwrap();
        assert_eq!(a.records, b.records);
        let curve = null_records(&det, &pre, 30, 9, 400.0).unwrap();
        for r in &a.records {
            let t = curve.stop_time(r.rep, 2.0);
            assert_eq!(t, if r.censored { None } else { Some(r.stop_time) });
        }
        assert_eq!(curve.arl(2.0).0, a.arl);
    }

    #[test]
    fn conditioning_counts_add_up() {
        let (pre, det) = cusum_1d(0.1);
        let post = one_dim(1.0, 0.5, 1.0).unwrap();
        let r = edd_mc(&det, 1.0, &pre, &post, KappaPolicy::Fixed(20.0), 40, 4, 500.0).unwrap();
        let false_alarms = r.records.iter().filter(|x| x.false_alarm).count();
        assert_eq!(false_alarms + r.edd.map_or(0, |e| e.n), 40);
        assert!(false_alarms > 0, "b = 1 should alarm before κ = 20 sometimes");
        assert_eq!(r.false_alarm_fraction, false_alarms as f64 / 40.0);
    }

    #[test]
    fn coarser_grid_widens_cusum_truncation() {
        let (_, det) = cusum_1d(0.1);
        let coarse = det.with_gamma(50.0);
        assert!(matches!(coarse, DetectorSpec::Cusum { gamma: 50.0, truncation: Some(50.0), .. }));
        assert!(coarse.build(1.0).is_ok());
        assert!(matches!(det.with_gamma(1.0), DetectorSpec::Cusum { truncation: Some(10.0), .. }));
    }

    #[test]
    fn kappa_uniform_in_grid_cell() {
        let p = KappaPolicy::UniformInGridCell(10.03);
        assert!((p.draw(0.1, 0.0) - 10.0).abs() < 1e-12);
        assert!((p.draw(0.1, 0.999) - 10.0999).abs() < 1e-9);
        assert_eq!(KappaPolicy::Fixed(3.0).draw(0.1, 0.7), 3.0);
    }

    #[test]
    fn calibrated_thresholds_increase_with_target() {
        let (pre, det) = cusum_1d(0.1);
        let curve = null_records(&det, &pre, 100, 5, 5.0 * 400.0).unwrap();
        let mut last = 0.0;
        for target in [20.0, 80.0, 400.0] {
            let c = calibrate_on_curve(&curve, target, det.bracket()).unwrap();
            assert!(c.b > last);
            assert!((c.arl.mean - target).abs() <= 0.1 * target, "{target}: {}", c.arl);
            last = c.b;
        }
        assert!(calibrate_on_curve(&curve, 1e4, det.bracket()).is_err());
        assert!(calibrate_on_curve(&curve, 0.05, det.bracket()).is_err());
    }
}
