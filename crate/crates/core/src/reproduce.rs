//! Experiment drivers: each writes CSV tables plus a `manifest.toml` into an
//! output directory.
//!
//! `scale` multiplies every replication count; `scale = 1` is the desk-scale
//! default listed on each parameter set.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baseline::{GlrDetector, WindowConfig};
use crate::detector::{replay, GridReport};
use crate::error::{HawkesError, Result};
use crate::estimation::{em_mle, fisher_info_mc, EmConfig};
use crate::harness::{
    calibrate_on_curve, edd_mc, null_records, Calibration, DetectorSpec, Estimate, KappaPolicy, Method, RecordCurve,
    CALIBRATION_CAP,
};
use crate::io::{write_model, write_trajectory};
use crate::networks::{self, NeuroNetwork};
use crate::simulate::{simulate, simulate_with_change, SimConfig};
use crate::{ChangeSpec, EventStream, HawkesModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig2Truncation,
    Fig3Trajectories,
    Fig4ArlEdd,
    Fig5Misspec,
    Fig6GridSize,
    Sec7NeuroReplica,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Fig2Truncation,
        Experiment::Fig3Trajectories,
        Experiment::Fig4ArlEdd,
        Experiment::Fig5Misspec,
        Experiment::Fig6GridSize,
        Experiment::Sec7NeuroReplica,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2Truncation => "fig2-truncation",
            Experiment::Fig3Trajectories => "fig3-trajectories",
            Experiment::Fig4ArlEdd => "fig4-arl-edd",
            Experiment::Fig5Misspec => "fig5-misspec",
            Experiment::Fig6GridSize => "fig6-gridsize",
            Experiment::Sec7NeuroReplica => "sec7-neuro-replica",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HawkesError::InvalidArgument(format!("unknown experiment `{s}`")))
    }
}

/// Independent seed for a named sub-task.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let digest = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(tag.as_bytes()).finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).ceil() as usize).max(1)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    seed: u64,
    scale: f64,
    version: &'a str,
    config_hash: String,
    files: Vec<String>,
}

/// Files written by one experiment.
#[derive(Debug, Clone)]
pub struct Report {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        let fmt = |e: csv::Error| HawkesError::Format(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(fmt)?;
        w.write_record(header).map_err(fmt)?;
        for r in rows {
            w.write_record(r).map_err(fmt)?;
        }
        w.flush()?;
        Ok(())
    }

    fn trajectory(&mut self, name: &str, t: &[GridReport]) -> Result<()> {
        let path = self.path(name);
        write_trajectory(t, &path)
    }

    fn finish(self, experiment: Experiment, seed: u64, scale: f64, config: &str) -> Result<Report> {
        let digest = Sha256::digest(config.as_bytes());
        let manifest = Manifest {
            experiment: experiment.name(),
            seed,
            scale,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: hex::encode(digest),
            files: self.files.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| HawkesError::Format(e.to_string()))?;
        fs::write(self.dir.join("manifest.toml"), text)?;
        Ok(Report { dir: self.dir, files: self.files })
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Full trajectory of a detector that never alarms.
pub fn trajectory(spec: &DetectorSpec, events: &EventStream) -> Result<Vec<GridReport>> {
    let mut det = spec.build(f64::MAX)?;
    Ok(replay(&mut det, events, None, true)?.trajectory)
}

/// Largest `|S₁ − S₂|` over grid times up to `until`.
pub fn trajectory_gap(a: &[GridReport], b: &[GridReport], until: f64) -> f64 {
    a.iter().zip(b).take_while(|(x, _)| x.t <= until).map(|(x, y)| (x.stat - y.stat).abs()).fold(0.0, f64::max)
}

/// First grid time with `stat > b`, if any.
pub fn first_crossing(t: &[GridReport], b: f64) -> Option<f64> {
    t.iter().find(|r| r.stat > b).map(|r| r.t)
}

/// Thresholds that give ARL 5000 at γ = 0.1 in the reference study, for CUSUM, GLR and score.
pub const REFERENCE_THRESHOLDS: [(Method, f64); 3] = [(Method::Cusum, 6.319), (Method::Glr, 37.66), (Method::Score, 148.2)];

pub fn reference_threshold(m: Method) -> Option<f64> {
    REFERENCE_THRESHOLDS.iter().find(|(x, _)| *x == m).map(|&(_, b)| b)
}

/// Window lengths of the reference study.
pub const SCORE_WINDOW: f64 = 60.0;
pub const GLR_WINDOW: f64 = 60.0;
pub const SHEWHART_WINDOW: f64 = 120.0;

/// Parameters of the truncation comparison.
#[derive(Debug, Clone)]
pub struct TruncationParams {
    pub seed: u64,
    /// Independent streams compared.
    pub runs: usize,
    pub kappa: f64,
    pub horizon: f64,
    pub gamma: f64,
    /// Threshold up to whose first crossing gaps are measured.
    pub b: f64,
}

impl TruncationParams {
    /// Desk scale: 5 streams of length 400 with the change at 200.
    pub fn desk(seed: u64, scale: f64) -> Self {
        Self { seed, runs: scaled(5, scale), kappa: 200.0, horizon: 400.0, gamma: 0.1, b: 6.319 }
    }
}

#[derive(Debug, Clone)]
pub struct TruncationRun {
    pub exact: Vec<GridReport>,
    pub b1: Vec<GridReport>,
    pub b2: Vec<GridReport>,
    /// End of the compared range: the exact statistic's first crossing of `b`, or the horizon.
    pub until: f64,
    pub gap_b1: f64,
    pub gap_b2: f64,
}

/// Exact CUSUM against truncation widths `1/β` and `2/β` on common streams.
pub fn truncation_study(p: &TruncationParams) -> Result<Vec<TruncationRun>> {
    let (pre, post) = (networks::paper_pre(), networks::paper_post());
    let spec = ChangeSpec::new(pre.clone(), post.clone(), p.kappa)?;
    let beta = pre.shared_kernel().and_then(|k| k.exponential_rate()).expect("exponential network");
    let cusum = |truncation| DetectorSpec::Cusum { pre: pre.clone(), post: post.clone(), gamma: p.gamma, truncation };
    (0..p.runs)
        .map(|r| {
            let events = simulate_with_change(&spec, &SimConfig::new(p.horizon, p.seed).with_stream(r as u64))?;
            let exact = trajectory(&cusum(None), &events)?;
            let b1 = trajectory(&cusum(Some(1.0 / beta)), &events)?;
            let b2 = trajectory(&cusum(Some(2.0 / beta)), &events)?;
            let until = first_crossing(&exact, p.b).unwrap_or(p.horizon);
            let gap_b1 = trajectory_gap(&exact, &b1, until);
            let gap_b2 = trajectory_gap(&exact, &b2, until);
            Ok(TruncationRun { exact, b1, b2, until, gap_b1, gap_b2 })
        })
        .collect()
}

fn fig2(dir: &Path, seed: u64, scale: f64) -> Result<Report> {
    let p = TruncationParams::desk(seed, scale);
    let runs = truncation_study(&p)?;
    let mut w = Writer::new(dir)?;
    w.trajectory("fig2_exact.csv", &runs[0].exact)?;
    w.trajectory("fig2_B1.csv", &runs[0].b1)?;
    w.trajectory("fig2_B2.csv", &runs[0].b2)?;
    let rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), num(r.until), num(r.gap_b1), num(r.gap_b2)])
        .collect();
    w.table("fig2_gaps.csv", &["run", "until", "gap_B1", "gap_B2"], &rows)?;
    w.finish(Experiment::Fig2Truncation, seed, scale, &format!("{p:?}"))
}

/// Fisher information of the eight-node pre-change network on windows of `w`.
pub fn paper_fisher(w: f64, reps: usize, seed: u64) -> Result<DMatrix<f64>> {
    // 100 time units of burn-in before the window
    fisher_info_mc(&networks::paper_pre(), w + 100.0, w, reps, seed)
}

/// CUSUM, score, GLR and Shewhart on the eight-node network.
pub fn paper_detectors(gamma: f64, fisher: &DMatrix<f64>, truncation: Option<f64>) -> Vec<(String, DetectorSpec)> {
    let pre = networks::paper_pre();
    vec![
        ("cusum".into(), DetectorSpec::Cusum { pre: pre.clone(), post: networks::paper_post(), gamma, truncation }),
        (
            "score".into(),
            DetectorSpec::Score { pre: pre.clone(), fisher: fisher.clone(), ridge: 0.0, w: SCORE_WINDOW, gamma },
        ),
        ("glr".into(), DetectorSpec::Glr { pre, w: GLR_WINDOW, gamma, em: EmConfig::default() }),
        ("shewhart".into(), DetectorSpec::Shewhart { w: SHEWHART_WINDOW, gamma }),
    ]
}

/// CUSUM with each misspecified post-change model.
pub fn misspecified_detectors(gamma: f64, truncation: Option<f64>) -> Vec<(String, DetectorSpec)> {
    let pre = networks::paper_pre();
    networks::paper_misspecified()
        .into_iter()
        .map(|(label, post)| (format!("cusum-{label}"), DetectorSpec::Cusum { pre: pre.clone(), post, gamma, truncation }))
        .collect()
}

fn fig3(dir: &Path, seed: u64, scale: f64) -> Result<Report> {
    let gamma = 0.1;
    let (kappa, horizon) = (200.0, 400.0);
    let fisher_reps = scaled(2000, scale);
    let fisher = paper_fisher(SCORE_WINDOW, fisher_reps, derive_seed(seed, "fisher"))?;
    let spec = ChangeSpec::new(networks::paper_pre(), networks::paper_post(), kappa)?;
    let events = simulate_with_change(&spec, &SimConfig::new(horizon, seed))?;
    let mut w = Writer::new(dir)?;
    for (label, det) in paper_detectors(gamma, &fisher, None).into_iter().take(3) {
        w.trajectory(&format!("fig3_{label}.csv"), &trajectory(&det, &events)?)?;
    }
    let config = format!("gamma={gamma} kappa={kappa} horizon={horizon} fisher_reps={fisher_reps}");
    w.finish(Experiment::Fig3Trajectories, seed, scale, &config)
}

/// Parameters of the ARL/EDD comparison on the eight-node network.
#[derive(Debug, Clone)]
pub struct ComparisonParams {
    pub seed: u64,
    pub gamma: f64,
    pub targets: Vec<f64>,
    /// Null replications per calibration curve (GLR uses `glr_cal_reps`).
    pub cal_reps: usize,
    pub glr_cal_reps: usize,
    pub edd_reps: usize,
    pub glr_edd_reps: usize,
    pub fisher_reps: usize,
    /// Kernel truncation for CUSUM in Monte Carlo runs.
    pub truncation: Option<f64>,
    pub kappa: KappaPolicy,
}

impl ComparisonParams {
    /// Desk scale: ARL 500, 200 replications (GLR: 40 for calibration, 100 for delay),
    /// κ uniform in the grid cell after 121.
    pub fn desk(seed: u64, scale: f64) -> Self {
        let gamma = 0.1;
        Self {
            seed,
            gamma,
            targets: vec![500.0],
            cal_reps: scaled(200, scale),
            glr_cal_reps: scaled(40, scale),
            edd_reps: scaled(200, scale),
            glr_edd_reps: scaled(100, scale),
            fisher_reps: scaled(2000, scale),
            truncation: Some(10.0),
            kappa: KappaPolicy::UniformInGridCell(SHEWHART_WINDOW + 10.0 * gamma),
        }
    }

    fn reps(&self, m: Method) -> (usize, usize) {
        if m == Method::Glr {
            (self.glr_cal_reps, self.glr_edd_reps)
        } else {
            (self.cal_reps, self.edd_reps)
        }
    }

    fn kappa_max(&self) -> f64 {
        match self.kappa {
            KappaPolicy::Fixed(k) => k,
            KappaPolicy::UniformInGridCell(k) => k + self.gamma,
        }
    }
}

/// One detector at one calibrated ARL target.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub label: String,
    pub method: Method,
    pub calibration: Calibration,
    pub edd: Option<Estimate>,
    pub false_alarm_fraction: f64,
    pub edd_censored: usize,
}

impl OperatingPoint {
    fn row(&self) -> Vec<String> {
        let c = &self.calibration;
        let e = self.edd;
        vec![
            self.label.clone(),
            num(c.target),
            num(c.b),
            num(c.arl.mean),
            num(c.arl.stderr),
            c.censored.to_string(),
            opt(e.map(|e| e.mean)),
            opt(e.map(|e| e.stderr)),
            e.map_or(0, |e| e.n).to_string(),
            num(self.false_alarm_fraction),
            self.edd_censored.to_string(),
        ]
    }
}

const POINT_HEADER: [&str; 11] =
    ["detector", "target_arl", "b", "arl", "arl_se", "arl_censored", "edd", "edd_se", "edd_n", "false_alarm_frac", "edd_censored"];

/// Calibrates each detector to every target on null runs, then measures the delay.
pub fn operating_points(
    detectors: &[(String, DetectorSpec)],
    pre: &HawkesModel,
    post: &HawkesModel,
    p: &ComparisonParams,
) -> Result<Vec<OperatingPoint>> {
    let top = p.targets.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (label, det) in detectors {
        let (cal_reps, edd_reps) = p.reps(det.method());
        log::info!("{label}: calibrating on {cal_reps} null runs");
        let curve = null_records(det, pre, cal_reps, derive_seed(p.seed, "null"), CALIBRATION_CAP * top)?;
        for &target in &p.targets {
            let calibration = calibrate_on_curve(&curve, target, det.bracket())?;
            let max_time = p.kappa_max() + CALIBRATION_CAP * target;
            let seed = derive_seed(p.seed, "change");
            let r = edd_mc(det, calibration.b, pre, post, p.kappa, edd_reps, seed, max_time)?;
            log::info!("{label} ARL {target}: b = {}, EDD {:?}", calibration.b, r.edd);
            out.push(OperatingPoint {
                label: label.clone(),
                method: det.method(),
                calibration,
                edd: r.edd,
                false_alarm_fraction: r.false_alarm_fraction,
                edd_censored: r.records.iter().filter(|x| x.censored).count(),
            });
        }
    }
    Ok(out)
}

/// The four detectors of the comparison, calibrated and evaluated.
pub fn comparison(p: &ComparisonParams) -> Result<Vec<OperatingPoint>> {
    let fisher = paper_fisher(SCORE_WINDOW, p.fisher_reps, derive_seed(p.seed, "fisher"))?;
    operating_points(&paper_detectors(p.gamma, &fisher, p.truncation), &networks::paper_pre(), &networks::paper_post(), p)
}

/// Misspecified CUSUM variants under the same protocol as [`comparison`].
pub fn misspecification(p: &ComparisonParams) -> Result<Vec<OperatingPoint>> {
    operating_points(&misspecified_detectors(p.gamma, p.truncation), &networks::paper_pre(), &networks::paper_post(), p)
}

fn fig4(dir: &Path, seed: u64, scale: f64) -> Result<Report> {
    let mut p = ComparisonParams::desk(seed, scale);
    p.targets = vec![250.0, 500.0];
    let points = comparison(&p)?;
    let mut w = Writer::new(dir)?;
    let rows: Vec<Vec<String>> = points.iter().map(OperatingPoint::row).collect();
    w.table("fig4_arl_edd.csv", &POINT_HEADER, &rows)?;
    w.finish(Experiment::Fig4ArlEdd, seed, scale, &format!("{p:?}"))
}

fn fig5(dir: &Path, seed: u64, scale: f64) -> Result<Report> {
    let p = ComparisonParams::desk(seed, scale);
    let mut points = comparison(&p)?;
    points.retain(|x| x.method != Method::Shewhart);
    points.extend(misspecification(&p)?);
    let mut w = Writer::new(dir)?;
    let rows: Vec<Vec<String>> = points.iter().map(OperatingPoint::row).collect();
    w.table("fig5_misspec.csv", &POINT_HEADER, &rows)?;
    w.finish(Experiment::Fig5Misspec, seed, scale, &format!("{p:?}"))
}

/// Parameters of the grid-size study.
#[derive(Debug, Clone)]
pub struct GridParams {
    pub base: ComparisonParams,
    pub gammas: Vec<f64>,
    /// Null runs used to average GLR iterations per window, and their length.
    pub iteration_runs: usize,
    pub iteration_length: f64,
}

impl GridParams {
    /// Desk scale: γ ∈ {0.1, 1, 10, 50} with the comparison's ARL target and κ.
    pub fn desk(seed: u64, scale: f64) -> Self {
        let base = ComparisonParams::desk(seed, scale);
        Self { base, gammas: vec![0.1, 1.0, 10.0, 50.0], iteration_runs: scaled(2, scale), iteration_length: 300.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub method: Method,
    pub gamma: f64,
    /// Threshold calibrated at the smallest γ, held fixed across γ.
    pub fixed_b: f64,
    pub fixed_arl: Estimate,
    pub fixed_censored: usize,
    pub recalibrated: OperatingPoint,
}

#[derive(Debug, Clone)]
pub struct GridStudy {
    pub points: Vec<GridPoint>,
    /// `(γ, mean EM iterations per window)` for GLR.
    pub iterations: Vec<(f64, f64)>,
}

/// ARL at fixed thresholds and EDD at recalibrated thresholds across grid sizes.
///
/// Null runs share streams across γ, so ARL comparisons use common random numbers.
/// Points in `known` (from [`comparison`] with the same base parameters) are reused
/// for the first grid size instead of being recomputed.
pub fn grid_study(p: &GridParams, known: &[OperatingPoint]) -> Result<GridStudy> {
    let pre = networks::paper_pre();
    let post = networks::paper_post();
    let b = &p.base;
    let target = b.targets[0];
    let fisher = paper_fisher(SCORE_WINDOW, b.fisher_reps, derive_seed(b.seed, "fisher"))?;
    let detectors: Vec<(String, DetectorSpec)> =
        paper_detectors(p.gammas[0], &fisher, b.truncation).into_iter().take(3).collect();
    let mut points = Vec::new();
    for (label, det) in &detectors {
        let (cal_reps, edd_reps) = b.reps(det.method());
        let mut fixed_b = None;
        for &gamma in &p.gammas {
            let reuse = known.iter().find(|k| {
                &k.label == label && gamma == b.gamma && gamma == p.gammas[0] && k.calibration.target == target
            });
            if let Some(k) = reuse {
                fixed_b = Some(k.calibration.b);
                points.push(GridPoint {
                    method: k.method,
                    gamma,
                    fixed_b: k.calibration.b,
                    fixed_arl: k.calibration.arl,
                    fixed_censored: k.calibration.censored,
                    recalibrated: k.clone(),
                });
                continue;
            }
            let det = det.with_gamma(gamma);
            let curve: RecordCurve =
                null_records(&det, &pre, cal_reps, derive_seed(b.seed, "null"), CALIBRATION_CAP * target)?;
            let calibration = calibrate_on_curve(&curve, target, det.bracket())?;
            let fb = *fixed_b.get_or_insert(calibration.b);
            let (fixed_arl, fixed_censored) = curve.arl(fb);
            let kappa_max = b.kappa_max().max(match b.kappa {
                KappaPolicy::UniformInGridCell(k) => ((k / gamma).floor() + 1.0) * gamma,
                KappaPolicy::Fixed(k) => k,
            });
            let max_time = kappa_max + CALIBRATION_CAP * target;
            let r = edd_mc(&det, calibration.b, &pre, &post, b.kappa, edd_reps, derive_seed(b.seed, "change"), max_time)?;
            log::info!("{label} γ={gamma}: fixed ARL {fixed_arl}, b = {}, EDD {:?}", calibration.b, r.edd);
            points.push(GridPoint {
                method: det.method(),
                gamma,
                fixed_b: fb,
                fixed_arl,
                fixed_censored,
                recalibrated: OperatingPoint {
                    label: label.clone(),
                    method: det.method(),
                    calibration,
                    edd: r.edd,
                    false_alarm_fraction: r.false_alarm_fraction,
                    edd_censored: r.records.iter().filter(|x| x.censored).count(),
                },
            });
        }
    }
    let mut iterations = Vec::new();
    for &gamma in &p.gammas {
        let cfg = WindowConfig::new(GLR_WINDOW, gamma, f64::MAX)?;
        let mut total = 0usize;
        let mut windows = 0usize;
        for r in 0..p.iteration_runs {
            let events = simulate(
                &pre,
                &SimConfig::new(p.iteration_length, derive_seed(b.seed, "iterations")).with_stream(r as u64),
            )?;
            let mut glr = GlrDetector::new(&pre, &cfg, &EmConfig::default())?;
            replay(&mut glr, &events, None, false)?;
            total += glr.iterations().iter().sum::<usize>();
            windows += glr.iterations().len();
        }
        iterations.push((gamma, total as f64 / windows.max(1) as f64));
    }
    Ok(GridStudy { points, iterations })
}

fn fig6(dir: &Path, seed: u64, scale: f64) -> Result<Report> {
    let p = GridParams::desk(seed, scale);
    let study = grid_study(&p, &[])?;
    let mut w = Writer::new(dir)?;
    let rows: Vec<Vec<String>> = study
        .points
        .iter()
        .map(|g| {
            let r = &g.recalibrated;
            vec![
                g.method.to_string(),
                num(g.gamma),
                num(g.fixed_b),
                num(g.fixed_arl.mean),
                num(g.fixed_arl.stderr),
                g.fixed_censored.to_string(),
                num(r.calibration.b),
                num(r.calibration.arl.mean),
                opt(r.edd.map(|e| e.mean)),
                opt(r.edd.map(|e| e.stderr)),
            ]
        })
        .collect();
    w.table(
        "fig6_gridsize.csv",
        &["method", "gamma", "fixed_b", "fixed_arl", "fixed_arl_se", "fixed_censored", "b", "arl", "edd", "edd_se"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = study.iterations.iter().map(|&(g, it)| vec![num(g), num(it)]).collect();
    w.table("fig6_iterations.csv", &["gamma", "mean_iterations"], &rows)?;
    w.finish(Experiment::Fig6GridSize, seed, scale, &format!("{p:?}"))
}

/// Parameters of the simulated neuronal experiment (times in milliseconds).
#[derive(Debug, Clone)]
pub struct NeuroParams {
    pub seed: u64,
    pub kappa: f64,
    pub horizon: f64,
    /// Length of the spike trains used to fit the pre- and post-change models.
    pub fit_length: f64,
    pub window: f64,
    pub gamma: f64,
    pub ridge: f64,
    pub fisher_reps: usize,
}

impl NeuroParams {
    /// Desk scale: change at 20 000 ms, 30 000 ms total, window 1000, γ = 5, ridge 1.
    pub fn desk(seed: u64, scale: f64) -> Self {
        Self {
            seed,
            kappa: 20_000.0,
            horizon: 30_000.0,
            fit_length: 20_000.0,
            window: 1000.0,
            gamma: 5.0,
            ridge: 1.0,
            fisher_reps: scaled(200, scale),
        }
    }
}

/// One statistic's behaviour around the change.
#[derive(Debug, Clone)]
pub struct RiseSummary {
    pub method: Method,
    /// Largest value on `[window, κ]`.
    pub pre_max: f64,
    /// Time after κ until the statistic first exceeds `pre_max`.
    pub delay: Option<f64>,
    pub trajectory: Vec<GridReport>,
}

#[derive(Debug, Clone)]
pub struct NeuroStudy {
    pub network: NeuroNetwork,
    pub pre_fit: HawkesModel,
    pub post_fit: HawkesModel,
    pub rises: Vec<RiseSummary>,
}

/// Fits pre/post models on separate spike trains, then runs CUSUM, score and GLR
/// across a code switch at κ.
pub fn neuro_study(p: &NeuroParams) -> Result<NeuroStudy> {
    let net = networks::neuro_network(derive_seed(p.seed, "network"))?;
    let em = EmConfig { fit_mu: true, ..EmConfig::default() };
    let pre_train = simulate(&net.pre, &SimConfig::new(p.fit_length, derive_seed(p.seed, "pre-train")))?;
    let fit = em_mle(&pre_train, (0.0, p.fit_length), &net.pre, &em)?;
    let pre_fit = HawkesModel::new(fit.mu.clone(), fit.alpha_rows(), net.pre.kernel(0, 0).clone())?;
    let post_train = simulate(&net.post, &SimConfig::new(p.fit_length, derive_seed(p.seed, "post-train")))?;
    // the detectors assume a shared base rate, so only the influence matrix is refit
    let post_em = EmConfig { fit_mu: false, ..EmConfig::default() };
    let post_alpha = em_mle(&post_train, (0.0, p.fit_length), &pre_fit, &post_em)?;
    let post_fit = pre_fit.with_alpha(post_alpha.alpha_rows())?;
    pre_fit.ensure_valid()?;
    post_fit.ensure_valid()?;

    let fisher = fisher_info_mc(&pre_fit, 3.0 * p.window, p.window, p.fisher_reps, derive_seed(p.seed, "fisher"))?;
    let change = ChangeSpec::new(net.pre.clone(), net.post.clone(), p.kappa)?;
    let events = simulate_with_change(&change, &SimConfig::new(p.horizon, derive_seed(p.seed, "test")))?;
    let beta = networks::NEURO_BETA;
    let detectors = [
        DetectorSpec::Cusum { pre: pre_fit.clone(), post: post_fit.clone(), gamma: p.gamma, truncation: Some(10.0 / beta) },
        DetectorSpec::Score { pre: pre_fit.clone(), fisher, ridge: p.ridge, w: p.window, gamma: p.gamma },
        DetectorSpec::Glr { pre: pre_fit.clone(), w: p.window, gamma: p.gamma, em: EmConfig::default() },
    ];
    let rises = detectors
        .iter()
        .map(|d| {
            let trajectory = trajectory(d, &events)?;
            let pre_max = trajectory
                .iter()
                .filter(|r| r.t >= p.window && r.t <= p.kappa)
                .map(|r| r.stat)
                .fold(f64::NEG_INFINITY, f64::max);
            let delay = trajectory.iter().find(|r| r.t > p.kappa && r.stat > pre_max).map(|r| r.t - p.kappa);
            Ok(RiseSummary { method: d.method(), pre_max, delay, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeuroStudy { network: net, pre_fit, post_fit, rises })
}

fn sec7(dir: &Path, seed: u64, scale: f64) -> Result<Report> {
    let p = NeuroParams::desk(seed, scale);
    let study = neuro_study(&p)?;
    let mut w = Writer::new(dir)?;
    let path = w.path("sec7_pre_fit.toml");
    write_model(&study.pre_fit, &path)?;
    let path = w.path("sec7_post_fit.toml");
    write_model(&study.post_fit, &path)?;
    for r in &study.rises {
        w.trajectory(&format!("sec7_{}.csv", r.method), &r.trajectory)?;
    }
    let rows: Vec<Vec<String>> =
        study.rises.iter().map(|r| vec![r.method.to_string(), num(r.pre_max), opt(r.delay)]).collect();
    w.table("sec7_summary.csv", &["statistic", "pre_change_max", "delay_to_exceed"], &rows)?;
    w.finish(Experiment::Sec7NeuroReplica, seed, scale, &format!("{p:?}"))
}

/// Runs one experiment and writes its report into `dir`.
pub fn reproduce(experiment: Experiment, seed: u64, scale: f64, dir: &Path) -> Result<Report> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(HawkesError::InvalidArgument(format!("scale {scale} must be positive")));
    }
    match experiment {
        Experiment::Fig2Truncation => fig2(dir, seed, scale),
        Experiment::Fig3Trajectories => fig3(dir, seed, scale),
        Experiment::Fig4ArlEdd => fig4(dir, seed, scale),
        Experiment::Fig5Misspec => fig5(dir, seed, scale),
        Experiment::Fig6GridSize => fig6(dir, seed, scale),
        Experiment::Sec7NeuroReplica => sec7(dir, seed, scale),
    }
}
