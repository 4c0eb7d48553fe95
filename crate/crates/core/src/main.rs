use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hawkscan::baseline::{glr_run, score_run, shewhart_run, WindowConfig};
use hawkscan::cusum::{cusum_run, cusum_truncated_run, CusumConfig};
use hawkscan::detector::DetectionOutcome;
use hawkscan::estimation::{em_mle, fisher_info_mc, EmConfig};
use hawkscan::harness::{bench, calibrate_threshold, BenchSpec, DetectorSpec, KappaPolicy, Method, Scenario};
use hawkscan::io::{parse_events, read_matrix, read_model, write_events, write_matrix, write_model, write_trajectory};
use hawkscan::reproduce::{reproduce, Experiment};
use hawkscan::simulate::{simulate, simulate_with_change, SimConfig};
use hawkscan::{ChangeSpec, EventStream, HawkesError, HawkesModel, KernelSpec, Result};

/// Change-point detection for multivariate Hawkes processes.
#[derive(Debug, Parser)]
#[command(name = "hawkscan", version, args_override_self = true)]
struct Cli {
    /// TOML file of flag values for the subcommand; its values take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate events, optionally with a change in the influence matrix.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Run a detector over an event file (exit code 2 on alarm).
    #[command(args_override_self = true)]
    Detect(DetectArgs),
    /// Find the threshold that gives a target ARL.
    #[command(args_override_self = true)]
    Calibrate(CalibrateArgs),
    /// Monte Carlo ARL or detection delay at a fixed threshold.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
    /// Fit an influence matrix (and optionally base rates) by EM.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Regenerate the data behind one experiment.
    #[command(args_override_self = true)]
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Cusum,
    Score,
    Glr,
    Shewhart,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cusum => Method::Cusum,
            MethodArg::Score => Method::Score,
            MethodArg::Glr => Method::Glr,
            MethodArg::Shewhart => Method::Shewhart,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Post-change model; requires --kappa.
    #[arg(long, requires = "kappa")]
    post: Option<PathBuf>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    max_events: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Detector family and its method-specific settings.
#[derive(Debug, Args)]
struct DetectorArgs {
    #[arg(long, value_enum, default_value = "cusum")]
    method: MethodArg,
    #[arg(long)]
    pre: Option<PathBuf>,
    #[arg(long)]
    post: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// CUSUM kernel truncation width B.
    #[arg(long)]
    truncation: Option<f64>,
    /// Window length for score, GLR and Shewhart.
    #[arg(long)]
    window: Option<f64>,
    /// Fisher information matrix (CSV) for the score statistic.
    #[arg(long)]
    fisher: Option<PathBuf>,
    /// Simulated windows used to estimate the Fisher information when --fisher is absent.
    #[arg(long, default_value_t = 1000)]
    fisher_reps: usize,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// EM stopping tolerance for GLR.
    #[arg(long, default_value_t = 1e-4)]
    em_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    det: DetectorArgs,
    #[arg(long)]
    events: PathBuf,
    /// Observation horizon; defaults to the last event time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Threshold for CUSUM, score and GLR.
    #[arg(long)]
    b: Option<f64>,
    /// Shewhart lower count limit.
    #[arg(long)]
    b1: Option<f64>,
    /// Shewhart upper count limit.
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    /// Write the statistic at every grid time (`t,S,tau_hat`).
    #[arg(long)]
    emit_trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    det: DetectorArgs,
    #[arg(long)]
    target_arl: f64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    det: DetectorArgs,
    #[arg(long)]
    b: f64,
    /// Change time; without it the run is under the null.
    #[arg(long)]
    kappa: Option<f64>,
    /// True post-change model (defaults to --post).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Draw κ uniformly within its grid cell.
    #[arg(long)]
    uniform_kappa: bool,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1e5)]
    max_time: f64,
    /// Per-replication records (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    events: PathBuf,
    /// Estimation window `a,b`.
    #[arg(long, value_parser = parse_window)]
    window: (f64, f64),
    #[arg(long)]
    kernel_beta: f64,
    /// Observation horizon; defaults to the last event time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Also estimate the base rates.
    #[arg(long)]
    fit_mu: bool,
    /// Number of nodes; defaults to one more than the largest node label.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the Fisher information of the fitted model on windows of this length.
    #[arg(long)]
    fisher_window: Option<f64>,
    #[arg(long, requires = "fisher_window")]
    fisher_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    fisher_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long, value_parser = parse_experiment)]
    experiment: Experiment,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplier on replication counts.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `a,b`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn parse_experiment(s: &str) -> std::result::Result<Experiment, String> {
    s.parse().map_err(|e: HawkesError| e.to_string())
}

fn arg_error(msg: impl Into<String>) -> HawkesError {
    HawkesError::InvalidArgument(msg.into())
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| arg_error(format!("{flag} is required for this method")))
}

impl DetectorArgs {
    fn pre(&self) -> Result<HawkesModel> {
        read_model(required(&self.pre, "--pre")?)
    }

    fn window(&self) -> Result<f64> {
        self.window.ok_or_else(|| arg_error("--window is required for this method"))
    }

    fn spec(&self) -> Result<DetectorSpec> {
        let gamma = self.gamma;
        Ok(match Method::from(self.method) {
            Method::Cusum => DetectorSpec::Cusum {
                pre: self.pre()?,
                post: read_model(required(&self.post, "--post")?)?,
                gamma,
                truncation: self.truncation,
            },
            Method::Score => {
                let pre = self.pre()?;
                let w = self.window()?;
                let fisher = match &self.fisher {
                    Some(p) => read_matrix(p)?,
                    None => {
                        log::info!("estimating the Fisher information from {} simulated windows", self.fisher_reps);
                        fisher_info_mc(&pre, w + 100.0, w, self.fisher_reps, self.seed)?
                    }
                };
                DetectorSpec::Score { pre, fisher, ridge: self.ridge, w, gamma }
            }
            Method::Glr => DetectorSpec::Glr {
                pre: self.pre()?,
                w: self.window()?,
                gamma,
                em: EmConfig { tol: self.em_tol, ..EmConfig::default() },
            },
            Method::Shewhart => DetectorSpec::Shewhart { w: self.window()?, gamma },
        })
    }

    /// Model the null streams are drawn from.
    fn null_model(&self) -> Result<HawkesModel> {
        self.pre().map_err(|e| match Method::from(self.method) {
            Method::Shewhart => arg_error(format!("--pre is required to simulate streams ({e})")),
            _ => e,
        })
    }
}

fn run_simulate(a: &SimulateArgs) -> Result<u8> {
    let model = read_model(&a.model)?;
    let mut cfg = SimConfig::new(a.horizon, a.seed).with_stream(a.stream);
    if let Some(m) = a.max_events {
        cfg = cfg.with_max_events(m);
    }
    let events = match (&a.post, a.kappa) {
        (Some(post), Some(kappa)) => simulate_with_change(&ChangeSpec::new(model, read_model(post)?, kappa)?, &cfg)?,
        (None, Some(_)) => return Err(arg_error("--kappa needs --post")),
        _ => simulate(&model, &cfg)?,
    };
    write_events(&events, &a.out)?;
    println!("{} events on [0, {}]", events.len(), events.horizon());
    Ok(0)
}

fn run_detect(a: &DetectArgs) -> Result<u8> {
    let events = parse_events(&a.events, a.horizon)?;
    let d = &a.det;
    let threshold = || a.b.ok_or_else(|| arg_error("--b is required for this method"));
    let out: DetectionOutcome = match Method::from(d.method) {
        Method::Cusum => {
            let pre = d.pre()?;
            let post = read_model(required(&d.post, "--post")?)?;
            let cfg = CusumConfig::new(threshold()?, d.gamma)?.with_truncation(d.truncation)?.with_max_time(a.max_time);
            if d.truncation.is_some() {
                cusum_truncated_run(&pre, &post, &events, &cfg)?
            } else {
                cusum_run(&pre, &post, &events, &cfg)?
            }
        }
        Method::Score => {
            let DetectorSpec::Score { pre, fisher, ridge, w, gamma } = d.spec()? else { unreachable!() };
            let cfg = WindowConfig::new(w, gamma, threshold()?)?.with_max_time(a.max_time);
            score_run(&pre, &fisher, ridge, &events, &cfg)?
        }
        Method::Glr => {
            let DetectorSpec::Glr { pre, w, gamma, em } = d.spec()? else { unreachable!() };
            let cfg = WindowConfig::new(w, gamma, threshold()?)?.with_max_time(a.max_time);
            glr_run(&pre, &events, &cfg, &em)?.0
        }
        Method::Shewhart => {
            let b2 = a.b2.or(a.b).ok_or_else(|| arg_error("--b2 is required for shewhart"))?;
            let cfg = WindowConfig::new(d.window()?, d.gamma, b2)?.with_lower(a.b1.unwrap_or(0.0))?.with_max_time(a.max_time);
            shewhart_run(&events, &cfg)?
        }
    };
    if let Some(path) = &a.emit_trajectory {
        write_trajectory(&out.trajectory, path)?;
    }
    let tau = out.tau_hat.map(|t| format!(" tau_hat={t}")).unwrap_or_default();
    if out.alarmed {
        println!("alarm t={} stat={}{tau}", out.stop_time, out.stat);
        Ok(2)
    } else {
        println!("no alarm through t={} stat={}{tau}", out.stop_time, out.stat);
        Ok(0)
    }
}

fn run_calibrate(a: &CalibrateArgs) -> Result<u8> {
    let spec = a.det.spec()?;
    let c = calibrate_threshold(&spec, &a.det.null_model()?, a.target_arl, a.reps, a.det.seed)?;
    println!("b={} arl={} stderr={} censored={}", c.b, c.arl.mean, c.arl.stderr, c.censored);
    Ok(0)
}

fn run_bench(a: &BenchArgs) -> Result<u8> {
    let spec = a.det.spec()?;
    let pre = a.det.null_model()?;
    let scenario = match a.kappa {
        None => Scenario::Null(pre),
        Some(k) => {
            let post = match (&a.truth, &a.det.post) {
                (Some(p), _) | (None, Some(p)) => read_model(p)?,
                (None, None) => return Err(arg_error("a change needs --truth or --post")),
            };
            let kappa = if a.uniform_kappa { KappaPolicy::UniformInGridCell(k) } else { KappaPolicy::Fixed(k) };
            Scenario::Change { pre, post, kappa }
        }
    };
    let r = bench(&BenchSpec { detector: spec, b: a.b, scenario, reps: a.reps, seed: a.det.seed, max_time: a.max_time })?;
    println!("arl={} stderr={} censored={}", r.arl.mean, r.arl.stderr, r.censored);
    if let Some(e) = r.edd {
        println!("edd={} stderr={} n={} false_alarm_fraction={}", e.mean, e.stderr, e.n, r.false_alarm_fraction);
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.out {
        let fmt = |e: csv::Error| HawkesError::Format(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(fmt)?;
        w.write_record(["rep", "kappa", "stop_time", "censored", "false_alarm", "events"]).map_err(fmt)?;
        for x in &r.records {
            w.write_record([
                x.rep.to_string(),
                x.kappa.map(|k| k.to_string()).unwrap_or_default(),
                x.stop_time.to_string(),
                x.censored.to_string(),
                x.false_alarm.to_string(),
                x.events_seen.to_string(),
            ])
            .map_err(fmt)?;
        }
        w.flush()?;
    }
    Ok(0)
}

fn run_estimate(a: &EstimateArgs) -> Result<u8> {
    let events: EventStream = parse_events(&a.events, a.horizon)?;
    let (lo, hi) = a.window;
    let d = a.dim.unwrap_or_else(|| events.node_bound());
    if d == 0 {
        return Err(arg_error("no events and no --dim"));
    }
    // empirical rates: fixed base rates without --fit-mu, the starting point with it
    let counts = events.window(lo, hi).iter().fold(vec![0usize; d], |mut c, e| {
        if e.u < d {
            c[e.u] += 1;
        }
        c
    });
    let mu: Vec<f64> = counts.iter().map(|&c| (c as f64 / (hi - lo)).max(1e-6)).collect();
    let template = HawkesModel::new(mu, vec![vec![0.0; d]; d], KernelSpec::exponential(a.kernel_beta)?)?;
    let cfg = EmConfig { tol: a.tol, max_iter: a.max_iter, fit_mu: a.fit_mu, ..EmConfig::default() };
    let fit = em_mle(&events, a.window, &template, &cfg)?;
    if !fit.converged {
        eprintln!("warning: EM did not converge in {} iterations", fit.iterations);
    }
    let model = HawkesModel::new(fit.mu.clone(), fit.alpha_rows(), KernelSpec::exponential(a.kernel_beta)?)?;
    write_model(&model, &a.out)?;
    println!("log_likelihood={} iterations={} spectral_radius={}", fit.log_likelihood, fit.iterations, model.spectral_radius());
    if let (Some(w), Some(path)) = (a.fisher_window, &a.fisher_out) {
        write_matrix(&fisher_info_mc(&model, w + 100.0, w, a.fisher_reps, a.seed)?, path)?;
    }
    Ok(0)
}

fn run_reproduce(a: &ReproduceArgs) -> Result<u8> {
    let report = reproduce(a.experiment, a.seed, a.scale, &a.out_dir)?;
    for f in &report.files {
        println!("{}", report.dir.join(f).display());
    }
    Ok(0)
}

/// Command-line arguments with the `--config` file's values appended, so
/// they override flags given on the command line.
fn arguments() -> std::result::Result<Vec<String>, String> {
    let mut args: Vec<String> = std::env::args().collect();
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else if a == "--config" {
            config = args.get(i + 1).cloned();
        }
    }
    let Some(path) = config else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let table: toml::Table = text.parse().map_err(|e| format!("{path}: {e}"))?;
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => args.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => args.extend([flag, s]),
            toml::Value::Integer(n) => args.extend([flag, n.to_string()]),
            toml::Value::Float(x) => args.extend([flag, x.to_string()]),
            toml::Value::Array(xs) => {
                let parts: Vec<String> = xs
                    .iter()
                    .map(|x| match x {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                args.extend([flag, parts.join(",")]);
            }
            other => return Err(format!("{path}: unsupported value for `{key}`: {other}")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match arguments() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Detect(a) => run_detect(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Bench(a) => run_bench(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Reproduce(a) => run_reproduce(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
