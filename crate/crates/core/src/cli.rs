//! Batch front end: configuration, experiment dispatch, CSV/JSON reports and
//! plot data.

use std::f64::consts::{FRAC_PI_4, PI};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::counterexample::{
    calibrate_c0, predicted_exponent, sharpest_bound, verify_lower_bound, verify_wave_lower_bound,
    wave_lambda_fit, FamilySpec, RadialSpec,
};
use crate::error::{Error, Result};
use crate::maximal::{
    opnorm_probe, scan_windows, taylor_tail_bound, time_maximal_scan, ProbeMode, ScanConfig,
    TimeWindow,
};
use crate::propagator::{evolve, EvolutionParams};
use crate::scaling::{default_gamma, sweep_bands, sweep_lambda, ScalingFit, ScalingSample};
use crate::spectral::{
    l2_on_grid, random_band_profile_on, sobolev_norm, uniform_grid,
    FrequencyGrid,
};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: usize = 16;
pub const DEFAULT_BUDGET: f64 = std::f64::consts::FRAC_PI_6;
pub const DEFAULT_TOLERANCE: f64 = 0.1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Propagate,
    MaximalScan,
    Opnorm,
    Counterexample,
    Wave,
    SweepLambda,
    SweepBands,
    Predict,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "propagate" => Experiment::Propagate,
            "maximal-scan" => Experiment::MaximalScan,
            "opnorm" => Experiment::Opnorm,
            "counterexample" => Experiment::Counterexample,
            "wave" => Experiment::Wave,
            "sweep-lambda" => Experiment::SweepLambda,
            "sweep-bands" => Experiment::SweepBands,
            "predict" => Experiment::Predict,
            other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| std::fmt::Error)?;
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// A list given either as a JSON array or as a string such as `"4..9"`,
/// `"2^7..2^11"` or `"128,256,512"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ListSpec {
    Values(Vec<f64>),
    Text(String),
}

/// Contents of a JSON configuration file; every field may be overridden by a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub a: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_list: Option<ListSpec>,
    pub k: Option<u32>,
    pub k_list: Option<ListSpec>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub budget: Option<f64>,
    pub mode: Option<String>,
    pub n_dim: Option<usize>,
    pub x_count: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "schrate", about = "Convergence-rate experiments for fractional Schrödinger propagators")]
pub struct Args {
    /// propagate | maximal-scan | opnorm | counterexample | wave | sweep-lambda | sweep-bands | predict
    pub experiment: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// e.g. `2^7..2^11` or `128,256,512,1024`
    #[arg(long)]
    pub lambda_list: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    /// e.g. `4..9` or `4,6,8`
    #[arg(long)]
    pub k_list: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Phase budget for the calibration of c₀.
    #[arg(long, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// Probe mode for `opnorm`: local-quarter | window | global-cowling
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub n_dim: Option<usize>,
    #[arg(long)]
    pub x_count: Option<usize>,
}

/// Validated configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub a: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda_list: Vec<f64>,
    pub k_list: Vec<u32>,
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub tolerance: f64,
    pub budget: f64,
    pub mode: Option<ProbeMode>,
    pub n_dim: usize,
    pub x_count: Option<usize>,
}

impl RunConfig {
    fn a(&self) -> f64 {
        self.a.expect("validated")
    }

    fn delta(&self) -> f64 {
        self.delta.expect("validated")
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.expect("validated")
    }
}

fn parse_float_token(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('^') {
        Some((base, exp)) => {
            let b: f64 = base.trim().parse().map_err(|_| bad_list(s))?;
            let e: f64 = exp.trim().parse().map_err(|_| bad_list(s))?;
            b.powf(e)
        }
        None => s.parse().map_err(|_| bad_list(s))?,
    };
    Ok(v)
}

fn bad_list(s: &str) -> Error {
    Error::Config(format!("cannot parse list entry `{s}`"))
}

/// `"2^7..2^11"` steps the exponent by one; `"a..b"` steps by one.
fn parse_float_list(spec: &ListSpec) -> Result<Vec<f64>> {
    match spec {
        ListSpec::Values(v) => Ok(v.clone()),
        ListSpec::Text(s) => {
            if let Some((lo, hi)) = s.split_once("..") {
                let (lo, hi) = (lo.trim(), hi.trim());
                if let (Some((b0, e0)), Some((b1, e1))) = (lo.split_once('^'), hi.split_once('^')) {
                    if b0.trim() != b1.trim() {
                        return Err(Error::Config(format!("range `{s}` mixes bases")));
                    }
                    let base: f64 = b0.trim().parse().map_err(|_| bad_list(s))?;
                    let e0: i32 = e0.trim().parse().map_err(|_| bad_list(s))?;
                    let e1: i32 = e1.trim().parse().map_err(|_| bad_list(s))?;
                    return Ok((e0..=e1).map(|e| base.powi(e)).collect());
                }
                let lo: i64 = lo.parse().map_err(|_| bad_list(s))?;
                let hi: i64 = hi.parse().map_err(|_| bad_list(s))?;
                return Ok((lo..=hi).map(|v| v as f64).collect());
            }
            s.split(',').map(parse_float_token).collect()
        }
    }
}

fn parse_k_list(spec: &ListSpec) -> Result<Vec<u32>> {
    parse_float_list(spec)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= 60.0 {
                Ok(v as u32)
            } else {
                Err(Error::Config(format!("band index {v} must be an integer in [1, 60]")))
            }
        })
        .collect()
}

/// Reads `args` (program name first) and an optional JSON file into a
/// validated [`RunConfig`].
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    if let Some(e) = &file.experiment {
        if e != &args.experiment {
            return Err(Error::Config(format!(
                "config names experiment `{e}` but `{}` was requested",
                args.experiment
            )));
        }
    }
    let merged = ConfigFile {
        experiment: Some(args.experiment.clone()),
        a: args.a.or(file.a),
        delta: args.delta.or(file.delta),
        epsilon: args.epsilon.or(file.epsilon),
        lambda: args.lambda.or(file.lambda),
        lambda_list: args.lambda_list.map(ListSpec::Text).or(file.lambda_list),
        k: args.k.or(file.k),
        k_list: args.k_list.map(ListSpec::Text).or(file.k_list),
        seed: args.seed.or(file.seed),
        trials: args.trials.or(file.trials),
        out: args.out.or(file.out),
        tolerance: args.tolerance.or(file.tolerance),
        budget: args.budget.or(file.budget),
        mode: args.mode.or(file.mode),
        n_dim: args.n_dim.or(file.n_dim),
        x_count: args.x_count.or(file.x_count),
    };
    validate(merged)
}

/// Fills defaults and checks the parameters the chosen experiment needs.
pub fn validate(c: ConfigFile) -> Result<RunConfig> {
    let experiment: Experiment = c
        .experiment
        .as_deref()
        .ok_or_else(|| Error::Config("missing experiment".into()))?
        .parse()?;
    let mut lambda_list = match &c.lambda_list {
        Some(l) => parse_float_list(l)?,
        None => Vec::new(),
    };
    if let Some(l) = c.lambda {
        if lambda_list.is_empty() {
            lambda_list.push(l);
        }
    }
    let mut k_list = match &c.k_list {
        Some(l) => parse_k_list(l)?,
        None => Vec::new(),
    };
    if let Some(k) = c.k {
        if k_list.is_empty() {
            k_list.push(k);
        }
    }
    let mode = c.mode.as_deref().map(str::parse::<ProbeMode>).transpose().map_err(|e| Error::Config(e.to_string()))?;
    let cfg = RunConfig {
        experiment,
        a: c.a,
        delta: c.delta,
        epsilon: c.epsilon,
        lambda_list,
        k_list,
        seed: c.seed.unwrap_or(DEFAULT_SEED),
        trials: c.trials.unwrap_or(DEFAULT_TRIALS),
        out: c.out.unwrap_or_else(|| PathBuf::from("schrate-out")),
        tolerance: c.tolerance.unwrap_or(DEFAULT_TOLERANCE),
        budget: c.budget.unwrap_or(DEFAULT_BUDGET),
        mode,
        n_dim: c.n_dim.unwrap_or(3),
        x_count: c.x_count,
    };

    let need = |name: &str, v: Option<f64>| -> Result<f64> {
        v.ok_or_else(|| Error::Config(format!("`{experiment}` needs --{name}")))
    };
    let wave = experiment == Experiment::Wave;
    if !wave {
        let a = need("a", cfg.a)?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("a = {a} must be positive")));
        }
    }
    let delta_needed = !matches!(experiment, Experiment::Propagate);
    if delta_needed {
        let d = need("delta", cfg.delta)?;
        if !(0.0..1.0).contains(&d) {
            return Err(Error::Config(format!("δ = {d} must lie in [0, 1)")));
        }
    } else if let Some(d) = cfg.delta {
        if !(0.0..1.0).contains(&d) {
            return Err(Error::Config(format!("δ = {d} must lie in [0, 1)")));
        }
    }
    if matches!(experiment, Experiment::Counterexample | Experiment::Wave | Experiment::SweepLambda) {
        let e = need("epsilon", cfg.epsilon)?;
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Config(format!("ε = {e} must lie in (0, 1]")));
        }
        if cfg.lambda_list.is_empty() {
            return Err(Error::Config(format!("`{experiment}` needs --lambda or --lambda-list")));
        }
        if cfg.lambda_list.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Config("λ values must be positive".into()));
        }
    }
    if experiment == Experiment::SweepLambda && cfg.lambda_list.len() < 4 {
        return Err(Error::Config("sweep-lambda needs at least 4 λ values".into()));
    }
    if matches!(experiment, Experiment::Propagate | Experiment::MaximalScan | Experiment::Opnorm | Experiment::SweepBands)
        && cfg.k_list.is_empty()
    {
        return Err(Error::Config(format!("`{experiment}` needs --k or --k-list")));
    }
    if experiment == Experiment::SweepBands && cfg.trials < 8 {
        return Err(Error::Config("sweep-bands needs at least 8 trials".into()));
    }
    if experiment == Experiment::Opnorm && cfg.mode.is_none() {
        return Err(Error::Config("opnorm needs --mode".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if !(cfg.tolerance >= 0.0) {
        return Err(Error::Config("tolerance must be nonnegative".into()));
    }
    if !(cfg.budget > 0.0) {
        return Err(Error::Config("phase budget must be positive".into()));
    }
    if cfg.n_dim != 1 && cfg.n_dim != 3 {
        return Err(Error::Config(format!("n = {} is not supported (1 or 3)", cfg.n_dim)));
    }
    Ok(cfg)
}

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub parameters: String,
    pub quantity: String,
    pub measured: Option<f64>,
    pub predicted: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl ReportRow {
    fn new(cfg: &RunConfig, parameters: String, quantity: &str) -> Self {
        Self {
            experiment: cfg.experiment.to_string(),
            parameters,
            quantity: quantity.to_string(),
            measured: None,
            predicted: None,
            tolerance: None,
            pass: false,
            note: String::new(),
        }
    }

    /// `|measured - predicted| ≤ tolerance`.
    fn compare(mut self, measured: f64, predicted: f64, tolerance: f64) -> Self {
        self.measured = Some(measured);
        self.predicted = Some(predicted);
        self.tolerance = Some(tolerance);
        self.pass = (measured - predicted).abs() <= tolerance;
        self
    }

    /// Pass iff `measured ≤ bound`.
    fn at_most(mut self, measured: f64, bound: f64) -> Self {
        self.measured = Some(measured);
        self.predicted = Some(bound);
        self.pass = measured <= bound;
        self.note = "upper bound".into();
        self
    }

    fn info(mut self, measured: f64) -> Self {
        self.measured = Some(measured);
        self.pass = true;
        self
    }

    fn failed(mut self, err: &Error) -> Self {
        self.pass = false;
        self.note = err.to_string();
        self
    }
}

/// A fitted log-log series for the plot files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub samples: Vec<(f64, f64)>,
    pub fit: Option<ScalingFit>,
}

impl Series {
    fn new(name: &str, samples: &[ScalingSample], fit: Option<ScalingFit>) -> Self {
        Self {
            name: name.to_string(),
            samples: samples.iter().map(|s| (s.parameter(), s.value())).collect(),
            fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub rows: Vec<ReportRow>,
    pub series: Vec<Series>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() { EXIT_PASS } else { EXIT_FAIL }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// Runs the experiment and returns its report without touching the disk.
pub fn execute(cfg: &RunConfig) -> Report {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    match cfg.experiment {
        Experiment::Predict => run_predict(cfg, &mut rows),
        Experiment::Propagate => run_propagate(cfg, &mut rows),
        Experiment::MaximalScan => run_maximal(cfg, &mut rows),
        Experiment::Opnorm => run_opnorm(cfg, &mut rows),
        Experiment::Counterexample => run_counterexample(cfg, &mut rows),
        Experiment::Wave => run_wave(cfg, &mut rows, &mut series),
        Experiment::SweepLambda => run_sweep_lambda(cfg, &mut rows, &mut series),
        Experiment::SweepBands => run_sweep_bands(cfg, &mut rows, &mut series),
    }
    Report { config: cfg.clone(), rows, series }
}

fn run_predict(cfg: &RunConfig, rows: &mut Vec<ReportRow>) {
    let (a, d) = (cfg.a(), cfg.delta());
    let params = format!("a={a};delta={d}");
    let row = ReportRow::new(cfg, params, "threshold_s");
    rows.push(match (predicted_exponent(a, d), a == 1.0) {
        (Ok(p), true) => {
            let mut r = row.info(p.threshold);
            r.predicted = Some(p.threshold);
            r.note = format!("endpoint sufficient: {}", p.endpoint_sufficient);
            r
        }
        (Ok(p), false) => match sharpest_bound(a, d) {
            Ok(s) => {
                let mut r = row.compare(s, p.threshold, 1e-3);
                r.note = "measured: ε-supremum of the sharpness bound".into();
                r
            }
            Err(e) => row.failed(&e),
        },
        (Err(e), _) => row.failed(&e),
    });
}

fn run_propagate(cfg: &RunConfig, rows: &mut Vec<ReportRow>) {
    let a = cfg.a();
    for &k in &cfg.k_list {
        let params = format!("a={a};k={k};seed={}", cfg.seed);
        let result = (|| -> Result<Vec<(f64, f64)>> {
            let base = (-a * f64::from(k)).exp2();
            let times = [0.0, base, 2.0 * base, 4.0 * base];
            let edge = f64::from(k + 1).exp2();
            let speed = a * if a >= 1.0 { edge.powf(a - 1.0) } else { (edge / 4.0).powf(a - 1.0) };
            // The packet stays inside |x| ≤ half up to the last time.
            let half = 4.0 + speed * times[3];
            let grid = FrequencyGrid::with_max_spacing(-edge, edge, FRAC_PI_4 / (half + speed * times[3]))?;
            let f = random_band_profile_on(k, cfg.seed, grid)?;
            let norm = sobolev_norm(&f, 0.0);
            let n = ((2.0 * half * edge / PI).ceil() as usize + 1).max(cfg.x_count.unwrap_or(0));
            let x = uniform_grid(-half, half, n);
            let mut out = Vec::new();
            for &t in &times {
                let s = evolve(&f, a, t, &x)?;
                out.push((t, l2_on_grid(&s.magnitudes(), x[1] - x[0]) / norm));
            }
            Ok(out)
        })();
        match result {
            Ok(ratios) => {
                for (t, r) in ratios {
                    let row = ReportRow::new(cfg, format!("{params};t={t}"), "l2_ratio");
                    rows.push(row.compare(r, 1.0, 1e-4));
                }
            }
            Err(e) => rows.push(ReportRow::new(cfg, params, "l2_ratio").failed(&e)),
        }
    }
}

fn run_maximal(cfg: &RunConfig, rows: &mut Vec<ReportRow>) {
    let (a, d) = (cfg.a(), cfg.delta());
    for &k in &cfg.k_list {
        let params = format!("a={a};delta={d};k={k};seed={}", cfg.seed);
        let result = (|| -> Result<(f64, f64, f64)> {
            let p = EvolutionParams::new(a, d)?;
            let edge = f64::from(k + 1).exp2();
            let plan = scan_windows(a, k, edge, &ScanConfig::default())?;
            let horizon = plan.last().map_or(0.0, |w| w.1.t_hi());
            let speed = a * if a >= 1.0 { edge.powf(a - 1.0) } else { (edge / 4.0).powf(a - 1.0) };
            let grid = FrequencyGrid::with_max_spacing(-edge, edge, FRAC_PI_4 / (1.0 + horizon * speed))?;
            let f = random_band_profile_on(k, cfg.seed, grid)?;
            let x = uniform_grid(-1.0, 1.0, cfg.x_count.unwrap_or(1024));
            let scan = time_maximal_scan(&f, p, k, &x)?;
            let dx = x[1] - x[0];
            let i1 = l2_on_grid(&scan.regime_sup.i1, dx);
            let bound = taylor_tail_bound(&f, p, k)?;
            Ok((l2_on_grid(&scan.sup_values, dx), i1, bound))
        })();
        match result {
            Ok((sup, i1, bound)) => {
                rows.push(ReportRow::new(cfg, params.clone(), "sup_l2").info(sup));
                rows.push(ReportRow::new(cfg, params, "i1_sup_l2_vs_taylor").at_most(i1, bound));
            }
            Err(e) => rows.push(ReportRow::new(cfg, params, "sup_l2").failed(&e)),
        }
    }
}

fn run_opnorm(cfg: &RunConfig, rows: &mut Vec<ReportRow>) {
    let (a, d) = (cfg.a(), cfg.delta());
    let mode = cfg.mode.expect("validated");
    let mut fits = Vec::new();
    for &k in &cfg.k_list {
        let params = format!("a={a};delta={d};k={k};mode={mode:?};trials={};seed={}", cfg.trials, cfg.seed);
        let result = (|| -> Result<_> {
            let p = EvolutionParams::new(a, d)?;
            let window = match mode {
                ProbeMode::Window => {
                    let lo = (-a * f64::from(k)).exp2();
                    Some(TimeWindow::new(lo, 2.0 * lo, 32)?)
                }
                _ => None,
            };
            opnorm_probe(mode, k, window, p, cfg.trials, cfg.seed)
        })();
        match result {
            Ok(r) => {
                fits.push(r.constant_fit);
                rows.push(ReportRow::new(cfg, params.clone(), "measured_ratio").info(r.measured_ratio));
                rows.push(ReportRow::new(cfg, params, "constant_fit").info(r.constant_fit));
            }
            Err(e) => rows.push(ReportRow::new(cfg, params, "measured_ratio").failed(&e)),
        }
    }
    if fits.len() >= 2 {
        let hi = fits.iter().cloned().fold(0.0, f64::max);
        let lo = fits.iter().cloned().fold(f64::INFINITY, f64::min);
        let params = format!("a={a};delta={d};mode={mode:?}");
        let mut row = ReportRow::new(cfg, params, "constant_spread").at_most(hi / lo, 2.0);
        row.note = "max/min of constant_fit over k".into();
        rows.push(row);
    }
}

fn run_counterexample(cfg: &RunConfig, rows: &mut Vec<ReportRow>) {
    let (a, d, eps) = (cfg.a(), cfg.delta(), cfg.epsilon());
    for &lambda in &cfg.lambda_list {
        let params = format!("a={a};delta={d};epsilon={eps};lambda={lambda};budget={}", cfg.budget);
        let result = (|| -> Result<_> {
            let gamma = if a < 1.0 { Some(default_gamma(a, eps)?) } else { None };
            let family = FamilySpec::new(a, lambda, eps, gamma)?;
            let c0 = calibrate_c0(&family, cfg.budget)?;
            verify_lower_bound(&family.with_c0(c0)?, d, cfg.x_count.unwrap_or(256))
        })();
        match result {
            Ok(r) => {
                rows.push(ReportRow::new(cfg, params.clone(), "c0").info(r.c0));
                rows.push(ReportRow::new(cfg, params.clone(), "fraction_passing").compare(r.fraction_passing, 1.0, 0.0));
                let mut min_row = ReportRow::new(cfg, params.clone(), "min_abs_s");
                min_row.measured = Some(r.min_abs_s);
                min_row.predicted = Some(r.threshold);
                min_row.pass = r.min_abs_s >= r.threshold;
                min_row.note = "lower bound".into();
                rows.push(min_row);
                rows.push(ReportRow::new(cfg, params, "sup_abs_r").info(r.sup_abs_r));
            }
            Err(e) => rows.push(ReportRow::new(cfg, params, "fraction_passing").failed(&e)),
        }
    }
}

fn run_wave(cfg: &RunConfig, rows: &mut Vec<ReportRow>, series: &mut Vec<Series>) {
    let d = cfg.delta();
    let eps = cfg.epsilon();
    let n = cfg.n_dim;
    let half = (n as f64 - 1.0) / 2.0;
    let mut reports = Vec::new();
    for &lambda in &cfg.lambda_list {
        let params = format!("n={n};delta={d};epsilon={eps};lambda={lambda}");
        let result = RadialSpec::new(lambda, eps, n)
            .and_then(|spec| verify_wave_lower_bound(&spec, d, cfg.x_count.unwrap_or(64)));
        match result {
            Ok(r) => {
                rows.push(ReportRow::new(cfg, params.clone(), "r_exponent").compare(r.r_fit.slope, -half, 0.15));
                rows.push(ReportRow::new(cfg, params, "smallness").at_most(r.smallness, 0.1));
                reports.push(r);
            }
            Err(e) => rows.push(ReportRow::new(cfg, params, "r_exponent").failed(&e)),
        }
    }
    if reports.len() >= 2 {
        let params = format!("n={n};delta={d};epsilon={eps}");
        match wave_lambda_fit(&reports) {
            Ok(fit) => {
                rows.push(ReportRow::new(cfg, params, "lambda_exponent").compare(fit.slope, eps * half, cfg.tolerance));
                let samples: Vec<ScalingSample> = reports
                    .iter()
                    .filter_map(|r| ScalingSample::new(r.lambda, r.typical_level).ok())
                    .collect();
                series.push(Series::new("wave_lambda", &samples, Some(fit)));
            }
            Err(e) => rows.push(ReportRow::new(cfg, params, "lambda_exponent").failed(&e)),
        }
    }
}

fn run_sweep_lambda(cfg: &RunConfig, rows: &mut Vec<ReportRow>, series: &mut Vec<Series>) {
    let (a, d, eps) = (cfg.a(), cfg.delta(), cfg.epsilon());
    let params = format!("a={a};delta={d};epsilon={eps}");
    match sweep_lambda(a, d, eps, &cfg.lambda_list) {
        Ok(sweep) => {
            let mut samples = Vec::new();
            for p in &sweep.points {
                let pp = format!("{params};lambda={}", p.lambda);
                match (p.sup_abs_r, &p.failure) {
                    (Some(v), None) => {
                        rows.push(ReportRow::new(cfg, pp, "sup_abs_r").info(v));
                        if let Ok(s) = ScalingSample::new(p.lambda, v) {
                            samples.push(s);
                        }
                    }
                    (_, failure) => {
                        let mut row = ReportRow::new(cfg, pp, "sup_abs_r");
                        row.note = failure.clone().unwrap_or_default();
                        rows.push(row);
                    }
                }
            }
            rows.push(ReportRow::new(cfg, params, "slope").compare(sweep.fit.slope, sweep.predicted, cfg.tolerance));
            series.push(Series::new("lambda", &samples, Some(sweep.fit)));
        }
        Err(e) => rows.push(ReportRow::new(cfg, params, "slope").failed(&e)),
    }
}

fn run_sweep_bands(cfg: &RunConfig, rows: &mut Vec<ReportRow>, series: &mut Vec<Series>) {
    let (a, d) = (cfg.a(), cfg.delta());
    let params = format!("a={a};delta={d};trials={};seed={}", cfg.trials, cfg.seed);
    match sweep_bands(a, d, &cfg.k_list, cfg.trials, cfg.seed) {
        Ok(sweep) => {
            let mut ext = Vec::new();
            let mut rnd = Vec::new();
            for p in &sweep.points {
                let pp = format!("{params};k={}", p.k);
                if let Some(f) = &p.failure {
                    let mut row = ReportRow::new(cfg, pp, "ratio");
                    row.note = f.clone();
                    rows.push(row);
                    continue;
                }
                let scale = f64::from(p.k).exp2();
                if let Some(v) = p.extremizer_ratio {
                    rows.push(ReportRow::new(cfg, pp.clone(), "extremizer_ratio").info(v));
                    ext.extend(ScalingSample::new(scale, v).ok());
                }
                if let Some(v) = p.random_ratio {
                    rows.push(ReportRow::new(cfg, pp, "random_ratio").info(v));
                    rnd.extend(ScalingSample::new(scale, v).ok());
                }
            }
            let pe = format!("{params};epsilon={}", sweep.epsilon);
            rows.push(
                ReportRow::new(cfg, pe.clone(), "extremizer_slope")
                    .compare(sweep.extremizer_fit.slope, sweep.predicted, cfg.tolerance),
            );
            rows.push(
                ReportRow::new(cfg, pe.clone(), "random_slope")
                    .at_most(sweep.random_fit.slope, sweep.extremizer_fit.slope + 0.1),
            );
            rows.push(ReportRow::new(cfg, pe.clone(), "extremizer_slope_over_k").info(sweep.extremizer_fit_over_k.slope));
            rows.push(ReportRow::new(cfg, pe, "random_slope_over_k").info(sweep.random_fit_over_k.slope));
            series.push(Series::new("bands_extremizer", &ext, Some(sweep.extremizer_fit)));
            series.push(Series::new("bands_random", &rnd, Some(sweep.random_fit)));
        }
        Err(e) => rows.push(ReportRow::new(cfg, params, "extremizer_slope").failed(&e)),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

/// Writes `report.csv` with a header row; floats carry 17 significant digits.
pub fn write_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["experiment", "parameters", "quantity", "measured", "predicted", "tolerance", "pass", "note"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.parameters.clone(),
            r.quantity.clone(),
            fmt_opt(r.measured),
            fmt_opt(r.predicted),
            fmt_opt(r.tolerance),
            r.pass.to_string(),
            r.note.clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Reads a report back.
pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Config(format!("bad number `{s}` in {}", path.display())))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 8 {
            return Err(Error::Config(format!("{}: expected 8 columns", path.display())));
        }
        rows.push(ReportRow {
            experiment: rec[0].to_string(),
            parameters: rec[1].to_string(),
            quantity: rec[2].to_string(),
            measured: opt(&rec[3])?,
            predicted: opt(&rec[4])?,
            tolerance: opt(&rec[5])?,
            pass: &rec[6] == "true",
            note: rec[7].to_string(),
        });
    }
    Ok(rows)
}

/// `series_<name>.dat` with `log₂ parameter  log₂ value` per line, plus
/// `series_<name>_fit.dat` holding the fitted line at the two end points.
pub fn emit_plot_data(series: &[Series], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for s in series {
        if s.samples.is_empty() {
            return Err(Error::Config(format!("series `{}` is empty; nothing to plot", s.name)));
        }
        let mut text = String::new();
        for &(p, v) in &s.samples {
            text.push_str(&format!("{} {}\n", fmt_f(p.log2()), fmt_f(v.log2())));
        }
        let path = dir.join(format!("series_{}.dat", s.name));
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        written.push(path);
        if let Some(fit) = &s.fit {
            let lo = s.samples.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = s.samples.iter().map(|p| p.0).fold(0.0, f64::max);
            let mut line = String::new();
            for p in [lo, hi] {
                line.push_str(&format!("{} {}\n", fmt_f(p.log2()), fmt_f(fit.predict_log2(p))));
            }
            let path = dir.join(format!("series_{}_fit.dat", s.name));
            fs::write(&path, line).map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: String,
    all_pass: bool,
    exit_code: i32,
    config: &'a RunConfig,
    rows: &'a [ReportRow],
    fits: Vec<(&'a str, Option<ScalingFit>)>,
}

/// Writes `report.csv`, `summary.json` and the series files into `cfg.out`.
pub fn write_report(report: &Report) -> Result<()> {
    let dir = &report.config.out;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_csv(&report.rows, &dir.join("report.csv"))?;
    let summary = Summary {
        experiment: report.config.experiment.to_string(),
        all_pass: report.all_pass(),
        exit_code: report.exit_code(),
        config: &report.config,
        rows: &report.rows,
        fits: report.series.iter().map(|s| (s.name.as_str(), s.fit)).collect(),
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    let nonempty: Vec<Series> = report.series.iter().filter(|s| !s.samples.is_empty()).cloned().collect();
    emit_plot_data(&nonempty, dir)?;
    Ok(())
}

/// Full run: executes, writes all files and returns the exit code.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    let report = execute(cfg);
    write_report(&report)?;
    Ok(report.exit_code())
}

/// Entry point behind the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    match run(&cfg) {
        Ok(code) => {
            if code != EXIT_PASS {
                eprintln!("{}: some checks failed; see {}", cfg.experiment, cfg.out.join("report.csv").display());
            }
            code
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_FAIL
        }
    }
}
