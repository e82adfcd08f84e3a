//! Log-log fits and the two sweeps: the quotient `sup |R_δ^a f|` of the
//! counterexample family against λ, and the band operator ratio against 2^k.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterexample::{
    bump_profile, calibrate_c0, epsilon_range, predicted_exponent, sharpness_bound,
    verify_lower_bound, FamilySpec,
};
use crate::error::{domain, Error, Result};
use crate::maximal::{check_band_limited, scan_windows, sup_over_windows, ScanConfig, TimeWindow};
use crate::oscillatory::Multiplier;
use crate::propagator::EvolutionParams;
use crate::spectral::{
    derive_seed, l2_on_grid, random_band_profile_on, sobolev_norm, uniform_grid, Bump,
    FrequencyGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    parameter: f64,
    value: f64,
}

impl ScalingSample {
    pub fn new(parameter: f64, value: f64) -> Result<Self> {
        if !(parameter > 0.0 && parameter.is_finite()) {
            return domain(format!("scaling parameter {parameter} must be positive"));
        }
        if !(value > 0.0 && value.is_finite()) {
            return domain(format!("scaling value {value} must be positive"));
        }
        Ok(Self { parameter, value })
    }

    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// `log₂ value ≈ slope · log₂ parameter + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual, in log₂ units.
    pub max_residual: f64,
    pub sample_count: usize,
}

impl ScalingFit {
    pub fn predict_log2(&self, parameter: f64) -> f64 {
        self.slope * parameter.log2() + self.intercept
    }
}

/// Ordinary least squares on `(log₂ parameter, log₂ value)`.
pub fn fit_loglog_slope(samples: &[ScalingSample]) -> Result<ScalingFit> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} samples; need at least 2", samples.len())));
    }
    let mut params: Vec<f64> = samples.iter().map(|s| s.parameter).collect();
    params.sort_by(f64::total_cmp);
    if params.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::DegenerateFit("duplicate parameters".into()));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.parameter.log2()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.value.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit { slope, intercept, max_residual, sample_count: samples.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepConfig {
    pub x_count: usize,
    pub phase_budget: f64,
    /// Sequence exponent for `a < 1`; `None` picks the midpoint of the admissible range.
    pub gamma: Option<f64>,
}

impl Default for LambdaSweepConfig {
    fn default() -> Self {
        Self { x_count: 256, phase_budget: FRAC_PI_6, gamma: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub c0: Option<f64>,
    pub sup_abs_r: Option<f64>,
    pub fraction_passing: Option<f64>,
    /// Set when the point failed and was left out of the fit.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub a: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub fit: ScalingFit,
    /// `[a(1+ε) - 2ε]δ`.
    pub predicted: f64,
    pub points: Vec<LambdaPoint>,
}

impl LambdaSweep {
    pub fn flagged(&self) -> impl Iterator<Item = &LambdaPoint> {
        self.points.iter().filter(|p| p.failure.is_some())
    }
}

/// Midpoint of `0 < γ < a/ε - (2 - a)` for `a < 1`.
pub fn default_gamma(a: f64, epsilon: f64) -> Result<f64> {
    let top = a / epsilon - (2.0 - a);
    if !(top > 0.0) {
        return domain(format!("no γ > 0 satisfies ε(γ + 2 - a) < a for a = {a}, ε = {epsilon}"));
    }
    Ok(0.5 * top)
}

pub fn sweep_lambda(a: f64, delta: f64, epsilon: f64, lambda_list: &[f64]) -> Result<LambdaSweep> {
    sweep_lambda_with(a, delta, epsilon, lambda_list, &LambdaSweepConfig::default())
}

pub fn sweep_lambda_with(
    a: f64,
    delta: f64,
    epsilon: f64,
    lambda_list: &[f64],
    cfg: &LambdaSweepConfig,
) -> Result<LambdaSweep> {
    EvolutionParams::new(a, delta)?;
    check_geometric(lambda_list)?;
    let gamma = match (a < 1.0, cfg.gamma) {
        (true, Some(g)) => Some(g),
        (true, None) => Some(default_gamma(a, epsilon)?),
        (false, g) => g,
    };
    // Reject an invalid (a, ε, γ) once rather than flagging every point.
    FamilySpec::new(a, lambda_list[0].max(64.0), epsilon, gamma)?;

    let points: Vec<LambdaPoint> = lambda_list
        .par_iter()
        .map(|&lambda| {
            let run = || -> Result<(f64, f64, f64)> {
                let family = FamilySpec::new(a, lambda, epsilon, gamma)?;
                let c0 = calibrate_c0(&family, cfg.phase_budget)?;
                let report = verify_lower_bound(&family.with_c0(c0)?, delta, cfg.x_count)?;
                Ok((c0, report.sup_abs_r, report.fraction_passing))
            };
            match run() {
                Ok((c0, sup, frac)) => LambdaPoint {
                    lambda,
                    c0: Some(c0),
                    sup_abs_r: Some(sup),
                    fraction_passing: Some(frac),
                    failure: None,
                },
                Err(e) => LambdaPoint {
                    lambda,
                    c0: None,
                    sup_abs_r: None,
                    fraction_passing: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let samples: Vec<ScalingSample> = points
        .iter()
        .filter_map(|p| p.sup_abs_r.map(|v| ScalingSample::new(p.lambda, v)))
        .collect::<Result<_>>()?;
    let fit = fit_loglog_slope(&samples)?;
    Ok(LambdaSweep {
        a,
        delta,
        epsilon,
        fit,
        predicted: (a * (1.0 + epsilon) - 2.0 * epsilon) * delta,
        points,
    })
}

fn check_geometric(list: &[f64]) -> Result<()> {
    if list.len() < 4 {
        return domain(format!("λ list has {} entries; need at least 4", list.len()));
    }
    if list.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return domain("λ values must be positive");
    }
    let q = list[1] / list[0];
    if !(q > 1.0) {
        return domain("λ list must be increasing");
    }
    for p in list.windows(2) {
        if ((p[1] / p[0]) / q - 1.0).abs() > 1e-9 {
            return domain("λ list must be geometric");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSweepConfig {
    /// Points of the uniform grid on `B = [-1, 1]`.
    pub x_points: usize,
    pub scan: ScanConfig,
    /// Time samples per envelope passage of the extremizer.
    pub envelope_samples: f64,
}

impl Default for BandSweepConfig {
    fn default() -> Self {
        Self { x_points: 4096, scan: ScanConfig::default(), envelope_samples: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub k: u32,
    /// Family scale with `λ^{1+ε}` at the extremizer centre.
    pub lambda: f64,
    pub extremizer_ratio: Option<f64>,
    /// Largest ratio over the random trials.
    pub random_ratio: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSweep {
    pub a: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub extremizer_fit: ScalingFit,
    pub random_fit: ScalingFit,
    /// Fits of `ratio / k`, for comparing with and without the factor `k`.
    pub extremizer_fit_over_k: ScalingFit,
    pub random_fit_over_k: ScalingFit,
    pub predicted: f64,
    pub points: Vec<BandPoint>,
}

/// Frequency centre of the extremizer in band `k`.
pub fn extremizer_center(k: u32) -> f64 {
    1.25 * f64::from(k).exp2()
}

/// The ε of the embedded family: whichever of the two candidates (large, and
/// 1/8) forces the larger lower bound on `s`.
pub fn extremizer_epsilon(a: f64, delta: f64) -> Result<f64> {
    let (top, closed) = epsilon_range(a)?;
    let large = if closed { top } else { 0.9 * top };
    let small = 0.125f64.min(0.5 * large);
    Ok(if sharpness_bound(a, delta, large) >= sharpness_bound(a, delta, small) { large } else { small })
}

pub fn sweep_bands(a: f64, delta: f64, k_list: &[u32], trials: usize, seed: u64) -> Result<BandSweep> {
    sweep_bands_with(a, delta, k_list, trials, seed, &BandSweepConfig::default())
}

pub fn sweep_bands_with(
    a: f64,
    delta: f64,
    k_list: &[u32],
    trials: usize,
    seed: u64,
    cfg: &BandSweepConfig,
) -> Result<BandSweep> {
    let params = EvolutionParams::new(a, delta)?;
    if a == 1.0 {
        return domain("band sweeps use the ε-family, defined for a ≠ 1");
    }
    if trials < 8 {
        return domain(format!("{trials} trials; need at least 8"));
    }
    if k_list.len() < 2 || k_list.windows(2).any(|p| p[0] >= p[1]) || k_list[0] < 2 {
        return domain("k list must be increasing, start at k ≥ 2 and have at least 2 entries");
    }
    if cfg.x_points < 2 {
        return domain("need at least two x points");
    }
    let epsilon = extremizer_epsilon(a, delta)?;
    let x = uniform_grid(-1.0, 1.0, cfg.x_points);

    let mut points = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let lambda = extremizer_center(k).powf(1.0 / (1.0 + epsilon));
        let extremizer = extremizer_ratio(params, k, epsilon, &x, cfg);
        let random = random_ratio(params, k, trials, seed, &x, cfg);
        let failure = match (&extremizer, &random) {
            (Err(e), _) | (_, Err(e)) => Some(format!("k = {k}: {e}")),
            _ => None,
        };
        points.push(BandPoint {
            k,
            lambda,
            extremizer_ratio: extremizer.ok(),
            random_ratio: random.ok(),
            failure,
        });
    }

    let fit = |pick: &dyn Fn(&BandPoint) -> Option<f64>, over_k: bool| -> Result<ScalingFit> {
        let samples: Vec<ScalingSample> = points
            .iter()
            .filter(|p| p.failure.is_none())
            .filter_map(|p| {
                pick(p).map(|v| {
                    let v = if over_k { v / f64::from(p.k) } else { v };
                    ScalingSample::new(f64::from(p.k).exp2(), v)
                })
            })
            .collect::<Result<_>>()?;
        fit_loglog_slope(&samples)
    };
    let ext = |p: &BandPoint| p.extremizer_ratio;
    let rnd = |p: &BandPoint| p.random_ratio;
    Ok(BandSweep {
        a,
        delta,
        epsilon,
        extremizer_fit: fit(&ext, false)?,
        random_fit: fit(&rnd, false)?,
        extremizer_fit_over_k: fit(&ext, true)?,
        random_fit_over_k: fit(&rnd, true)?,
        predicted: predicted_exponent(a, delta)?.threshold,
        points,
    })
}

/// Spatial offset of the extremizer: it starts at the right edge of `B` and
/// travels left across it.
pub const EXTREMIZER_OFFSET: f64 = 1.0;

/// `‖sup_t |R_δ^a f|‖_{L²(B)} / ‖f‖_{L²}` for the family re-centred at
/// `1.25 · 2^k` and translated to [`EXTREMIZER_OFFSET`], with time samples
/// dense enough to catch the packet passing every `x ∈ B`.
fn extremizer_ratio(params: EvolutionParams, k: u32, epsilon: f64, x: &[f64], cfg: &BandSweepConfig) -> Result<f64> {
    let a = params.a();
    // R f(· - x₀)(x) = R f(x - x₀).
    let x: Vec<f64> = x.iter().map(|v| v - EXTREMIZER_OFFSET).collect();
    let x = x.as_slice();
    let center = extremizer_center(k);
    let lambda = center.powf(1.0 / (1.0 + epsilon));
    let (lo, hi) = (center - lambda, center + lambda);
    let plan = scan_windows(a, k, hi, &cfg.scan)?;
    let t_max = plan.last().map_or(0.0, |p| p.1.t_hi());
    let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let reach = Bump::default().reach() * lambda;
    let xi_speed = if a > 1.0 { center + reach } else { center - reach };
    let spacing = (FRAC_PI_4 / (x_max + t_max * a * xi_speed.powf(a - 1.0))).min(2.0 * lambda / 4096.0);
    let grid = FrequencyGrid::with_max_spacing(lo, hi, spacing)?;
    let f = bump_profile(grid, center, lambda, 1.0 / lambda)?;
    check_band_limited(&f, k)?;

    // The envelope has spatial scale ~1/λ and moves at a c^{a-1}.
    let velocity = a * center.powf(a - 1.0);
    let windows: Vec<TimeWindow> = plan
        .iter()
        .map(|(_, w)| {
            let rule = (cfg.envelope_samples * w.width() * lambda * velocity).ceil() as usize + 1;
            let n = w.samples_per_window().max(rule).min(1 << 14);
            TimeWindow::new(w.t_lo(), w.t_hi(), n)
        })
        .collect::<Result<_>>()?;
    let ws = sup_over_windows(&f, a, Multiplier::Ratio { delta: params.delta() }, x, &windows)?;
    Ok(l2_on_grid(&ws.sup, x[1] - x[0]) / sobolev_norm(&f, 0.0))
}

/// Largest ratio over `trials` random band profiles.
fn random_ratio(params: EvolutionParams, k: u32, trials: usize, seed: u64, x: &[f64], cfg: &BandSweepConfig) -> Result<f64> {
    let a = params.a();
    let edge = f64::from(k + 1).exp2();
    let plan = scan_windows(a, k, edge, &cfg.scan)?;
    let t_max = plan.last().map_or(0.0, |p| p.1.t_hi());
    let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xi_speed = if a > 1.0 { edge } else { edge / 4.0 };
    let grid = FrequencyGrid::with_max_spacing(-edge, edge, FRAC_PI_4 / (x_max + t_max * a * xi_speed.powf(a - 1.0)))?;
    let windows: Vec<TimeWindow> = plan.into_iter().map(|p| p.1).collect();
    let mut best = 0.0f64;
    for trial in 0..trials {
        let f = random_band_profile_on(k, derive_seed(seed, trial as u64), grid)?;
        let ws = sup_over_windows(&f, a, Multiplier::Ratio { delta: params.delta() }, x, &windows)?;
        best = best.max(l2_on_grid(&ws.sup, x[1] - x[0]) / sobolev_norm(&f, 0.0));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(pairs: &[(f64, f64)]) -> Vec<ScalingSample> {
        pairs.iter().map(|&(p, v)| ScalingSample::new(p, v).unwrap()).collect()
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_loglog_slope(&samples(&[(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)])).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-14 && fit.max_residual < 1e-14);
        let fit = fit_loglog_slope(&samples(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)])).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && fit.max_residual < 1e-14);
        let fit = fit_loglog_slope(&samples(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)])).unwrap();
        assert!(fit.slope.abs() < 1e-14);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(ScalingSample::new(0.0, 1.0).is_err());
        assert!(ScalingSample::new(1.0, -1.0).is_err());
        assert!(matches!(
            fit_loglog_slope(&samples(&[(2.0, 1.0), (2.0, 3.0)])),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(fit_loglog_slope(&samples(&[(2.0, 1.0)])), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn doubling_values_shifts_intercept_by_one() {
        let base = samples(&[(1.0, 1.3), (2.0, 2.9), (4.0, 4.1), (8.0, 9.5)]);
        let doubled: Vec<_> = base.iter().map(|s| ScalingSample::new(s.parameter(), 2.0 * s.value()).unwrap()).collect();
        let f0 = fit_loglog_slope(&base).unwrap();
        let f1 = fit_loglog_slope(&doubled).unwrap();
        assert!((f0.slope - f1.slope).abs() < 1e-13);
        assert!((f1.intercept - f0.intercept - 1.0).abs() < 1e-13);
    }

    #[test]
    fn lambda_list_must_be_geometric() {
        assert!(check_geometric(&[128.0, 256.0, 512.0]).is_err());
        assert!(check_geometric(&[128.0, 256.0, 512.0, 1000.0]).is_err());
        assert!(check_geometric(&[128.0, 256.0, 512.0, 1024.0]).is_ok());
        assert!(check_geometric(&[1024.0, 512.0, 256.0, 128.0]).is_err());
    }

    #[test]
    fn default_gamma_satisfies_the_constraint() {
        let g = default_gamma(0.5, 0.2).unwrap();
        assert!(0.2 * (g + 1.5) < 0.5 && g > 0.0);
        assert!(default_gamma(0.5, 0.4).is_err());
    }

    #[test]
    fn extremizer_epsilon_choices() {
        assert_eq!(extremizer_epsilon(2.0, 0.0).unwrap(), 1.0);
        assert_eq!(extremizer_epsilon(2.0, 0.5).unwrap(), 0.125);
        assert!((extremizer_epsilon(0.5, 0.0).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn extremizer_stays_inside_its_band() {
        for k in 4..=12 {
            for eps in [0.125, 0.3, 1.0] {
                let c = extremizer_center(k);
                let lambda = c.powf(1.0 / (1.0 + eps));
                let reach = Bump::default().reach() * lambda;
                let band = f64::from(k).exp2();
                assert!(c - reach > 0.5 * band && c + reach < 2.0 * band, "k {k} ε {eps}");
            }
        }
    }
}
