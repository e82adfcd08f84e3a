//! Dyadic-time maximal scans, the Taylor tail bound for short times, and
//! empirical operator-norm probes.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::oscillatory::{self, Multiplier, Nodes};
use crate::propagator::{admissible_stride, EvolutionParams};
use crate::spectral::{
    derive_seed, l2_on_grid, random_band_profile_on, sobolev_norm, uniform_grid, FrequencyGrid,
    SpectralProfile,
};
use crate::sum::{pairwise_sum, trapezoid};

/// Time regime of the scan: short times, dyadic middle range, long times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    I1,
    I2,
    I3,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::I1 => "I1",
            Regime::I2 => "I2",
            Regime::I3 => "I3",
        })
    }
}

/// Sampled time interval `[t_lo, t_hi] ⊂ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    t_lo: f64,
    t_hi: f64,
    samples_per_window: usize,
}

impl TimeWindow {
    pub fn new(t_lo: f64, t_hi: f64, samples_per_window: usize) -> Result<Self> {
        if !(t_lo >= 0.0 && t_lo < t_hi && t_hi <= 1.0) {
            return domain(format!("time window [{t_lo}, {t_hi}] must satisfy 0 ≤ t_lo < t_hi ≤ 1"));
        }
        if samples_per_window < 2 {
            return domain("a time window needs at least two samples");
        }
        Ok(Self { t_lo, t_hi, samples_per_window })
    }

    pub fn t_lo(&self) -> f64 {
        self.t_lo
    }

    pub fn t_hi(&self) -> f64 {
        self.t_hi
    }

    pub fn samples_per_window(&self) -> usize {
        self.samples_per_window
    }

    pub fn width(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    /// Geometric samples when `t_lo > 0`, uniform otherwise. Both endpoints
    /// are included, and going from `n` to `2n - 1` samples adds midpoints
    /// without moving the old ones.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.samples_per_window;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.t_hi
                } else if self.t_lo > 0.0 {
                    self.t_lo * ((self.t_hi / self.t_lo).ln() * i as f64 / last).exp()
                } else {
                    self.t_hi * i as f64 / last
                }
            })
            .collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_lo <= t && t <= self.t_hi
    }
}

/// Sampling parameters of the maximal scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Samples in each dyadic window of the middle and long-time regimes.
    pub samples_per_window: usize,
    /// Octaves below `2^{-ak}` covered by the short-time regime.
    pub i1_octaves: u32,
    /// Octaves above `2^{(1-a)k}` covered by the long-time regime; `None`
    /// scans all the way to `t = 1`.
    pub i3_octaves: Option<u32>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { samples_per_window: 32, i1_octaves: 16, i3_octaves: Some(2) }
    }
}

/// Per-point supremum over the scanned time set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalScanResult {
    pub x_grid: Vec<f64>,
    pub sup_values: Vec<f64>,
    pub argmax_t: Vec<f64>,
    pub regime: Vec<Regime>,
    /// Per-regime suprema; zero where a regime has no windows.
    pub regime_sup: RegimeSups,
    /// Largest time covered by the scan.
    pub horizon: f64,
    /// Upper bound on how much any sampled supremum can fall short of the
    /// true supremum over `[t_first, horizon]` (phase-speed argument).
    pub correction_bound: f64,
    /// Bound on `|R|` over the unscanned interval `(horizon, 1)`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSups {
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub i3: Vec<f64>,
}

impl RegimeSups {
    pub fn get(&self, r: Regime) -> &[f64] {
        match r {
            Regime::I1 => &self.i1,
            Regime::I2 => &self.i2,
            Regime::I3 => &self.i3,
        }
    }
}

/// Scan plan for band `k`: short-time octaves in `(0, 2^{-ak}]` sampled by
/// the π/8 phase rule, dyadic windows up to `2^{(1-a)k}` (or 1 when a ≤ 1),
/// and for `a > 1` dyadic windows beyond, up to the configured horizon.
pub fn scan_windows(a: f64, k: u32, xi_max: f64, cfg: &ScanConfig) -> Result<Vec<(Regime, TimeWindow)>> {
    if !(a > 0.0) {
        return domain("dispersion exponent must be positive");
    }
    if cfg.samples_per_window < 2 {
        return domain("samples_per_window must be at least 2");
    }
    let kf = f64::from(k);
    let lo = (-a * kf).exp2();
    let mid = ((1.0 - a) * kf).exp2().min(1.0);
    let speed = xi_max.powf(a);
    let mut out = Vec::new();

    for j in (0..cfg.i1_octaves).rev() {
        let t_hi = lo * (-f64::from(j)).exp2();
        let t_lo = 0.5 * t_hi;
        let q = 1.0 + FRAC_PI_8 / (t_hi * speed).max(f64::MIN_POSITIVE);
        let n = ((2.0f64).ln() / q.ln()).ceil().max(1.0) as usize + 1;
        out.push((Regime::I1, TimeWindow::new(t_lo, t_hi, n.clamp(2, 4096))?));
    }
    for (t_lo, t_hi) in dyadic_pieces(lo, mid) {
        out.push((Regime::I2, TimeWindow::new(t_lo, t_hi, cfg.samples_per_window)?));
    }
    if a > 1.0 {
        let top = match cfg.i3_octaves {
            Some(o) => (mid * f64::from(o).exp2()).min(1.0),
            None => 1.0,
        };
        for (t_lo, t_hi) in dyadic_pieces(mid, top) {
            out.push((Regime::I3, TimeWindow::new(t_lo, t_hi, cfg.samples_per_window)?));
        }
    }
    Ok(out)
}

/// Splits `[lo, hi]` at powers of two.
fn dyadic_pieces(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut pieces = Vec::new();
    let mut t = lo;
    while t < hi * (1.0 - 1e-12) {
        let mut next = t.log2().floor().exp2() * 2.0;
        if next <= t {
            next *= 2.0;
        }
        let end = if next >= hi * (1.0 - 1e-12) { hi } else { next };
        pieces.push((t, end));
        t = end;
    }
    pieces
}

/// `(1/2π) ∫ |ξ|^p |f̂|`: bounds `|∂_t^{p/a} S^a f|` pointwise.
fn moment(f: &SpectralProfile, p: f64) -> f64 {
    let grid = f.grid();
    let terms: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| if v.norm_sqr() == 0.0 { 0.0 } else { grid.node(j).abs().powf(p) * v.norm() })
        .collect();
    trapezoid(&terms, grid.spacing()) / (2.0 * PI)
}

pub(crate) struct WindowSup {
    pub sup: Vec<f64>,
    pub argmax: Vec<f64>,
    pub window: Vec<usize>,
    /// Supremum restricted to each window, indexed `[window][x]`.
    pub per_window: Vec<Vec<f64>>,
}

/// Pointwise maximum of `|S f|` or `|R f|` over the sample times of each window.
pub(crate) fn sup_over_windows(
    f: &SpectralProfile,
    a: f64,
    mult: Multiplier,
    x_grid: &[f64],
    windows: &[TimeWindow],
) -> Result<WindowSup> {
    let nx = x_grid.len();
    let x_max = x_grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = WindowSup {
        sup: vec![f64::NEG_INFINITY; nx],
        argmax: vec![f64::NAN; nx],
        window: vec![0; nx],
        per_window: Vec::with_capacity(windows.len()),
    };
    let mut cached: Option<(usize, Nodes)> = None;
    for (w, window) in windows.iter().enumerate() {
        let stride = admissible_stride(f, a, window.t_hi(), x_max)?;
        let nodes = match cached.take() {
            Some((s, n)) if s == stride => n,
            _ => Nodes::from_profile(f, stride),
        };
        let times = window.sample_times();
        let table = oscillatory::eval_grid(&nodes, a, x_grid, &times, mult);
        let mut local = vec![0.0f64; nx];
        for i in 0..nx {
            let row = &table[i * times.len()..(i + 1) * times.len()];
            let mut best = f64::NEG_INFINITY;
            let mut best_t = times[0];
            for (v, &t) in row.iter().zip(&times) {
                let m = v.norm();
                if m > best {
                    best = m;
                    best_t = t;
                }
            }
            local[i] = best;
            if best > out.sup[i] {
                out.sup[i] = best;
                out.argmax[i] = best_t;
                out.window[i] = w;
            }
        }
        out.per_window.push(local);
        cached = Some((stride, nodes));
    }
    Ok(out)
}

/// Checks that every nonzero sample lies in `2^{k-1} < |ξ| < 2^{k+1}`.
pub fn check_band_limited(f: &SpectralProfile, k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::Precondition("band index must be at least 1".into()));
    }
    let lo = f64::from(k - 1).exp2();
    let hi = f64::from(k + 1).exp2();
    for (j, v) in f.values().iter().enumerate() {
        let r = f.grid().node(j).abs();
        if v.norm_sqr() > 0.0 && !(r > lo && r < hi) {
            return Err(Error::Precondition(format!(
                "profile is nonzero at |ξ| = {r}, outside the band ({lo}, {hi})"
            )));
        }
    }
    Ok(())
}

/// `sup_t |R_δ^a f(x,t)|` over the default scan of band `k`.
pub fn time_maximal_scan(
    f: &SpectralProfile,
    params: EvolutionParams,
    k: u32,
    x_grid: &[f64],
) -> Result<MaximalScanResult> {
    time_maximal_scan_with(f, params, k, x_grid, &ScanConfig::default())
}

pub fn time_maximal_scan_with(
    f: &SpectralProfile,
    params: EvolutionParams,
    k: u32,
    x_grid: &[f64],
    cfg: &ScanConfig,
) -> Result<MaximalScanResult> {
    check_band_limited(f, k)?;
    scan_with_multiplier(f, params, k, x_grid, cfg, true)
}

fn scan_with_multiplier(
    f: &SpectralProfile,
    params: EvolutionParams,
    k: u32,
    x_grid: &[f64],
    cfg: &ScanConfig,
    quotient: bool,
) -> Result<MaximalScanResult> {
    let a = params.a();
    let delta = if quotient { params.delta() } else { 0.0 };
    let xi_max = f.abs_frequency_range().map_or(0.0, |r| r.1);
    let plan = scan_windows(a, k, xi_max, cfg)?;
    let windows: Vec<TimeWindow> = plan.iter().map(|p| p.1).collect();
    let mult = if quotient { Multiplier::Ratio { delta } } else { Multiplier::Evolve };
    let ws = sup_over_windows(f, a, mult, x_grid, &windows)?;

    let nx = x_grid.len();
    let mut regime_sup = RegimeSups { i1: vec![0.0; nx], i2: vec![0.0; nx], i3: vec![0.0; nx] };
    for ((regime, _), local) in plan.iter().zip(&ws.per_window) {
        let dest = match regime {
            Regime::I1 => &mut regime_sup.i1,
            Regime::I2 => &mut regime_sup.i2,
            Regime::I3 => &mut regime_sup.i3,
        };
        for (d, v) in dest.iter_mut().zip(local) {
            *d = d.max(*v);
        }
    }

    // |∂_t R| ≤ (1+δ) D t^{-δ} with D = (1/2π)∫|ξ|^a|f̂|; a gap h costs at most half of that times h.
    let d = moment(f, a);
    let mut correction = 0.0f64;
    for w in &windows {
        let times = w.sample_times();
        let gap = times.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
        correction = correction.max((1.0 + delta) * d * w.t_lo().powf(-delta) * gap / 2.0);
    }
    let t_first = windows.first().map_or(0.0, |w| w.t_lo());
    if quotient {
        // Below the first sample |R| ≤ D t^{1-δ}.
        correction = correction.max(d * t_first.powf(1.0 - delta));
    } else {
        correction = correction.max(d * t_first);
    }
    let horizon = windows.last().map_or(0.0, |w| w.t_hi());
    let tail_bound = if horizon >= 1.0 {
        0.0
    } else {
        let m0 = moment(f, 0.0);
        if quotient { 2.0 * m0 / horizon.powf(delta) } else { m0 }
    };

    Ok(MaximalScanResult {
        x_grid: x_grid.to_vec(),
        sup_values: ws.sup,
        argmax_t: ws.argmax,
        regime: ws.window.iter().map(|&w| plan[w].0).collect(),
        regime_sup,
        horizon,
        correction_bound: correction,
        tail_bound,
    })
}

/// `2^{akδ} Σ_{j≥1} ‖(|ξ| 2^{-k})^{aj} f̂‖_{L²} / j!`, which dominates
/// `‖sup_{0<t≤2^{-ak}} |R_δ^a f|‖_{L²}` by the exponential series.
pub fn taylor_tail_bound(f: &SpectralProfile, params: EvolutionParams, k: u32) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    check_band_limited(f, k)?;
    let a = params.a();
    let scale = f64::from(k).exp2();
    let mut sum = 0.0;
    let mut factorial = 1.0;
    for j in 1..=400 {
        factorial *= f64::from(j);
        let p = 2.0 * a * f64::from(j);
        let energy = f.weighted_energy(|xi| (xi.abs() / scale).powf(p));
        let term = (energy / (2.0 * PI)).sqrt() / factorial;
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    Ok((a * f64::from(k) * params.delta()).exp2() * sum)
}

/// Which inequality the probe measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    /// `‖sup_{0<t<1} |S^a f|‖_{L²(B)} ≤ C ‖f‖_{H^{1/4}}`.
    LocalQuarter,
    /// `‖sup_{t∈J} |S^a f|‖_{L²} ≤ C (1 + |J|^{1/4} 2^{ka/4}) ‖f‖_{L²}` for band `k`.
    Window,
    /// `‖sup_{0<t<1} |R_δ^a f|‖_{L²} ≤ C ‖f‖_{H^{aδ}}` for `1/2 < δ < 1`.
    GlobalCowling,
}

impl std::str::FromStr for ProbeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local_quarter" | "local-quarter" => Ok(ProbeMode::LocalQuarter),
            "window" => Ok(ProbeMode::Window),
            "global_cowling" | "global-cowling" => Ok(ProbeMode::GlobalCowling),
            other => domain(format!("unknown probe mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub measured_ratio: f64,
    pub k: u32,
    pub trials: usize,
    pub constant_fit: f64,
}

/// Spatial domain and time sampling of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Half-width of the x-window for the window and Cowling modes.
    pub x_half_width: f64,
    pub x_points: usize,
    pub scan: ScanConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { x_half_width: 2.0, x_points: 4096, scan: ScanConfig::default() }
    }
}

pub fn opnorm_probe(
    mode: ProbeMode,
    k: u32,
    window: Option<TimeWindow>,
    params: EvolutionParams,
    trials: usize,
    seed: u64,
) -> Result<NormReport> {
    opnorm_probe_with(mode, k, window, params, trials, seed, &ProbeConfig::default())
}

pub fn opnorm_probe_with(
    mode: ProbeMode,
    k: u32,
    window: Option<TimeWindow>,
    params: EvolutionParams,
    trials: usize,
    seed: u64,
    cfg: &ProbeConfig,
) -> Result<NormReport> {
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    if k == 0 {
        return domain("band index must be at least 1");
    }
    let a = params.a();
    match mode {
        ProbeMode::LocalQuarter if a <= 1.0 => {
            return domain("the H^{1/4} local estimate concerns a > 1")
        }
        ProbeMode::GlobalCowling if !(params.delta() > 0.5) => {
            return domain("the global estimate needs δ ∈ (1/2, 1)")
        }
        ProbeMode::Window if window.is_none() => return domain("window mode needs a time window J"),
        _ => {}
    }

    let half_width = match mode {
        ProbeMode::LocalQuarter => 1.0,
        _ => cfg.x_half_width,
    };
    if cfg.x_points < 2 || !(half_width > 0.0) {
        return domain("x-window must have positive width and at least two points");
    }
    let x = uniform_grid(-half_width, half_width, cfg.x_points);
    let dx = x[1] - x[0];
    let edge = f64::from(k + 1).exp2();
    // For a < 1 the phase speed peaks at the inner edge of the band.
    let xi_speed = if a >= 1.0 { edge } else { edge / 4.0 };
    let speed_bound = a * xi_speed.powf(a - 1.0);

    let (windows, t_max, quotient) = match mode {
        ProbeMode::Window => {
            let j = window.expect("checked above");
            let rule = (j.width() * edge.powf(a) / FRAC_PI_8).ceil() as usize + 1;
            let n = j.samples_per_window().max(rule).min(1 << 16);
            (vec![TimeWindow::new(j.t_lo(), j.t_hi(), n)?], j.t_hi(), false)
        }
        ProbeMode::LocalQuarter | ProbeMode::GlobalCowling => {
            let plan = scan_windows(a, k, edge, &cfg.scan)?;
            let t_max = plan.last().map_or(0.0, |p| p.1.t_hi());
            (plan.into_iter().map(|p| p.1).collect(), t_max, mode == ProbeMode::GlobalCowling)
        }
    };
    let spacing = FRAC_PI_4 / (half_width + t_max * speed_bound);
    let grid = FrequencyGrid::with_max_spacing(-edge, edge, spacing)?;
    let mult = if quotient { Multiplier::Ratio { delta: params.delta() } } else { Multiplier::Evolve };

    let ratios: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let f = random_band_profile_on(k, derive_seed(seed, trial as u64), grid)?;
            let ws = sup_over_windows(&f, a, mult, &x, &windows)?;
            let out = l2_on_grid(&ws.sup, dx);
            let input = match mode {
                ProbeMode::LocalQuarter => sobolev_norm(&f, 0.25),
                ProbeMode::Window => sobolev_norm(&f, 0.0),
                ProbeMode::GlobalCowling => sobolev_norm(&f, a * params.delta()),
            };
            Ok(out / input)
        })
        .collect();
    let mut measured = 0.0f64;
    for r in ratios {
        measured = measured.max(r?);
    }
    let factor = match mode {
        ProbeMode::Window => {
            let j = window.expect("checked above");
            1.0 + j.width().powf(0.25) * (a * f64::from(k) / 4.0).exp2()
        }
        _ => 1.0,
    };
    Ok(NormReport { measured_ratio: measured, k, trials, constant_fit: measured / factor })
}

/// Measure of `{x ∈ [-1, 1] : values(x) > alpha}` with trapezoid weights on
/// the uniform grid (a full grid has measure exactly 2).
pub fn weak_level_measure(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return domain(format!("level α = {alpha} must be positive"));
    }
    let n = values.len();
    if n < 2 {
        return domain("level-set measure needs at least two grid values");
    }
    let h = 2.0 / (n - 1) as f64;
    let weights: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > alpha {
                if i == 0 || i + 1 == n { 0.5 * h } else { h }
            } else {
                0.0
            }
        })
        .collect();
    Ok(pairwise_sum(&weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Bump, Interval};
    use num_complex::Complex64;

    fn tone(xi0: f64, w: f64) -> SpectralProfile {
        let b = Bump::default();
        let grid = FrequencyGrid::new(xi0 - w, xi0 + w, 513).unwrap();
        SpectralProfile::from_fn(grid, Some(Interval::new(xi0 - w, xi0 + w)), |xi| {
            Complex64::new(2.0 * PI / w * b.eval((xi - xi0) / w), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(TimeWindow::new(0.5, 0.5, 4).is_err());
        assert!(TimeWindow::new(0.1, 1.5, 4).is_err());
        assert!(TimeWindow::new(0.1, 0.2, 1).is_err());
    }

    #[test]
    fn window_samples_nest_under_refinement() {
        let coarse = TimeWindow::new(0.125, 0.25, 5).unwrap().sample_times();
        let fine = TimeWindow::new(0.125, 0.25, 9).unwrap().sample_times();
        for (i, t) in coarse.iter().enumerate() {
            assert!((fine[2 * i] - t).abs() <= 1e-17);
        }
    }

    #[test]
    fn plan_covers_the_regimes_contiguously() {
        let plan = scan_windows(2.0, 6, 128.0, &ScanConfig::default()).unwrap();
        for pair in plan.windows(2) {
            assert!((pair[0].1.t_hi() - pair[1].1.t_lo()).abs() < 1e-18);
        }
        let i2: Vec<_> = plan.iter().filter(|p| p.0 == Regime::I2).collect();
        assert!((i2[0].1.t_lo() - 2f64.powi(-12)).abs() < 1e-20);
        assert!((i2.last().unwrap().1.t_hi() - 2f64.powi(-6)).abs() < 1e-20);
        assert!(scan_windows(0.5, 6, 128.0, &ScanConfig::default())
            .unwrap()
            .iter()
            .all(|p| p.0 != Regime::I3));
    }

    #[test]
    fn tone_maximal_reaches_two() {
        let f = tone(16.0, 2f64.powi(-8));
        let params = EvolutionParams::new(2.0, 0.0).unwrap();
        let cfg = ScanConfig { samples_per_window: 257, ..ScanConfig::default() };
        let scan = time_maximal_scan_with(&f, params, 4, &[0.0, 0.3], &cfg).unwrap();
        for v in &scan.sup_values {
            assert!((v - 2.0).abs() < 1e-3, "{v}");
        }
        let t = scan.argmax_t[0];
        assert!((t * 256.0 - PI).abs() < 0.1);
    }

    #[test]
    fn out_of_band_profile_is_rejected() {
        let f = tone(40.0, 1.0);
        let params = EvolutionParams::new(2.0, 0.0).unwrap();
        assert!(matches!(
            time_maximal_scan(&f, params, 4, &[0.0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn argmax_lies_in_labelled_regime() {
        let params = EvolutionParams::new(2.0, 0.25).unwrap();
        let x = uniform_grid(-1.0, 1.0, 65);
        // Horizon 2^{-2}: phase speed 2·32 at the top of the band.
        let grid = FrequencyGrid::with_max_spacing(-32.0, 32.0, FRAC_PI_4 / 17.0).unwrap();
        let f = random_band_profile_on(4, 3, grid).unwrap();
        let scan = time_maximal_scan(&f, params, 4, &x).unwrap();
        let plan = scan_windows(2.0, 4, 32.0, &ScanConfig::default()).unwrap();
        for (t, r) in scan.argmax_t.iter().zip(&scan.regime) {
            assert!(plan.iter().any(|(reg, w)| reg == r && w.contains(*t)));
        }
    }

    #[test]
    fn tone_taylor_bound_closed_form() {
        // A tone exactly at 2^k: Σ_j 2^{-ak(j-δ)} 2^{akj}/j! = 2^{akδ}(e - 1) per unit norm.
        let w = 1e-9;
        let b = Bump::default();
        let xi0 = 32.0;
        let grid = FrequencyGrid::new(xi0 - w, xi0 + w, 257).unwrap();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(xi0 - w, xi0 + w)), |xi| {
            Complex64::new(b.eval((xi - xi0) / w), 0.0)
        })
        .unwrap();
        let f = f.scaled(1.0 / sobolev_norm(&f, 0.0));
        let params = EvolutionParams::new(2.0, 0.25).unwrap();
        let bound = taylor_tail_bound(&f, params, 5).unwrap();
        let exact = (2.0 * 5.0 * 0.25f64).exp2() * (std::f64::consts::E - 1.0);
        assert!((bound / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_profile_has_zero_tail_bound() {
        let grid = FrequencyGrid::new(-1.0, 1.0, 11).unwrap();
        let params = EvolutionParams::new(2.0, 0.25).unwrap();
        assert_eq!(taylor_tail_bound(&SpectralProfile::zeros(grid), params, 3).unwrap(), 0.0);
    }

    #[test]
    fn level_measure_examples() {
        assert_eq!(weak_level_measure(&[0.0; 101], 1.0).unwrap(), 0.0);
        assert!((weak_level_measure(&[2.0; 101], 1.0).unwrap() - 2.0).abs() < 1e-14);
        let half: Vec<f64> = (0..101).map(|i| if i < 50 { 3.0 } else { 0.5 }).collect();
        assert!((weak_level_measure(&half, 1.0).unwrap() - 1.0).abs() <= 0.02);
        assert!(weak_level_measure(&half, 0.0).is_err());
    }

    #[test]
    fn probe_validates_mode_preconditions() {
        let p = EvolutionParams::new(2.0, 0.25).unwrap();
        assert!(opnorm_probe(ProbeMode::GlobalCowling, 4, None, p, 1, 0).is_err());
        assert!(opnorm_probe(ProbeMode::Window, 4, None, p, 1, 0).is_err());
        assert!(opnorm_probe(ProbeMode::LocalQuarter, 4, None, p, 0, 0).is_err());
        let half = EvolutionParams::new(0.5, 0.25).unwrap();
        assert!(opnorm_probe(ProbeMode::LocalQuarter, 4, None, half, 1, 0).is_err());
        assert!("sideways".parse::<ProbeMode>().is_err());
    }

    #[test]
    fn degenerate_window_is_a_single_unitary_evaluation() {
        let p = EvolutionParams::new(2.0, 0.0).unwrap();
        let j = TimeWindow::new(0.01, 0.01 + 1e-12, 2).unwrap();
        let cfg = ProbeConfig { x_half_width: 4.0, x_points: 4096, ..ProbeConfig::default() };
        let r = opnorm_probe_with(ProbeMode::Window, 4, Some(j), p, 3, 1, &cfg).unwrap();
        assert!((r.measured_ratio - 1.0).abs() < 1e-4, "{}", r.measured_ratio);
    }
}
