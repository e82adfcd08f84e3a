//! Extremizing families: the frequency bump `f̂ = λ^{-1} φ((ξ - λ^{1+ε})/λ)`
//! for `a ≠ 1`, its radial analogue for the wave propagator, the time
//! sequences `t_n = n^{-γ}`, the phase-error budget and the lower bounds.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::propagator::{self, EvolutionParams};
use crate::scaling::{fit_loglog_slope, ScalingFit, ScalingSample};
use crate::spectral::{
    make_bump, sobolev_norm, uniform_grid, Bump, BumpSpec, FrequencyGrid, Interval,
    SpectralProfile,
};

/// Parameters `(a, λ, ε, γ)` of the family, without the interval constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    a: f64,
    lambda: f64,
    epsilon: f64,
    gamma: f64,
}

impl FamilySpec {
    /// For `a > 1`, `gamma` defaults to (and must equal) `2(a - 1)`. For
    /// `a < 1` it must be given and satisfy `ε(γ + 2 - a) < a`.
    pub fn new(a: f64, lambda: f64, epsilon: f64, gamma: Option<f64>) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || a == 1.0 {
            return domain(format!("family needs a > 0, a ≠ 1 (got {a})"));
        }
        if !(lambda >= 64.0 && lambda.is_finite()) {
            return domain(format!("λ = {lambda} must be at least 2^6"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return domain(format!("ε = {epsilon} must lie in (0, 1]"));
        }
        let gamma = if a > 1.0 {
            let g = 2.0 * (a - 1.0);
            if let Some(given) = gamma {
                if (given - g).abs() > 1e-12 * g {
                    return domain(format!("for a > 1 the sequence exponent is 2(a-1) = {g}"));
                }
            }
            g
        } else {
            let g = gamma.ok_or_else(|| Error::Domain("a < 1 needs an explicit γ".into()))?;
            if !(g > 0.0) {
                return domain("γ must be positive");
            }
            if !(epsilon * (g + 2.0 - a) < a) {
                return domain(format!("ε(γ + 2 - a) < a fails for ε = {epsilon}, γ = {g}"));
            }
            g
        };
        Ok(Self { a, lambda, epsilon, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Frequency centre `λ^{1+ε}`.
    pub fn center(&self) -> f64 {
        self.lambda.powf(1.0 + self.epsilon)
    }

    /// Group-velocity scale `Λ = λ^{(a-1)(1+ε)}`.
    pub fn velocity_scale(&self) -> f64 {
        self.lambda.powf((self.a - 1.0) * (1.0 + self.epsilon))
    }

    pub fn support(&self) -> Interval {
        Interval::new(self.center() - self.lambda, self.center() + self.lambda)
    }

    pub fn with_c0(self, c0: f64) -> Result<CounterexampleSpec> {
        CounterexampleSpec::new(self, c0)
    }
}

/// A family together with the constant `c₀` of the interval `I_{λ,ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    family: FamilySpec,
    c0: f64,
}

impl CounterexampleSpec {
    pub fn new(family: FamilySpec, c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return domain(format!("c₀ = {c0} must be positive"));
        }
        Ok(Self { family, c0 })
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `I_{λ,ε} = [-c₀ λ^{ε-1}, -c₀ λ^{ε-1}/2]`.
    pub fn interval(&self) -> Interval {
        let left = -self.c0 * self.family.lambda.powf(self.family.epsilon - 1.0);
        Interval::new(left, 0.5 * left)
    }
}

/// `t_n = n^{-γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSequence {
    gamma: f64,
}

impl TimeSequence {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return domain(format!("γ = {gamma} must be positive"));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn t(&self, n: u64) -> f64 {
        (n as f64).powf(-self.gamma)
    }

    /// Gap exponent `β = (γ + 1)/γ`: `t_n - t_{n+1} ≲ t_n^β`.
    pub fn gap_exponent(&self) -> f64 {
        (self.gamma + 1.0) / self.gamma
    }

    /// `max_{n ≤ n_max} (t_n - t_{n+1}) / t_n^β`.
    pub fn gap_constant(&self, n_max: u64) -> f64 {
        let beta = self.gap_exponent();
        (1..=n_max)
            .map(|n| (self.t(n) - self.t(n + 1)) / self.t(n).powf(beta))
            .fold(0.0, f64::max)
    }

    /// Largest `n` with `t_n > tau`, for `0 < tau < 1`.
    fn last_above(&self, tau: f64) -> Result<u64> {
        if !(tau > 0.0) {
            return Err(Error::Range("time index undefined at τ = 0".into()));
        }
        let guess = tau.powf(-1.0 / self.gamma);
        if !(guess < 2f64.powi(53)) {
            return Err(Error::Range(format!("time index {guess:.3e} is not representable")));
        }
        let mut n = (guess.ceil() as u64).saturating_sub(1).max(1);
        while self.t(n + 1) > tau {
            n += 1;
        }
        while n > 1 && self.t(n) <= tau {
            n -= 1;
        }
        Ok(n)
    }
}

pub fn time_sequence(gamma: f64, n: i64) -> Result<f64> {
    if n < 1 {
        return domain(format!("time index n = {n} must be at least 1"));
    }
    Ok(TimeSequence::new(gamma)?.t(n as u64))
}

/// `a t_n Λ`: the cell `(-b_n, -b_{n+1}]` selects index `n`.
pub fn cell_boundary(family: &FamilySpec, n: u64) -> f64 {
    family.a * family.velocity_scale() * TimeSequence { gamma: family.gamma }.t(n)
}

/// The unique `n` with `x ∈ (-a t_n Λ, -a t_{n+1} Λ]`, for `x ∈ I_{λ,ε}`.
pub fn select_time_index(x: f64, spec: &CounterexampleSpec) -> Result<u64> {
    if !spec.interval().contains(x) {
        return domain(format!("x = {x} lies outside I_{{λ,ε}}"));
    }
    index_for(x, &spec.family)
}

fn index_for(x: f64, family: &FamilySpec) -> Result<u64> {
    if !(x < 0.0) {
        return domain("time index is defined for x < 0");
    }
    let seq = TimeSequence { gamma: family.gamma };
    let scale = family.a * family.velocity_scale();
    if -x >= scale * seq.t(1) {
        return domain(format!("x = {x} is left of the first cell"));
    }
    let mut n = seq.last_above(-x / scale)?;
    // Settle rounding against the boundaries exactly as they are defined.
    while n > 1 && !(-cell_boundary(family, n) < x) {
        n -= 1;
    }
    while !(x <= -cell_boundary(family, n + 1)) {
        n += 1;
    }
    Ok(n)
}

/// `E₁`, `E₂`, the computed bound on `E₃`, and the actual remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorBreakdown {
    pub e1: f64,
    pub e2: f64,
    pub e3_bound: f64,
    pub total_phase_residual: f64,
}

/// `max_{|v| ≤ λ^{-ε}} |a(a-1)(a-2)(1+v)^{a-3}| / 6`.
fn third_derivative_factor(family: &FamilySpec) -> f64 {
    let a = family.a;
    let u = family.lambda.powf(-family.epsilon);
    let c = (a * (a - 1.0) * (a - 2.0)).abs() / 6.0;
    // (1+v)^{a-3} is monotone in v, so the maximum sits at an endpoint.
    c * (1.0 - u).powf(a - 3.0).max((1.0 + u).powf(a - 3.0))
}

/// `Σ_{j≥3} C(a, j) u^j` for `|u| < 1`, without cancellation.
fn binomial_tail(a: f64, u: f64) -> f64 {
    let mut coeff = a * (a - 1.0) * (a - 2.0) / 6.0;
    let mut power = u * u * u;
    let mut sum = 0.0;
    for j in 3..10_000u32 {
        let term = coeff * power;
        sum += term;
        if term == 0.0 || term.abs() < 1e-18 * sum.abs() {
            break;
        }
        coeff *= (a - f64::from(j)) / f64::from(j + 1);
        power *= u;
    }
    sum
}

pub fn phase_error_terms(xi: f64, x: f64, t: f64, spec: &CounterexampleSpec) -> Result<PhaseErrorBreakdown> {
    if !(xi.abs() <= 1.0) {
        return domain(format!("ξ = {xi} must satisfy |ξ| ≤ 1"));
    }
    if !(t >= 0.0) {
        return domain("time must be nonnegative");
    }
    Ok(phase_terms(&spec.family, xi, x, t))
}

fn phase_terms(family: &FamilySpec, xi: f64, x: f64, t: f64) -> PhaseErrorBreakdown {
    let (a, lambda, eps) = (family.a, family.lambda, family.epsilon);
    let top = lambda.powf(a * (1.0 + eps));
    let e1 = xi * lambda * (x + a * family.velocity_scale() * t);
    let e2 = 0.5 * a * (a - 1.0) * t * top * lambda.powf(-2.0 * eps) * xi * xi;
    let e3_bound = t * top * lambda.powf(-3.0 * eps) * third_derivative_factor(family) * xi.abs().powi(3);
    let total_phase_residual = (t * top * binomial_tail(a, xi * lambda.powf(-eps))).abs();
    PhaseErrorBreakdown { e1, e2, e3_bound, total_phase_residual }
}

/// Worst `max_{|ξ|≤1} |E₁| + |E₂| + e₃` over `x ∈ I_{λ,ε}` at `t = t_{n(x)}`.
fn worst_phase(family: &FamilySpec, c0: f64) -> Result<f64> {
    let spec = CounterexampleSpec::new(*family, c0)?;
    let interval = spec.interval();
    let n_lo = index_for(interval.lo, family)?;
    let n_hi = index_for(interval.hi, family)?;
    if n_hi - n_lo > 50_000_000 {
        return Err(Error::Range(format!("{} time cells in I_{{λ,ε}}", n_hi - n_lo)));
    }
    let seq = TimeSequence { gamma: family.gamma };
    let mut worst = 0.0f64;
    for n in n_lo..=n_hi {
        // E₁ grows with x inside a cell, so the right end of the cell (clipped to I) is worst.
        let x_right = (-cell_boundary(family, n + 1)).min(interval.hi);
        let p = phase_terms(family, 1.0, x_right, seq.t(n));
        worst = worst.max(p.e1.abs() + p.e2.abs() + p.e3_bound);
    }
    Ok(worst)
}

/// Largest `c₀` in `[2^{-20}, 2^4]` for which the phase budget holds on all
/// of `I_{λ,ε}`: octave steps down from `2^4` to the first admissible value,
/// then bisection in `log₂ c₀`.
pub fn calibrate_c0(family: &FamilySpec, phase_budget: f64) -> Result<f64> {
    if !(phase_budget > 0.0 && phase_budget <= FRAC_PI_3 * (1.0 + 1e-12)) {
        return domain(format!("phase budget {phase_budget} must lie in (0, π/3]"));
    }
    let fits = |log_c0: f64| -> Result<bool> {
        match worst_phase(family, log_c0.exp2()) {
            Ok(w) => Ok(w <= phase_budget),
            Err(Error::Domain(_)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let fail = || {
        Error::Calibration(format!("no c₀ ≥ 2^-20 keeps the phase error below {phase_budget}"))
    };
    let mut hi = 4.0f64;
    if fits(hi)? {
        return Ok(hi.exp2());
    }
    // Small c₀ means many time cells, so walk down rather than starting at 2^-20.
    let mut lo = hi - 1.0;
    loop {
        match fits(lo) {
            Ok(true) => break,
            Ok(false) if lo > -20.0 => {
                hi = lo;
                lo -= 1.0;
            }
            Ok(false) | Err(Error::Range(_)) => return Err(fail()),
            Err(e) => return Err(e),
        }
    }
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if fits(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp2())
}

/// Grid exactly spanning the family's support, fine enough for evaluation at
/// `|x| ≤ x_max`, `t ≤ t_max`, with at least `2^12` nodes.
pub fn family_grid(family: &FamilySpec, x_max: f64, t_max: f64) -> Result<FrequencyGrid> {
    let s = family.support();
    let speed = family.a * s.hi.powf(family.a - 1.0).max(s.lo.powf(family.a - 1.0));
    let spacing = (FRAC_PI_4 / (x_max + t_max * speed)).min(s.width() / 4096.0);
    FrequencyGrid::with_max_spacing(s.lo, s.hi, spacing)
}

/// `f̂(ξ) = amplitude · φ((ξ - center)/width)` on `grid`.
pub fn bump_profile(grid: FrequencyGrid, center: f64, width: f64, amplitude: f64) -> Result<SpectralProfile> {
    let support = Interval::new(center - width, center + width);
    if !grid.covers(support.lo, support.hi) {
        return domain(format!(
            "grid [{}, {}] does not cover [{}, {}]",
            grid.xi_min(),
            grid.xi_max(),
            support.lo,
            support.hi
        ));
    }
    let inside = grid.nodes().filter(|xi| support.contains(*xi)).count();
    if inside < 1024 {
        return domain(format!("only {inside} grid points across the support; need 2^10"));
    }
    // A grid spanning exactly the support maps onto a uniform grid of
    // [-1, 1]; there the bump is calibrated to unit mass on its own nodes.
    let h = grid.spacing();
    let spans = (grid.xi_min() - support.lo).abs() <= 1e-9 * h
        && (grid.xi_max() - support.hi).abs() <= 1e-9 * h;
    if spans {
        let unit = FrequencyGrid::new(-1.0, 1.0, grid.count())?;
        let phi = make_bump(BumpSpec::default(), unit)?;
        let values: Vec<f64> = phi.values().iter().map(|v| v.re).collect();
        let profile = SpectralProfile::from_fn(grid, Some(support), |xi| {
            let j = ((xi - grid.xi_min()) / h).round() as usize;
            Complex64::new(amplitude * values[j.min(values.len() - 1)], 0.0)
        })?;
        return Ok(profile);
    }
    let phi = Bump::default();
    SpectralProfile::from_fn(grid, Some(support), |xi| {
        Complex64::new(amplitude * phi.eval((xi - center) / width), 0.0)
    })
}

pub fn build_fractional_family(family: &FamilySpec, grid: FrequencyGrid) -> Result<SpectralProfile> {
    bump_profile(grid, family.center(), family.lambda, 1.0 / family.lambda)
}

/// Sobolev norms reported with a lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorms {
    pub s: Vec<f64>,
    pub norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub c0: f64,
    pub x_count: usize,
    pub threshold: f64,
    pub fraction_passing: f64,
    pub min_abs_s: f64,
    pub sup_abs_r: f64,
    pub max_abs_f: f64,
    /// Fitted bracket `c ≤ t_{n(x)} Λ / |x| ≤ C` over the sampled points.
    pub bracket_c: f64,
    pub bracket_upper: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub sobolev: SobolevNorms,
}

/// Evaluates `|S^a f(x, t_{n(x)})|` on `x_count` points of `I_{λ,ε}` and
/// compares with `1/(4π)`; also reports `sup |R_δ^a f|` there and `|f|`.
pub fn verify_lower_bound(spec: &CounterexampleSpec, delta: f64, x_count: usize) -> Result<LowerBoundReport> {
    if x_count < 2 {
        return domain("need at least two sample points");
    }
    let family = &spec.family;
    let params = EvolutionParams::new(family.a, delta)?;
    let interval = spec.interval();
    let xs = uniform_grid(interval.lo, interval.hi, x_count);
    let seq = TimeSequence { gamma: family.gamma };
    let mut pairs = Vec::with_capacity(x_count);
    for &x in &xs {
        pairs.push((x, seq.t(select_time_index(x, spec)?)));
    }
    let t_max = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let t_min = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let grid = family_grid(family, interval.lo.abs(), t_max)?;
    let f = build_fractional_family(family, grid)?;

    let s_vals = propagator::evaluate_at(&f, params, false, &pairs)?;
    let r_vals = propagator::evaluate_at(&f, params, true, &pairs)?;
    let f_pairs: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.0)).collect();
    let f_vals = propagator::evaluate_at(&f, params, false, &f_pairs)?;

    let threshold = 1.0 / (4.0 * PI);
    let passing = s_vals.iter().filter(|v| v.norm() >= threshold).count();
    let lam = family.velocity_scale();
    let ratios: Vec<f64> = pairs.iter().map(|&(x, t)| t * lam / x.abs()).collect();
    let s = vec![0.0, 0.25, 0.5, 1.0];
    let norm = s.iter().map(|&si| sobolev_norm(&f, si)).collect();
    Ok(LowerBoundReport {
        c0: spec.c0,
        x_count,
        threshold,
        fraction_passing: passing as f64 / x_count as f64,
        min_abs_s: s_vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min),
        sup_abs_r: r_vals.iter().map(|v| v.norm()).fold(0.0, f64::max),
        max_abs_f: f_vals.iter().map(|v| v.norm()).fold(0.0, f64::max),
        bracket_c: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        bracket_upper: ratios.iter().cloned().fold(0.0, f64::max),
        t_min,
        t_max,
        sobolev: SobolevNorms { s, norm },
    })
}

/// Radial wave family `ĝ(r) = λ^{-(n+1)/2} φ((r - λ^{1+ε})/λ)` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSpec {
    lambda: f64,
    epsilon: f64,
    n_dim: usize,
    /// Exponent of the wave time sequence `t_n = n^{-gamma}`.
    gamma: f64,
}

/// Default exponent of the wave time sequence; with `t_n = 1/n` the gaps
/// satisfy `t_n - t_{n+1} ≤ 2 t_{n+1}²`.
pub const WAVE_GAMMA: f64 = 1.0;

impl RadialSpec {
    pub fn new(lambda: f64, epsilon: f64, n_dim: usize) -> Result<Self> {
        Self::with_gamma(lambda, epsilon, n_dim, WAVE_GAMMA)
    }

    pub fn with_gamma(lambda: f64, epsilon: f64, n_dim: usize, gamma: f64) -> Result<Self> {
        if n_dim != 1 && n_dim != 3 {
            return Err(Error::UnsupportedDimension(n_dim));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return domain(format!("ε = {epsilon} must lie in (0, 1/2)"));
        }
        if !(lambda >= 64.0 && lambda.is_finite()) {
            return domain(format!("λ = {lambda} must be at least 2^6"));
        }
        TimeSequence::new(gamma)?;
        Ok(Self { lambda, epsilon, n_dim, gamma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn center(&self) -> f64 {
        self.lambda.powf(1.0 + self.epsilon)
    }

    /// `R = λ^{-1+ε}`; the annulus is `A(R) = [R/2, 2R]`.
    pub fn annulus_radius(&self) -> f64 {
        self.lambda.powf(self.epsilon - 1.0)
    }

    pub fn support(&self) -> Interval {
        Interval::new(self.center() - self.lambda, self.center() + self.lambda)
    }
}

pub fn build_radial_family(spec: &RadialSpec, grid: FrequencyGrid) -> Result<SpectralProfile> {
    let amplitude = spec.lambda.powf(-((spec.n_dim + 1) as f64) / 2.0);
    bump_profile(grid, spec.center(), spec.lambda, amplitude)
}

/// `‖g‖_{H^s(ℝ^n)}` of a radial profile, with the measure `|S^{n-1}| r^{n-1} dr`.
pub fn radial_sobolev_norm(g: &SpectralProfile, n_dim: usize, s: f64) -> Result<f64> {
    let sphere = match n_dim {
        1 => 2.0,
        3 => 4.0 * PI,
        other => return Err(Error::UnsupportedDimension(other)),
    };
    let energy = g.weighted_energy(|r| (1.0 + r * r).powf(s) * r.abs().powi(n_dim as i32 - 1));
    Ok((sphere * energy / (2.0 * PI).powi(n_dim as i32)).sqrt())
}

/// The unique `n` with `r ∈ (t_{n+1}, t_n]` for the wave sequence.
pub fn select_radial_time_index(r: f64, gamma: f64) -> Result<u64> {
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    if r > 1.0 {
        return domain(format!("radius {r} exceeds 1"));
    }
    let seq = TimeSequence::new(gamma)?;
    if r == 1.0 {
        return Ok(1);
    }
    // Largest n with t_n ≥ r: one past the largest with t_n > r, unless t_n = r.
    let mut n = seq.last_above(r)?;
    if seq.t(n + 1) >= r {
        n += 1;
    }
    while seq.t(n) < r {
        n -= 1;
    }
    while seq.t(n + 1) >= r {
        n += 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    pub lambda: f64,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub abs_s: Vec<f64>,
    pub abs_r: Vec<f64>,
    pub abs_g: Vec<f64>,
    /// Fit of `|S g(r, t_{n(r)})|` against `r`.
    pub r_fit: ScalingFit,
    /// `sup_r |R_δ g| r^{(n-1)/2 + δ}`.
    pub normalized_peak: f64,
    /// `min_r |R_δ g| r^{(n-1)/2 + δ} / λ^{ε(n-1)/2}`: the constant of the lower bound.
    pub lower_constant: f64,
    /// Geometric mean of `|R_δ g| r^{(n-1)/2 + δ}` over the annulus.
    pub typical_level: f64,
    /// `max_r |g(r)| / (λ^{ε(n-1)/2} r^{-(n-1)/2})`.
    pub smallness: f64,
}

/// Samples the annulus `A(λ^{-1+ε})` geometrically at `r_count` radii.
pub fn verify_wave_lower_bound(spec: &RadialSpec, delta: f64, r_count: usize) -> Result<WaveReport> {
    if !(0.0..1.0).contains(&delta) {
        return domain("δ must lie in [0, 1)");
    }
    if r_count < 2 {
        return domain("need at least two radii");
    }
    let big_r = spec.annulus_radius();
    let (lo, hi) = (0.5 * big_r, (2.0 * big_r).min(1.0));
    let r: Vec<f64> = (0..r_count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (r_count - 1) as f64))
        .collect();
    let seq = TimeSequence::new(spec.gamma)?;
    let mut t = Vec::with_capacity(r_count);
    for &ri in &r {
        t.push(seq.t(select_radial_time_index(ri, spec.gamma)?));
    }
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let s = spec.support();
    let spacing = (FRAC_PI_4 / (hi + t_max)).min(s.width() / 4096.0);
    let grid = FrequencyGrid::with_max_spacing(s.lo, s.hi, spacing)?;
    let g = build_radial_family(spec, grid)?;

    let at_t: Vec<(f64, f64)> = r.iter().cloned().zip(t.iter().cloned()).collect();
    let at_zero: Vec<(f64, f64)> = r.iter().map(|&ri| (ri, 0.0)).collect();
    let abs_s: Vec<f64> = propagator::radial_at(&g, spec.n_dim, None, &at_t)?
        .iter()
        .map(|v| v.norm())
        .collect();
    let abs_r: Vec<f64> = propagator::radial_at(&g, spec.n_dim, Some(delta), &at_t)?
        .iter()
        .map(|v| v.norm())
        .collect();
    let abs_g: Vec<f64> = propagator::radial_at(&g, spec.n_dim, None, &at_zero)?
        .iter()
        .map(|v| v.norm())
        .collect();

    let half = (spec.n_dim as f64 - 1.0) / 2.0;
    let scale = spec.lambda.powf(spec.epsilon * half);
    let samples: Vec<ScalingSample> = r
        .iter()
        .zip(&abs_s)
        .map(|(&ri, &v)| ScalingSample::new(ri, v))
        .collect::<Result<_>>()?;
    let r_fit = fit_loglog_slope(&samples)?;
    let weighted: Vec<f64> = r.iter().zip(&abs_r).map(|(&ri, &v)| v * ri.powf(half + delta)).collect();
    let normalized_peak = weighted.iter().cloned().fold(0.0, f64::max);
    let lower_constant = weighted.iter().cloned().fold(f64::INFINITY, f64::min) / scale;
    let typical_level = (weighted.iter().map(|v| v.ln()).sum::<f64>() / weighted.len() as f64).exp();
    let smallness = r
        .iter()
        .zip(&abs_g)
        .map(|(&ri, &v)| v / (scale * ri.powf(-half)))
        .fold(0.0, f64::max);
    Ok(WaveReport {
        lambda: spec.lambda,
        r,
        t,
        abs_s,
        abs_r,
        abs_g,
        r_fit,
        normalized_peak,
        lower_constant,
        typical_level,
        smallness,
    })
}

/// `s*` for the given `(a, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedExponent {
    /// Threshold `s*`.
    pub threshold: f64,
    /// Whether `s = s*` itself is sufficient.
    pub endpoint_sufficient: bool,
    /// Whether `s = s*` itself is allowed by the necessary condition.
    pub endpoint_necessary: bool,
}

impl PredictedExponent {
    pub fn sufficient_s(&self) -> f64 {
        self.threshold
    }

    pub fn necessary_s(&self) -> f64 {
        self.threshold
    }
}

pub fn predicted_exponent(a: f64, delta: f64) -> Result<PredictedExponent> {
    if !(a > 0.0 && a.is_finite()) {
        return domain(format!("a = {a} must be positive"));
    }
    if !(0.0..1.0).contains(&delta) {
        return domain(format!("δ = {delta} must lie in [0, 1)"));
    }
    Ok(if a > 1.0 {
        PredictedExponent {
            threshold: (a - 1.0) * delta + delta.max(0.25),
            endpoint_sufficient: false,
            endpoint_necessary: true,
        }
    } else if a < 1.0 {
        PredictedExponent {
            threshold: a * delta.max(0.25),
            endpoint_sufficient: false,
            endpoint_necessary: true,
        }
    } else {
        // s > 1/2 and s ≥ δ: the endpoint is admissible only when δ > 1/2.
        PredictedExponent {
            threshold: delta.max(0.5),
            endpoint_sufficient: delta > 0.5,
            endpoint_necessary: delta > 0.5,
        }
    })
}

/// Supremum of the admissible ε-range: 1 for `a > 1`; `a/(2-a)` for `a < 1`
/// (the `γ → 0` limit of `ε < a/(γ + 2 - a)`).
pub fn epsilon_range(a: f64) -> Result<(f64, bool)> {
    if !(a > 0.0) || a == 1.0 {
        return domain("the ε-family is defined for a > 0, a ≠ 1");
    }
    Ok(if a > 1.0 { (1.0, true) } else { (a / (2.0 - a), false) })
}

/// Lower bound on `s` forced by the family at this ε:
/// `([a(1+ε) - 2ε]δ + ε/2)/(1+ε)`.
pub fn sharpness_bound(a: f64, delta: f64, epsilon: f64) -> f64 {
    ((a * (1.0 + epsilon) - 2.0 * epsilon) * delta + 0.5 * epsilon) / (1.0 + epsilon)
}

/// `[a(1+ε) - 2ε]δ ≤ (1+ε)s - ε/2`.
pub fn sharpness_relation(a: f64, delta: f64, s: f64, epsilon: f64) -> Result<bool> {
    let (top, closed) = epsilon_range(a)?;
    let inside = epsilon > 0.0 && if closed { epsilon <= top } else { epsilon < top };
    if !inside {
        return domain(format!("ε = {epsilon} is outside the admissible range for a = {a}"));
    }
    Ok((a * (1.0 + epsilon) - 2.0 * epsilon) * delta <= (1.0 + epsilon) * s - 0.5 * epsilon)
}

/// Supremum over the admissible ε-range of [`sharpness_bound`]. The bound is
/// a Möbius function of ε, hence monotone, so the supremum is at an end.
pub fn sharpest_bound(a: f64, delta: f64) -> Result<f64> {
    let (top, _) = epsilon_range(a)?;
    Ok(sharpness_bound(a, delta, 0.0).max(sharpness_bound(a, delta, top)))
}

/// Fit of the typical level of `|R_δ g| r^{(n-1)/2+δ}` against λ. The
/// geometric mean is used because at the inner radius `g` itself is only a
/// few wavelengths away and can dominate the supremum at moderate λ.
pub fn wave_lambda_fit(reports: &[WaveReport]) -> Result<ScalingFit> {
    let samples: Vec<ScalingSample> = reports
        .iter()
        .map(|r| ScalingSample::new(r.lambda, r.typical_level))
        .collect::<Result<_>>()?;
    fit_loglog_slope(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn family(a: f64, lambda: f64, eps: f64) -> FamilySpec {
        FamilySpec::new(a, lambda, eps, None).unwrap()
    }

    /// Linear scan for every `n` whose cell holds `x`.
    fn cells_containing(x: f64, f: &FamilySpec) -> Vec<u64> {
        let mut hits = Vec::new();
        let mut n = 1;
        while -cell_boundary(f, n) < x {
            if -cell_boundary(f, n) < x && x <= -cell_boundary(f, n + 1) {
                hits.push(n);
            }
            n += 1;
        }
        hits
    }

    #[test]
    fn time_index_is_unique_and_matches_scan() {
        let f = family(2.0, 256.0, 1.0);
        let spec = f.with_c0(0.5).unwrap();
        let i = spec.interval();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..400 {
            let x = rng.random_range(i.lo..=i.hi);
            let hits = cells_containing(x, &f);
            assert_eq!(hits.len(), 1, "x = {x}");
            assert_eq!(select_time_index(x, &spec).unwrap(), hits[0]);
        }
    }

    #[test]
    fn right_cell_boundary_belongs_to_the_cell() {
        let f = family(2.0, 128.0, 1.0);
        let spec = f.with_c0(1.0).unwrap();
        let i = spec.interval();
        let n = select_time_index(0.5 * (i.lo + i.hi), &spec).unwrap();
        let x = -cell_boundary(&f, n + 1);
        assert_eq!(select_time_index(x, &spec).unwrap(), n);
        assert!(select_time_index(i.hi + 1e-9, &spec).is_err());
    }

    #[test]
    fn family_validation() {
        assert!(FamilySpec::new(1.0, 128.0, 0.5, None).is_err());
        assert!(FamilySpec::new(2.0, 16.0, 0.5, None).is_err());
        assert!(FamilySpec::new(2.0, 128.0, 1.5, None).is_err());
        assert!(FamilySpec::new(2.0, 128.0, 0.5, Some(1.0)).is_err());
        assert!(FamilySpec::new(0.5, 128.0, 0.2, None).is_err());
        // ε(γ + 2 - a) < a: 0.2 · 2.5 = 0.5 is not below 0.5.
        assert!(FamilySpec::new(0.5, 128.0, 0.2, Some(1.0)).is_err());
        assert!(FamilySpec::new(0.5, 128.0, 0.2, Some(0.9)).is_ok());
        assert!(time_sequence(2.0, 0).is_err());
        assert_eq!(time_sequence(2.0, 4).unwrap(), 1.0 / 16.0);
    }

    #[test]
    fn quadratic_dispersion_has_no_remainder() {
        let spec = family(2.0, 512.0, 1.0).with_c0(0.3).unwrap();
        for xi in [-1.0, -0.3, 0.7, 1.0] {
            let p = phase_error_terms(xi, -1e-3, 1e-4, &spec).unwrap();
            assert_eq!(p.total_phase_residual, 0.0);
            assert_eq!(p.e3_bound, 0.0);
        }
    }

    #[test]
    fn remainder_matches_direct_phase_and_its_bound() {
        for (a, eps) in [(1.5, 1.0), (3.0, 0.5), (0.5, 0.2)] {
            let gamma = if a < 1.0 { Some(0.5) } else { None };
            let f = FamilySpec::new(a, 64.0, eps, gamma).unwrap();
            let spec = f.with_c0(0.25).unwrap();
            let (lam, c) = (f.lambda(), f.center());
            for &xi in &[-1.0, -0.6, -0.1, 0.2, 0.9, 1.0] {
                let t = 1e-3;
                // Direct subtraction of the Taylor polynomial of t|c + λξ|^a.
                let eta = lam * xi;
                let direct = t
                    * ((c + eta).powf(a)
                        - c.powf(a)
                        - a * c.powf(a - 1.0) * eta
                        - 0.5 * a * (a - 1.0) * c.powf(a - 2.0) * eta * eta);
                let p = phase_error_terms(xi, -0.01, t, &spec).unwrap();
                let scale = t * c.powf(a);
                assert!((p.total_phase_residual - direct.abs()).abs() <= 1e-12 * scale, "a {a} ξ {xi}");
                assert!(p.total_phase_residual <= p.e3_bound * (1.0 + 1e-12));
                let e2 = 0.5 * a * (a - 1.0) * c.powf(a - 2.0) * eta * eta * t;
                assert!((p.e2 - e2).abs() <= 1e-12 * e2.abs().max(1e-300));
            }
        }
        let spec = family(2.0, 64.0, 1.0).with_c0(1.0).unwrap();
        assert!(phase_error_terms(1.5, -0.1, 0.1, &spec).is_err());
    }

    #[test]
    fn calibrated_constant_keeps_the_budget() {
        let f = family(2.0, 256.0, 1.0);
        let budgets = [PI / 12.0, PI / 6.0, PI / 3.0];
        let c0: Vec<f64> = budgets.iter().map(|&b| calibrate_c0(&f, b).unwrap()).collect();
        assert!(c0[0] <= c0[1] && c0[1] <= c0[2]);
        let spec = f.with_c0(c0[1]).unwrap();
        let seq = TimeSequence::new(f.gamma()).unwrap();
        for x in uniform_grid(spec.interval().lo, spec.interval().hi, 2001) {
            let t = seq.t(select_time_index(x, &spec).unwrap());
            for xi in [-1.0, 1.0] {
                let p = phase_error_terms(xi, x, t, &spec).unwrap();
                assert!(p.e1.abs() + p.e2.abs() + p.e3_bound <= PI / 6.0 + 1e-12);
            }
        }
        assert!(calibrate_c0(&f, 4.0).is_err());
        assert!(matches!(calibrate_c0(&f, 1e-9), Err(Error::Calibration(_))));
    }

    #[test]
    fn gap_exponent_matches_a_fitted_slope() {
        for gamma in [0.5, 1.0, 2.0] {
            let seq = TimeSequence::new(gamma).unwrap();
            let samples: Vec<ScalingSample> = [1_000u64, 4_000, 16_000, 64_000]
                .iter()
                .map(|&n| ScalingSample::new(seq.t(n), seq.t(n) - seq.t(n + 1)).unwrap())
                .collect();
            let fit = fit_loglog_slope(&samples).unwrap();
            assert!((fit.slope - seq.gap_exponent()).abs() < 1e-3, "γ {gamma}: {}", fit.slope);
            // (t_n - t_{n+1}) / t_n^β → γ from below.
            assert!(seq.gap_constant(1000) <= gamma * (1.0 + 1e-9));
        }
    }

    #[test]
    fn lower_bound_holds_on_the_interval() {
        let f = family(2.0, 128.0, 1.0);
        let c0 = calibrate_c0(&f, PI / 6.0).unwrap();
        let r = verify_lower_bound(&f.with_c0(c0).unwrap(), 0.25, 64).unwrap();
        assert_eq!(r.fraction_passing, 1.0);
        assert!(r.min_abs_s >= r.threshold);
        assert!(r.bracket_c > 0.0 && r.bracket_c <= r.bracket_upper);
        assert!(r.max_abs_f < r.threshold);
    }

    #[test]
    fn family_sobolev_norms_scale() {
        let eps = 0.5;
        for s in [0.0, 0.5, 1.0] {
            let samples: Vec<ScalingSample> = [256.0, 512.0, 1024.0, 2048.0]
                .iter()
                .map(|&lam| {
                    let f = family(2.0, lam, eps);
                    let sup = f.support();
                    let grid = FrequencyGrid::new(sup.lo, sup.hi, 4097).unwrap();
                    let g = build_fractional_family(&f, grid).unwrap();
                    ScalingSample::new(lam, sobolev_norm(&g, s)).unwrap()
                })
                .collect();
            let fit = fit_loglog_slope(&samples).unwrap();
            let expected = (1.0 + eps) * s - 0.5;
            assert!((fit.slope - expected).abs() < 0.01, "s {s}: {}", fit.slope);
        }
    }

    #[test]
    fn radial_time_index_brackets_the_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for gamma in [1.0, 2.0] {
            let seq = TimeSequence::new(gamma).unwrap();
            for _ in 0..300 {
                let r: f64 = rng.random_range(1e-4..1.0);
                let n = select_radial_time_index(r, gamma).unwrap();
                assert!(seq.t(n + 1) < r && r <= seq.t(n), "r {r} n {n}");
            }
            assert_eq!(select_radial_time_index(1.0, gamma).unwrap(), 1);
            assert_eq!(select_radial_time_index(0.5f64.powf(gamma), gamma).unwrap(), 2);
        }
        assert!(select_radial_time_index(0.0, 1.0).is_err());
        assert!(select_radial_time_index(1.5, 1.0).is_err());
    }

    #[test]
    fn radial_spec_validation() {
        assert!(matches!(RadialSpec::new(256.0, 0.25, 2), Err(Error::UnsupportedDimension(2))));
        assert!(RadialSpec::new(256.0, 0.5, 3).is_err());
        let s = RadialSpec::new(256.0, 0.25, 3).unwrap();
        assert!((s.annulus_radius() - 256f64.powf(-0.75)).abs() < 1e-15);
    }

    #[test]
    fn exponent_spot_values() {
        let cases = [(2.0, 0.25, 0.5), (2.0, 0.0, 0.25), (0.5, 0.75, 0.375), (1.0, 0.25, 0.5)];
        for (a, d, s) in cases {
            assert!((predicted_exponent(a, d).unwrap().threshold - s).abs() < 1e-15);
        }
        let wave = predicted_exponent(1.0, 0.75).unwrap();
        assert!(wave.endpoint_sufficient && wave.threshold == 0.75);
        assert!(!predicted_exponent(1.0, 0.25).unwrap().endpoint_sufficient);
        assert!(predicted_exponent(2.0, 1.0).is_err());
    }

    #[test]
    fn sharpest_bound_reproduces_the_threshold() {
        for a in [0.25, 0.5, 0.75, 1.5, 2.0, 3.0] {
            for d in [0.0, 0.1, 0.25, 0.5, 0.9] {
                let s = predicted_exponent(a, d).unwrap().threshold;
                assert!((sharpest_bound(a, d).unwrap() - s).abs() < 1e-12, "a {a} δ {d}");
            }
        }
    }

    #[test]
    fn sharpness_relation_range() {
        assert!(sharpness_relation(2.0, 0.25, 0.5, 1.0).unwrap());
        assert!(!sharpness_relation(2.0, 0.25, 0.49, 1.0).unwrap());
        assert!(sharpness_relation(2.0, 0.25, 0.5, 1.5).is_err());
        assert!(sharpness_relation(0.5, 0.0, 0.2, 1.0 / 3.0).is_err());
        assert!(sharpness_relation(0.5, 0.0, 0.2, 0.3).unwrap());
    }
}
