//! Evaluation of `S^a f(x,t)` and the rate quotient `R_δ^a f(x,t)` by
//! resolved trapezoid quadrature, plus the radial wave propagator in
//! dimensions 1 and 3.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::oscillatory::{self, Kernel, Multiplier, Nodes};
use crate::spectral::SpectralProfile;

/// Dispersion exponent `a > 0` and rate exponent `0 ≤ δ < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    a: f64,
    delta: f64,
}

impl EvolutionParams {
    pub fn new(a: f64, delta: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return domain(format!("dispersion exponent a = {a} must be positive"));
        }
        if !(0.0..1.0).contains(&delta) {
            return domain(format!("rate exponent δ = {delta} must lie in [0, 1)"));
        }
        Ok(Self { a, delta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Field values on a spatial grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub x_grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl FieldSample {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

/// Largest frequency spacing for which the phase `xξ + t|ξ|^a` moves by at
/// most π/4 per step over the support of `f`.
pub fn max_freq_spacing(f: &SpectralProfile, a: f64, t_max: f64, x_max: f64) -> Result<f64> {
    if !(t_max >= 0.0 && x_max >= 0.0) {
        return domain("t_max and x_max must be nonnegative");
    }
    if !(a > 0.0) {
        return domain("dispersion exponent must be positive");
    }
    let Some((lo, hi)) = f.abs_frequency_range() else {
        return Ok(if x_max > 0.0 { FRAC_PI_4 / x_max } else { f64::INFINITY });
    };
    let speed = if t_max == 0.0 {
        0.0
    } else if a >= 1.0 {
        a * hi.powf(a - 1.0)
    } else {
        if lo <= 0.0 {
            return domain("support touches ξ = 0: the phase derivative is unbounded for a < 1");
        }
        a * lo.powf(a - 1.0)
    };
    let rate = x_max + t_max * speed;
    Ok(if rate > 0.0 { FRAC_PI_4 / rate } else { f64::INFINITY })
}

/// Smallest grid count over the profile's grid range meeting [`max_freq_spacing`].
pub fn required_freq_samples(f: &SpectralProfile, a: f64, t_max: f64, x_max: f64) -> Result<usize> {
    let h = max_freq_spacing(f, a, t_max, x_max)?;
    let width = f.grid().xi_max() - f.grid().xi_min();
    Ok(((width / h).ceil() as usize).max(1) + 1)
}

pub fn check_resolution(f: &SpectralProfile, a: f64, t_max: f64, x_max: f64) -> Result<()> {
    let allowed = max_freq_spacing(f, a, t_max, x_max)?;
    let spacing = f.grid().spacing();
    // Tolerate rounding in grids built from the same bound.
    if spacing > allowed * (1.0 + 1e-12) {
        return Err(Error::Resolution { spacing, allowed });
    }
    Ok(())
}

/// Decimation factor that still meets the contract for this `(t, x)` range.
pub(crate) fn admissible_stride(f: &SpectralProfile, a: f64, t_max: f64, x_max: f64) -> Result<usize> {
    check_resolution(f, a, t_max, x_max)?;
    let allowed = max_freq_spacing(f, a, t_max, x_max)?;
    let mut ratio = allowed / f.grid().spacing();
    // The coarse rule must still resolve f̂ itself: keep 64 nodes across its support.
    if let Some(s) = f.effective_support() {
        ratio = ratio.min(s.width() / (64.0 * f.grid().spacing()));
    }
    Ok(if ratio.is_finite() { (ratio.floor() as usize).max(1) } else { 1 })
}

fn x_extent(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn evaluate_line(
    f: &SpectralProfile,
    a: f64,
    t: f64,
    x_grid: &[f64],
    mult: Multiplier,
) -> Result<FieldSample> {
    if x_grid.iter().any(|x| !x.is_finite()) {
        return domain("x grid has non-finite entries");
    }
    check_resolution(f, a, t, x_extent(x_grid))?;
    let nodes = Nodes::from_profile(f, 1);
    let pairs: Vec<(f64, f64)> = x_grid.iter().map(|&x| (x, t)).collect();
    let values = oscillatory::eval_pairs(&nodes, a, Kernel::Line, mult, &pairs);
    Ok(FieldSample { x_grid: x_grid.to_vec(), values, t })
}

/// `S^a f(·, t)` on `x_grid`.
pub fn evolve(f: &SpectralProfile, a: f64, t: f64, x_grid: &[f64]) -> Result<FieldSample> {
    if !(a > 0.0) {
        return domain(format!("dispersion exponent a = {a} must be positive"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time t = {t} must be nonnegative"));
    }
    evaluate_line(f, a, t, x_grid, Multiplier::Evolve)
}

/// `R_δ^a f(·, t) = (S^a f − f)/t^δ` on `x_grid`.
pub fn ratio_field(
    f: &SpectralProfile,
    params: EvolutionParams,
    t: f64,
    x_grid: &[f64],
) -> Result<FieldSample> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("the quotient needs t > 0, got {t}"));
    }
    evaluate_line(f, params.a, t, x_grid, Multiplier::Ratio { delta: params.delta })
}

/// `S^a f` or `R_δ^a f` at individual `(x, t)` pairs.
pub fn evaluate_at(
    f: &SpectralProfile,
    params: EvolutionParams,
    quotient: bool,
    pairs: &[(f64, f64)],
) -> Result<Vec<Complex64>> {
    let x_max = pairs.iter().fold(0.0f64, |m, p| m.max(p.0.abs()));
    let t_max = pairs.iter().fold(0.0f64, |m, p| m.max(p.1));
    if pairs.iter().any(|p| !(p.1 >= 0.0) || (quotient && p.1 == 0.0)) {
        return domain("times must be positive (nonnegative for the propagator)");
    }
    check_resolution(f, params.a, t_max, x_max)?;
    let mult = if quotient {
        Multiplier::Ratio { delta: params.delta }
    } else {
        Multiplier::Evolve
    };
    let nodes = Nodes::from_profile(f, 1);
    Ok(oscillatory::eval_pairs(&nodes, params.a, Kernel::Line, mult, pairs))
}

fn radial_kernel(n_dim: usize) -> Result<Kernel> {
    match n_dim {
        1 => Ok(Kernel::Radial1),
        3 => Ok(Kernel::Radial3),
        other => Err(Error::UnsupportedDimension(other)),
    }
}

fn check_radial(g: &SpectralProfile, t_max: f64, r_grid: &[f64]) -> Result<()> {
    if g.abs_frequency_range().is_some() && g.effective_support().is_some_and(|s| s.lo < 0.0) {
        return domain("radial profiles live on r > 0");
    }
    if r_grid.iter().any(|r| !(*r >= 0.0)) {
        return domain("radial evaluation points must be nonnegative");
    }
    check_resolution(g, 1.0, t_max, x_extent(r_grid))
}

/// Radial wave propagator `e^{it|D|}` of a radial profile `ĝ(r)` at `|x| = r`.
pub fn evolve_radial(
    g: &SpectralProfile,
    n_dim: usize,
    t: f64,
    r_grid: &[f64],
) -> Result<FieldSample> {
    let kernel = radial_kernel(n_dim)?;
    if !(t >= 0.0) {
        return domain("time must be nonnegative");
    }
    check_radial(g, t, r_grid)?;
    let nodes = Nodes::from_profile(g, 1);
    let pairs: Vec<(f64, f64)> = r_grid.iter().map(|&r| (r, t)).collect();
    let values = oscillatory::eval_pairs(&nodes, 1.0, kernel, Multiplier::Evolve, &pairs);
    Ok(FieldSample { x_grid: r_grid.to_vec(), values, t })
}

/// Radial evaluation at `(r, t)` pairs; `delta = Some(δ)` gives the quotient.
pub fn radial_at(
    g: &SpectralProfile,
    n_dim: usize,
    delta: Option<f64>,
    pairs: &[(f64, f64)],
) -> Result<Vec<Complex64>> {
    let kernel = radial_kernel(n_dim)?;
    let t_max = pairs.iter().fold(0.0f64, |m, p| m.max(p.1));
    let r: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    if pairs.iter().any(|p| !(p.1 >= 0.0) || (delta.is_some() && p.1 == 0.0)) {
        return domain("times must be positive (nonnegative for the propagator)");
    }
    check_radial(g, t_max, &r)?;
    let mult = match delta {
        Some(d) => Multiplier::Ratio { delta: d },
        None => Multiplier::Evolve,
    };
    let nodes = Nodes::from_profile(g, 1);
    Ok(oscillatory::eval_pairs(&nodes, 1.0, kernel, mult, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{
        l2_on_grid, random_band_profile_on, synthesize, uniform_grid, Bump, FrequencyGrid,
        Interval,
    };
    use std::f64::consts::PI;

    /// Bump of mass 2π and half-width `w` centred at `xi0`.
    fn narrow_tone(xi0: f64, w: f64, count: usize) -> SpectralProfile {
        let b = Bump::default();
        let grid = FrequencyGrid::new(xi0 - w, xi0 + w, count).unwrap();
        SpectralProfile::from_fn(grid, Some(Interval::new(xi0 - w, xi0 + w)), |xi| {
            Complex64::new(2.0 * PI / w * b.eval((xi - xi0) / w), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn params_validate_ranges() {
        assert!(EvolutionParams::new(0.0, 0.2).is_err());
        assert!(EvolutionParams::new(2.0, 1.0).is_err());
        assert!(EvolutionParams::new(2.0, -0.1).is_err());
        assert!(EvolutionParams::new(0.5, 0.0).is_ok());
    }

    #[test]
    fn resolution_at_t_zero_is_pi_over_four() {
        let grid = FrequencyGrid::new(-1.0, 1.0, 101).unwrap();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(-1.0, 1.0)), |_| {
            Complex64::new(1.0, 0.0)
        })
        .unwrap();
        assert_eq!(max_freq_spacing(&f, 2.0, 0.0, 1.0).unwrap(), FRAC_PI_4);
        assert_eq!(required_freq_samples(&f, 2.0, 0.0, 1.0).unwrap(), 4);
    }

    #[test]
    fn resolution_bound_for_high_band() {
        let grid = FrequencyGrid::new(256.0, 512.0, 1025).unwrap();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(256.0, 512.0)), |_| {
            Complex64::new(1.0, 0.0)
        })
        .unwrap();
        let t = 2f64.powi(-16);
        let expected = FRAC_PI_4 / (1.0 + t * 2.0 * 512.0);
        assert!((max_freq_spacing(&f, 2.0, t, 1.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn small_a_rejects_support_at_origin() {
        let grid = FrequencyGrid::new(-1.0, 1.0, 101).unwrap();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(-1.0, 1.0)), |_| {
            Complex64::new(1.0, 0.0)
        })
        .unwrap();
        assert!(max_freq_spacing(&f, 0.5, 0.1, 1.0).is_err());
        assert!(max_freq_spacing(&f, 0.5, 0.0, 1.0).is_ok());
    }

    #[test]
    fn evolve_at_zero_is_synthesis() {
        let grid = FrequencyGrid::new(-32.0, 32.0, 2049).unwrap();
        let f = random_band_profile_on(3, 1, grid).unwrap();
        let x = uniform_grid(-2.0, 2.0, 101);
        assert_eq!(evolve(&f, 2.0, 0.0, &x).unwrap().values, synthesize(&f, &x).unwrap());
    }

    #[test]
    fn narrow_tone_moves_as_a_plane_wave() {
        let (xi0, w) = (16.0, 2f64.powi(-8));
        let f = narrow_tone(xi0, w, 257);
        let x = [-0.5, 0.0, 0.3];
        let t = 0.01;
        let s = evolve(&f, 2.0, t, &x).unwrap();
        for (xv, v) in x.iter().zip(&s.values) {
            let exact = Complex64::from_polar(1.0, xv * xi0 + t * xi0 * xi0);
            assert!((v - exact).norm() < 1e-3, "{v} vs {exact}");
        }
    }

    #[test]
    fn single_tone_quotient_matches_closed_form() {
        let f = narrow_tone(16.0, 2f64.powi(-8), 257);
        let params = EvolutionParams::new(2.0, 0.25).unwrap();
        let t = 1e-6;
        let r = ratio_field(&f, params, t, &[0.0]).unwrap().values[0].norm();
        let exact = (2.0 * (t * 256.0 / 2.0).sin()).abs() / t.powf(0.25);
        assert!((r / exact - 1.0).abs() < 1e-3);
    }

    #[test]
    fn quotient_rejects_nonpositive_time() {
        let f = narrow_tone(16.0, 0.01, 65);
        let params = EvolutionParams::new(2.0, 0.25).unwrap();
        assert!(ratio_field(&f, params, 0.0, &[0.0]).is_err());
        assert!(evolve(&f, -1.0, 0.1, &[0.0]).is_err());
    }

    #[test]
    fn consistency_triangle() {
        let grid = FrequencyGrid::new(-64.0, 64.0, 8193).unwrap();
        let f = random_band_profile_on(4, 2, grid).unwrap();
        let x = uniform_grid(-1.0, 1.0, 64);
        let t = 0.003;
        for delta in [0.0, 0.4] {
            let params = EvolutionParams::new(1.7, delta).unwrap();
            let s = evolve(&f, 1.7, t, &x).unwrap();
            let f0 = synthesize(&f, &x).unwrap();
            let r = ratio_field(&f, params, t, &x).unwrap();
            for i in 0..x.len() {
                let lhs = s.values[i] - f0[i];
                assert!((lhs - r.values[i] * t.powf(delta)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn evolution_is_unitary_on_wide_window() {
        let x_max = 6.0;
        let t = 0.01;
        let edge = 128.0;
        let grid = FrequencyGrid::with_max_spacing(-edge, edge, FRAC_PI_4 / (x_max + t * 2.0 * edge))
            .unwrap();
        let f = random_band_profile_on(6, 4, grid).unwrap();
        let x = uniform_grid(-x_max, x_max, 8001);
        let s = evolve(&f, 2.0, t, &x).unwrap();
        let l2 = l2_on_grid(&s.magnitudes(), x[1] - x[0]);
        assert!((l2 - 1.0).abs() < 1e-4, "{l2}");
    }

    #[test]
    fn radial_three_dim_origin_limit() {
        let b = Bump::default();
        let grid = FrequencyGrid::new(10.0, 14.0, 801).unwrap();
        let g = SpectralProfile::from_fn(grid, Some(Interval::new(11.0, 13.0)), |r| {
            Complex64::new(b.eval(r - 12.0), 0.0)
        })
        .unwrap();
        let v = evolve_radial(&g, 3, 0.0, &[0.0]).unwrap().values[0];
        let terms: Vec<f64> = grid
            .nodes()
            .map(|r| b.eval(r - 12.0) * 4.0 * PI * r * r)
            .collect();
        let expected = crate::sum::trapezoid(&terms, grid.spacing()) / (2.0 * PI).powi(3);
        assert!((v.re - expected).abs() < 1e-12 * expected);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn radial_one_dim_shell_is_a_standing_wave() {
        let (r0, w) = (20.0, 2f64.powi(-8));
        let f = narrow_tone(r0, w, 257);
        let t = 0.2;
        let x = [0.1, 0.7];
        let s = evolve_radial(&f, 1, t, &x).unwrap();
        for (xv, v) in x.iter().zip(&s.values) {
            let exact = Complex64::from_polar(2.0 * (r0 * xv).cos(), t * r0);
            assert!((v - exact).norm() < 2e-3);
        }
    }

    #[test]
    fn unsupported_dimension_is_rejected() {
        let f = narrow_tone(20.0, 0.01, 65);
        assert!(matches!(evolve_radial(&f, 2, 0.0, &[0.1]), Err(Error::UnsupportedDimension(2))));
    }
}
