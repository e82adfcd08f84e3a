//! Frequency-side data: grids, profiles, the plateau bump, Littlewood-Paley
//! windows, Sobolev norms, synthesis and seeded random band-limited inputs.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::propagator;
use crate::sum::{pairwise_sum, trapezoid};

/// Uniform grid `xi_min, xi_min + h, ..., xi_max` with `count` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    xi_min: f64,
    xi_max: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(xi_min: f64, xi_max: f64, count: usize) -> Result<Self> {
        if !(xi_min.is_finite() && xi_max.is_finite()) || xi_min >= xi_max {
            return domain(format!("grid bounds [{xi_min}, {xi_max}] are not an interval"));
        }
        if count < 2 {
            return domain("a frequency grid needs at least two nodes");
        }
        Ok(Self { xi_min, xi_max, count })
    }

    /// Smallest grid on `[lo, hi]` whose spacing does not exceed `max_spacing`.
    pub fn with_max_spacing(lo: f64, hi: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return domain("maximum spacing must be positive");
        }
        let cells = ((hi - lo) / max_spacing).ceil().max(1.0);
        if cells > 1e9 {
            return Err(Error::Range(format!("{cells:.3e} grid cells requested")));
        }
        Self::new(lo, hi, cells as usize + 1)
    }

    pub fn xi_min(&self) -> f64 {
        self.xi_min
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        (self.xi_max - self.xi_min) / (self.count - 1) as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.count {
            self.xi_max
        } else {
            self.xi_min + j as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |j| self.node(j))
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.xi_min <= lo && hi <= self.xi_max
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Frequency-side density sampled on a uniform grid; zero outside `support`.
///
/// A profile with `support == None` is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    support: Option<Interval>,
}

impl SpectralProfile {
    /// Samples `density` on `grid`, forcing zeros outside the declared support.
    pub fn from_fn(
        grid: FrequencyGrid,
        support: Option<Interval>,
        density: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        if let Some(s) = support {
            if !(s.lo <= s.hi) || !grid.covers(s.lo, s.hi) {
                return domain(format!(
                    "support [{}, {}] is not inside the grid range [{}, {}]",
                    s.lo,
                    s.hi,
                    grid.xi_min(),
                    grid.xi_max()
                ));
            }
        }
        let values = grid
            .nodes()
            .map(|xi| match support {
                Some(s) if s.contains(xi) => density(xi),
                _ => Complex64::new(0.0, 0.0),
            })
            .collect::<Vec<_>>();
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return domain("profile has non-finite values");
        }
        Ok(Self { grid, values, support })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.count()],
            support: None,
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn support(&self) -> Option<Interval> {
        self.support
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// Extent of the nonzero samples, widened by one grid cell on each side.
    pub fn effective_support(&self) -> Option<Interval> {
        let first = self.values.iter().position(|v| v.norm_sqr() > 0.0)?;
        let last = self.values.iter().rposition(|v| v.norm_sqr() > 0.0)?;
        let h = self.grid.spacing();
        Some(Interval::new(
            (self.grid.node(first) - h).max(self.grid.xi_min()),
            (self.grid.node(last) + h).min(self.grid.xi_max()),
        ))
    }

    /// Largest and smallest |ξ| among nonzero samples.
    pub(crate) fn abs_frequency_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (j, v) in self.values.iter().enumerate() {
            if v.norm_sqr() > 0.0 {
                let a = self.grid.node(j).abs();
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        (hi > 0.0 || lo.is_finite()).then_some((lo, hi))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
            support: self.support,
        }
    }

    /// Trapezoid integral of `weight(ξ)·|f̂(ξ)|²`.
    pub(crate) fn weighted_energy(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let m = v.norm_sqr();
                if m == 0.0 {
                    0.0
                } else {
                    weight(self.grid.node(j)) * m
                }
            })
            .collect();
        trapezoid(&terms, self.grid.spacing())
    }
}

/// Parameters of the plateau bump φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpSpec {
    pub plateau_halfwidth: f64,
    /// Smoothstep order; the edges are C^(order-1).
    pub order: u32,
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self { plateau_halfwidth: 0.25, order: 3 }
    }
}

/// Plateau bump: 1 on `[-plateau, plateau]`, smoothstep edges of width
/// `edge`, zero beyond `plateau + edge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    plateau: f64,
    edge: f64,
    order: u32,
}

impl Default for Bump {
    fn default() -> Self {
        Self::from_spec(BumpSpec::default()).expect("default bump spec is feasible")
    }
}

impl Bump {
    /// Bump with unit integral in the continuum: `2·plateau + edge = 1`.
    pub fn from_spec(spec: BumpSpec) -> Result<Self> {
        validate_bump_spec(&spec)?;
        let edge = 1.0 - 2.0 * spec.plateau_halfwidth;
        if edge <= 0.0 {
            return Err(Error::Calibration(format!(
                "plateau half-width {} leaves no room for unit mass with φ ≤ 1",
                spec.plateau_halfwidth
            )));
        }
        Ok(Self { plateau: spec.plateau_halfwidth, edge, order: spec.order })
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    /// Half-width of the closed support.
    pub fn reach(&self) -> f64 {
        self.plateau + self.edge
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let r = u.abs();
        if r <= self.plateau {
            1.0
        } else if r < self.plateau + self.edge {
            smoothstep(self.order, (self.plateau + self.edge - r) / self.edge)
        } else {
            0.0
        }
    }
}

fn validate_bump_spec(spec: &BumpSpec) -> Result<()> {
    if !(spec.plateau_halfwidth > 0.0 && spec.plateau_halfwidth < 1.0) {
        return domain("plateau half-width must lie in (0, 1)");
    }
    if spec.order < 3 {
        return domain("smoothstep order must be at least 3");
    }
    Ok(())
}

/// Polynomial smoothstep of the given order on `[0, 1]`, clamped outside.
///
/// `S(v) = v^m Σ_{j<m} C(m-1+j, j) (1-v)^j`; it satisfies `S(v) + S(1-v) = 1`
/// and has `m - 1` vanishing derivatives at both ends.
pub fn smoothstep(order: u32, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    let m = order as i32;
    let w = 1.0 - v;
    let mut binom = 1.0;
    let mut acc = 0.0;
    let mut wp = 1.0;
    for j in 0..m {
        acc += binom * wp;
        binom = binom * f64::from(m + j) / f64::from(j + 1);
        wp *= w;
    }
    v.powi(m) * acc
}

/// Samples φ on `grid`, calibrating the edge width so that the trapezoid
/// integral on this very grid equals 1.
pub fn make_bump(spec: BumpSpec, grid: FrequencyGrid) -> Result<SpectralProfile> {
    validate_bump_spec(&spec)?;
    if !grid.covers(-1.0, 1.0) {
        return domain("bump grid must cover [-1, 1]");
    }
    let h = spec.plateau_halfwidth;
    let mass = |edge: f64| {
        let b = Bump { plateau: h, edge, order: spec.order };
        let v: Vec<f64> = grid.nodes().map(|u| b.eval(u)).collect();
        trapezoid(&v, grid.spacing())
    };
    let (mut lo, mut hi) = (0.0, 1.0 - h);
    if !(mass(lo) < 1.0 && mass(hi) > 1.0) {
        return Err(Error::Calibration(format!(
            "no edge width gives unit mass for plateau half-width {h}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let edge = 0.5 * (lo + hi);
    let bump = Bump { plateau: h, edge, order: spec.order };
    if (mass(edge) - 1.0).abs() > 1e-10 {
        return Err(Error::Calibration(format!(
            "bump mass {} misses 1 on this grid",
            mass(edge)
        )));
    }
    SpectralProfile::from_fn(grid, Some(Interval::new(-bump.reach(), bump.reach())), |u| {
        Complex64::new(bump.eval(u), 0.0)
    })
}

/// Low-pass cutoff: 1 on `r ≤ 1`, 0 on `r ≥ 2`, cosine-squared in log₂ r between.
fn lowpass(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let c = (0.5 * PI * r.log2()).cos();
        c * c
    }
}

/// Littlewood-Paley window: the windows sum to 1 at every ξ. Window 0 lives in
/// `|ξ| < 2`, window `k ≥ 1` in `2^(k-1) < |ξ| < 2^(k+1)`.
pub fn band_window(k: u32, xi: f64) -> f64 {
    let r = xi.abs();
    if k == 0 {
        return lowpass(r);
    }
    let scale = (k as f64).exp2();
    lowpass(r / scale) - lowpass(2.0 * r / scale)
}

/// Open annulus `2^(k-1) < |ξ| < 2^(k+1)` (or `|ξ| < 2` for `k = 0`) as a
/// list of intervals.
pub fn band_annulus(k: u32) -> Vec<Interval> {
    if k == 0 {
        return vec![Interval::new(-2.0, 2.0)];
    }
    let lo = ((k - 1) as f64).exp2();
    let hi = ((k + 1) as f64).exp2();
    vec![Interval::new(-hi, -lo), Interval::new(lo, hi)]
}

pub fn project_band(f: &SpectralProfile, k: u32) -> SpectralProfile {
    let support = f.support.and_then(|s| {
        let parts: Vec<Interval> =
            band_annulus(k).iter().filter_map(|a| s.intersect(a)).collect();
        let lo = parts.iter().map(|p| p.lo).reduce(f64::min)?;
        let hi = parts.iter().map(|p| p.hi).reduce(f64::max)?;
        Some(Interval::new(lo, hi))
    });
    let values = f
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let xi = f.grid.node(j);
            match support {
                Some(s) if s.contains(xi) => v * band_window(k, xi),
                _ => Complex64::new(0.0, 0.0),
            }
        })
        .collect();
    SpectralProfile { grid: f.grid, values, support }
}

/// `‖f‖_{H^s}` with the `1/2π` Plancherel normalisation.
pub fn sobolev_norm(f: &SpectralProfile, s: f64) -> f64 {
    let energy = f.weighted_energy(|xi| (1.0 + xi * xi).powf(s));
    (energy.max(0.0) / (2.0 * PI)).sqrt()
}

/// Inverse transform `(1/2π)∫ e^{ixξ} f̂(ξ) dξ` by the trapezoid rule.
pub fn synthesize(f: &SpectralProfile, x_grid: &[f64]) -> Result<Vec<Complex64>> {
    Ok(propagator::evolve(f, 1.0, 0.0, x_grid)?.values)
}

/// Lattice spacing (and kernel width) of the random band generator. Sets the
/// spatial extent of the random inputs to roughly `|x| ≲ 3/RANDOM_LATTICE`.
pub const RANDOM_LATTICE: f64 = 4.0;

/// Spatial half-width used to size the default grid of [`random_band_profile`].
pub const RANDOM_DEFAULT_X_MAX: f64 = 4.0;

/// Seeded random profile in band `k` on a default grid resolving `|x| ≤ 4` at `t = 0`.
pub fn random_band_profile(k: u32, seed: u64) -> Result<SpectralProfile> {
    if k == 0 {
        return domain("random band profiles need k ≥ 1");
    }
    let edge = ((k + 1) as f64).exp2();
    let grid = FrequencyGrid::with_max_spacing(-edge, edge, 0.25 * PI / RANDOM_DEFAULT_X_MAX)?;
    random_band_profile_on(k, seed, grid)
}

/// Random profile in band `k` sampled on a caller-chosen grid.
///
/// Complex Gaussian coefficients sit on a lattice of spacing
/// [`RANDOM_LATTICE`]; they are spread by a Gaussian kernel of the same width
/// and shaped by `band_window(k, ·)`. The result has unit L² norm.
pub fn random_band_profile_on(k: u32, seed: u64, grid: FrequencyGrid) -> Result<SpectralProfile> {
    if k == 0 {
        return domain("random band profiles need k ≥ 1");
    }
    let edge = ((k + 1) as f64).exp2();
    if !grid.covers(-edge, edge) {
        return domain(format!("grid must cover the band [-{edge}, {edge}]"));
    }
    let sigma = RANDOM_LATTICE;
    let inner = ((k - 1) as f64).exp2();
    let reach = (edge / sigma).ceil() as i64 + 4;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::from(k)));
    let mut lattice = Vec::new();
    for m in -reach..=reach {
        let xi_m = m as f64 * sigma;
        // Draw for every node so the stream does not depend on the filter below.
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if xi_m.abs() > inner - 6.0 * sigma && xi_m.abs() < edge + 6.0 * sigma {
            lattice.push((xi_m, Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2));
        }
    }
    let density = |xi: f64| {
        let w = band_window(k, xi);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let terms: Vec<Complex64> = lattice
            .iter()
            .filter(|(c, _)| (xi - c).abs() < 8.0 * sigma)
            .map(|(c, z)| {
                let u = (xi - c) / sigma;
                z * (-0.5 * u * u).exp()
            })
            .collect();
        crate::sum::pairwise_sum_complex(&terms) * w
    };
    let raw = SpectralProfile::from_fn(grid, Some(Interval::new(-edge, edge)), density)?;
    let norm = sobolev_norm(&raw, 0.0);
    if !(norm > 0.0) {
        return Err(Error::Calibration("random profile vanished on this grid".into()));
    }
    Ok(raw.scaled(1.0 / norm))
}

/// SplitMix64-style mixing of a base seed with a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// L² norm of samples on a uniform x-grid (trapezoid).
pub fn l2_on_grid(values: &[f64], spacing: f64) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    trapezoid(&sq, spacing).max(0.0).sqrt()
}

/// Uniform grid of `count` points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let h = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + i as f64 * h })
        .collect()
}

#[allow(dead_code)]
pub(crate) fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn bump_grid() -> FrequencyGrid {
        FrequencyGrid::new(-2.0, 2.0, 4097).unwrap()
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(FrequencyGrid::new(1.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn smoothstep_order_three_is_quintic() {
        for &v in &[0.1f64, 0.37, 0.5, 0.9] {
            let q = 6.0 * v.powi(5) - 15.0 * v.powi(4) + 10.0 * v.powi(3);
            assert!((smoothstep(3, v) - q).abs() < 1e-14);
            assert!((smoothstep(3, v) + smoothstep(3, 1.0 - v) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bump_has_unit_mass_and_range() {
        let grid = bump_grid();
        let phi = make_bump(BumpSpec::default(), grid).unwrap();
        let re: Vec<f64> = phi.values().iter().map(|v| v.re).collect();
        assert!((trapezoid(&re, grid.spacing()) - 1.0).abs() < 1e-10);
        assert!(re.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(re.iter().cloned().fold(0.0, f64::max), 1.0);
        for (j, xi) in grid.nodes().enumerate() {
            if xi.abs() >= 1.0 {
                assert_eq!(re[j], 0.0, "φ({xi}) should vanish");
            }
        }
    }

    #[test]
    fn bump_outside_support_is_zero() {
        let b = Bump::default();
        assert_eq!(b.eval(1.5), 0.0);
        assert_eq!(b.eval(-1.5), 0.0);
        assert_eq!(b.eval(0.0), 1.0);
    }

    #[test]
    fn infeasible_bump_is_a_calibration_error() {
        let spec = BumpSpec { plateau_halfwidth: 0.6, order: 3 };
        assert!(matches!(make_bump(spec, bump_grid()), Err(Error::Calibration(_))));
        assert!(matches!(Bump::from_spec(spec), Err(Error::Calibration(_))));
    }

    #[test]
    fn bump_derivatives_are_continuous_at_joints() {
        // order 3 => C^2: first and second differences match across the joints.
        let b = Bump::default();
        let h = 1e-4;
        for &joint in &[b.plateau(), b.reach()] {
            for side in [-1.0, 1.0] {
                let x = joint * side;
                let d1_left = (b.eval(x) - b.eval(x - h)) / h;
                let d1_right = (b.eval(x + h) - b.eval(x)) / h;
                assert!((d1_left - d1_right).abs() < 1e-3, "slope jump at {x}");
                let d2_left = (b.eval(x) - 2.0 * b.eval(x - h) + b.eval(x - 2.0 * h)) / (h * h);
                let d2_right = (b.eval(x + 2.0 * h) - 2.0 * b.eval(x + h) + b.eval(x)) / (h * h);
                assert!((d2_left - d2_right).abs() < 0.1, "curvature jump at {x}");
            }
        }
    }

    #[test]
    fn windows_form_partition_of_unity() {
        let total: f64 = (0..=20).map(|k| band_window(k, 37.0)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(band_window(5, 1.0), 0.0);
        assert_eq!(band_window(0, 0.0), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let xi: f64 = rng.random_range(-32768.0..32768.0);
            let s: f64 = (0..=20).map(|k| band_window(k, xi)).sum();
            assert!((s - 1.0).abs() <= 1e-12, "sum {s} at {xi}");
        }
    }

    #[test]
    fn window_support_matches_annulus() {
        for k in 1..8u32 {
            let lo = ((k - 1) as f64).exp2();
            let hi = ((k + 1) as f64).exp2();
            assert_eq!(band_window(k, lo), 0.0);
            assert_eq!(band_window(k, hi), 0.0);
            assert!(band_window(k, 0.5 * (lo + hi)) > 0.0);
        }
    }

    #[test]
    fn disjoint_projection_is_zero() {
        let grid = FrequencyGrid::new(0.0, 1.0, 1001).unwrap();
        let b = Bump::default();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(0.2, 0.5)), |xi| {
            Complex64::new(b.eval((xi - 0.35) / 0.15), 0.0)
        })
        .unwrap();
        let p = project_band(&f, 3);
        assert!(p.is_zero());
        assert!(p.support().is_none());
    }

    #[test]
    fn projections_sum_back_to_profile() {
        let grid = FrequencyGrid::new(-40.0, 40.0, 8001).unwrap();
        let f = random_band_profile_on(4, 3, grid).unwrap();
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.count()];
        for k in 0..=8 {
            for (a, v) in acc.iter_mut().zip(project_band(&f, k).values()) {
                *a += v;
            }
        }
        for (a, v) in acc.iter().zip(f.values()) {
            assert!((a - v).norm() < 1e-12);
        }
    }

    #[test]
    fn overlapping_bands_split_a_bump_between_two_windows() {
        // A bump on [6, 7] sees only windows 2 and 3; their projections add
        // back to f there, with weights given by the window values directly.
        let grid = FrequencyGrid::new(0.0, 10.0, 2001).unwrap();
        let b = Bump::default();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(6.0, 7.0)), |xi| {
            Complex64::new(b.eval((xi - 6.5) / 0.5), 0.0)
        })
        .unwrap();
        let p2 = project_band(&f, 2);
        let p3 = project_band(&f, 3);
        for (j, xi) in grid.nodes().enumerate() {
            let v = f.values()[j];
            assert!((p3.values()[j] - v * band_window(3, xi)).norm() < 1e-15);
            assert!((p2.values()[j] + p3.values()[j] - v).norm() < 1e-14);
        }
        // At ξ = 6.5 the split is sin² / cos² of (π/2)·log₂(6.5/4).
        let j = 1300;
        assert_eq!(grid.node(j), 6.5);
        let theta = 0.5 * PI * (6.5f64 / 4.0).log2();
        assert!((p3.values()[j].re - theta.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sobolev_norm_of_zero_is_zero() {
        let grid = FrequencyGrid::new(-1.0, 1.0, 11).unwrap();
        let z = SpectralProfile::zeros(grid);
        assert_eq!(sobolev_norm(&z, 0.7), 0.0);
    }

    #[test]
    fn sobolev_zero_is_plancherel_l2() {
        let f = random_band_profile(3, 11).unwrap();
        let re: Vec<f64> = f.values().iter().map(|v| v.norm_sqr()).collect();
        let l2 = (trapezoid(&re, f.grid().spacing()) / (2.0 * PI)).sqrt();
        assert!((sobolev_norm(&f, 0.0) - l2).abs() < 1e-15);
    }

    #[test]
    fn sobolev_norm_is_monotone_in_s_away_from_origin() {
        let f = random_band_profile(5, 2).unwrap();
        let mut prev = 0.0;
        for i in 0..10 {
            let n = sobolev_norm(&f, -1.0 + 0.3 * i as f64);
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn random_profiles_are_deterministic_normalised_and_banded() {
        let a = random_band_profile(6, 42).unwrap();
        let b = random_band_profile(6, 42).unwrap();
        assert_eq!(a, b);
        assert!((sobolev_norm(&a, 0.0) - 1.0).abs() < 1e-12);
        let c = random_band_profile(6, 43).unwrap();
        assert_ne!(a, c);
        for (j, xi) in a.grid().nodes().enumerate() {
            if xi.abs() <= 32.0 || xi.abs() >= 128.0 {
                assert_eq!(a.values()[j], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn even_real_profile_synthesizes_to_real_field() {
        let grid = FrequencyGrid::new(-1.0, 1.0, 2001).unwrap();
        let phi = make_bump(BumpSpec::default(), grid).unwrap();
        let x = uniform_grid(-3.0, 3.0, 61);
        let f = synthesize(&phi, &x).unwrap();
        for v in f {
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn modulated_narrow_bump_synthesizes_to_unit_value_at_origin() {
        // f̂ = (2π/w)·φ((ξ-8)/w) has mass 2π, so f(0) = ∫φ = 1 up to quadrature.
        let w = 1.0 / 256.0;
        let b = Bump::default();
        let grid = FrequencyGrid::new(8.0 - w, 8.0 + w, 1025).unwrap();
        let f = SpectralProfile::from_fn(grid, Some(Interval::new(8.0 - w, 8.0 + w)), |xi| {
            Complex64::new(2.0 * PI / w * b.eval((xi - 8.0) / w), 0.0)
        })
        .unwrap();
        let v = synthesize(&f, &[0.0]).unwrap()[0];
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn synthesis_obeys_plancherel_on_a_wide_window() {
        let grid = FrequencyGrid::with_max_spacing(-16.0, 16.0, 0.25 * PI / 12.0).unwrap();
        let f = random_band_profile_on(3, 5, grid).unwrap();
        let x = uniform_grid(-12.0, 12.0, 4001);
        let v = synthesize(&f, &x).unwrap();
        let mags: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        let l2 = l2_on_grid(&mags, x[1] - x[0]);
        assert!((l2 - sobolev_norm(&f, 0.0)).abs() < 1e-6, "{l2}");
    }

    #[test]
    fn synthesis_refuses_under_resolved_grid() {
        let grid = FrequencyGrid::new(-16.0, 16.0, 33).unwrap();
        let f = random_band_profile_on(3, 5, grid).unwrap();
        assert!(matches!(synthesize(&f, &[10.0]), Err(Error::Resolution { .. })));
    }
}
