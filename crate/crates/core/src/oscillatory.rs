//! Trapezoid evaluation of `(1/2π) Σ_j w_j e^{i x ξ_j} m(t, |ξ_j|^a) f̂_j`.
//!
//! Two paths: `eval_pairs` sums directly for arbitrary `(x, t)` pairs, and
//! `eval_grid` evaluates a full x × t table as a complex matrix product
//! `E · C` with `E[m, j] = e^{i x_m ξ_j}` and `C[j, n] = w_j m(t_n, η_j)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::spectral::SpectralProfile;
use crate::sum::pairwise_sum_complex;

/// Time factor applied to each frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Multiplier {
    /// `e^{itη}`
    Evolve,
    /// `(e^{itη} - 1) / t^δ`, in the form `2i sin(θ/2) e^{iθ/2} / t^δ`.
    Ratio { delta: f64 },
}

impl Multiplier {
    #[inline]
    pub(crate) fn apply(self, t: f64, eta: f64) -> Complex64 {
        let theta = t * eta;
        match self {
            Multiplier::Evolve => Complex64::from_polar(1.0, theta),
            Multiplier::Ratio { delta } => {
                let (s, c) = (0.5 * theta).sin_cos();
                let scale = 2.0 * s / t.powf(delta);
                // 2i sin(θ/2) (cos(θ/2) + i sin(θ/2))
                Complex64::new(-scale * s, scale * c)
            }
        }
    }
}

/// Spatial factor of the inverse transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    /// `e^{ixξ}` on the line.
    Line,
    /// `2 cos(r|x|)`: the 0-sphere in one dimension.
    Radial1,
    /// `4π sin(r|x|)/(r|x|) · r²`: the 2-sphere in three dimensions.
    Radial3,
}

impl Kernel {
    #[inline]
    fn eval(self, x: f64, xi: f64) -> Complex64 {
        match self {
            Kernel::Line => Complex64::from_polar(1.0, x * xi),
            Kernel::Radial1 => Complex64::new(2.0 * (x * xi).cos(), 0.0),
            Kernel::Radial3 => {
                let z = (x * xi).abs();
                let sinc = if z < 1e-4 {
                    1.0 - z * z / 6.0 + z.powi(4) / 120.0
                } else {
                    z.sin() / z
                };
                Complex64::new(4.0 * PI * sinc * xi * xi, 0.0)
            }
        }
    }

    fn normalisation(self) -> f64 {
        match self {
            Kernel::Line | Kernel::Radial1 => 1.0 / (2.0 * PI),
            Kernel::Radial3 => 1.0 / (2.0 * PI).powi(3),
        }
    }
}

/// Nonzero quadrature nodes with trapezoid weights folded into `f̂`.
#[derive(Debug, Clone)]
pub(crate) struct Nodes {
    pub(crate) xi: Vec<f64>,
    pub(crate) weight: Vec<Complex64>,
}

impl Nodes {
    /// Composite trapezoid on every `stride`-th grid node, aligned so that the
    /// coarse rule starts at or before the first nonzero sample.
    pub(crate) fn from_profile(f: &SpectralProfile, stride: usize) -> Self {
        let stride = stride.max(1);
        let grid = f.grid();
        let values = f.values();
        let n = values.len();
        let mut nodes = Nodes { xi: Vec::new(), weight: Vec::new() };
        let Some(first) = values.iter().position(|v| v.norm_sqr() > 0.0) else {
            return nodes;
        };
        let last = values.iter().rposition(|v| v.norm_sqr() > 0.0).unwrap_or(first);
        let start = first.saturating_sub(1);
        let h = grid.spacing() * stride as f64;
        let mut j = start;
        while j <= last {
            let v = values[j];
            if v.norm_sqr() > 0.0 {
                // Grid boundary nodes carry half weight; interior zeros bound the support.
                let w = if j == 0 || j + 1 == n { 0.5 * h } else { h };
                nodes.xi.push(grid.node(j));
                nodes.weight.push(v * w);
            }
            j += stride;
        }
        nodes
    }

    pub(crate) fn len(&self) -> usize {
        self.xi.len()
    }
}

/// `(x, t)` values at arbitrary pairs.
pub(crate) fn eval_pairs(
    nodes: &Nodes,
    a: f64,
    kernel: Kernel,
    mult: Multiplier,
    pairs: &[(f64, f64)],
) -> Vec<Complex64> {
    let eta: Vec<f64> = nodes.xi.iter().map(|x| x.abs().powf(a)).collect();
    let norm = kernel.normalisation();
    pairs
        .par_iter()
        .map_init(Vec::new, |terms, &(x, t)| {
            terms.clear();
            terms.extend(
                nodes
                    .xi
                    .iter()
                    .zip(&nodes.weight)
                    .zip(&eta)
                    .map(|((&xi, &w), &e)| w * kernel.eval(x, xi) * mult.apply(t, e)),
            );
            pairwise_sum_complex(terms) * norm
        })
        .collect()
}

const ROW_BLOCK: usize = 128;
const XI_BLOCK: usize = 1024;

/// Line-kernel table, row-major: entry `[m * times.len() + n]` is the value at
/// `(x[m], times[n])`.
pub(crate) fn eval_grid(
    nodes: &Nodes,
    a: f64,
    x: &[f64],
    times: &[f64],
    mult: Multiplier,
) -> Vec<Complex64> {
    let nt = times.len();
    let nx = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); nx * nt];
    if nodes.len() == 0 || nt == 0 || nx == 0 {
        return out;
    }
    let norm = 1.0 / (2.0 * PI);
    // C is row-major nξ × nt.
    let mut c = Vec::with_capacity(nodes.len() * nt);
    for (&xi, &w) in nodes.xi.iter().zip(&nodes.weight) {
        let eta = xi.abs().powf(a);
        c.extend(times.iter().map(|&t| w * mult.apply(t, eta) * norm));
    }
    let step = uniform_step(x);

    out.par_chunks_mut(ROW_BLOCK * nt)
        .enumerate()
        .for_each_init(Vec::new, |e, (block, out_rows)| {
            let rows = out_rows.len() / nt;
            let xs = &x[block * ROW_BLOCK..block * ROW_BLOCK + rows];
            for (jb, xi_chunk) in nodes.xi.chunks(XI_BLOCK).enumerate() {
                let kb = xi_chunk.len();
                fill_exponentials(e, xs, xi_chunk, step);
                let c_chunk = &c[jb * XI_BLOCK * nt..(jb * XI_BLOCK + kb) * nt];
                let beta = if jb == 0 { [0.0, 0.0] } else { [1.0, 0.0] };
                // SAFETY: E is rows × kb column-major, C is kb × nt row-major,
                // out_rows is rows × nt row-major; all buffers have exactly
                // those sizes, and Complex64 is layout-compatible with [f64; 2].
                unsafe {
                    matrixmultiply::zgemm(
                        matrixmultiply::CGemmOption::Standard,
                        matrixmultiply::CGemmOption::Standard,
                        rows,
                        kb,
                        nt,
                        [1.0, 0.0],
                        e.as_ptr() as *const [f64; 2],
                        1,
                        rows as isize,
                        c_chunk.as_ptr() as *const [f64; 2],
                        nt as isize,
                        1,
                        beta,
                        out_rows.as_mut_ptr() as *mut [f64; 2],
                        nt as isize,
                        1,
                    );
                }
            }
        });
    out
}

/// Spacing of `x` if it is uniform to rounding, else `None`.
fn uniform_step(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    x.iter()
        .enumerate()
        .all(|(i, &v)| (v - (x[0] + i as f64 * h)).abs() <= 1e-12 * scale)
        .then_some(h)
}

/// Column-major `rows × kb` table of `e^{i x_m ξ_j}`; uniform rows use a
/// rotation recurrence seeded exactly at the block start.
fn fill_exponentials(e: &mut Vec<Complex64>, xs: &[f64], xi: &[f64], step: Option<f64>) {
    let rows = xs.len();
    e.clear();
    e.reserve(rows * xi.len());
    for &k in xi {
        match step {
            Some(h) => {
                let rot = Complex64::from_polar(1.0, h * k);
                let mut z = Complex64::from_polar(1.0, xs[0] * k);
                for _ in 0..rows {
                    e.push(z);
                    z *= rot;
                }
            }
            None => e.extend(xs.iter().map(|&x| Complex64::from_polar(1.0, x * k))),
        }
    }
}
