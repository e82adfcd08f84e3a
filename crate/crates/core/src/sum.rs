//! Deterministic pairwise reductions.
//!
//! Every norm and integral in the crate goes through these so that results
//! are bit-reproducible regardless of how the inputs were produced.

use num_complex::Complex64;

const BLOCK: usize = 16;

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// Trapezoid rule on a uniform grid with the given spacing.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => spacing * (pairwise_sum(values) - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoid weight of node `j` out of `n` on a grid with the given spacing.
#[inline]
pub fn trapezoid_weight(j: usize, n: usize, spacing: f64) -> f64 {
    if j == 0 || j + 1 == n {
        0.5 * spacing
    } else {
        spacing
    }
}
