//! Trapezoidal rules on the torus and on circles in ℂ. Both are spectrally
//! accurate for periodic analytic integrands.

use std::f64::consts::PI;

use crate::C64;

/// `(1/2π) ∫_𝕋 f(θ) dθ` with `nodes` equispaced points.
pub fn torus_mean<F>(nodes: usize, f: F) -> C64
where
    F: Fn(f64) -> C64,
{
    let h = 2.0 * PI / nodes as f64;
    let s: C64 = (0..nodes).map(|i| f(h * i as f64)).sum();
    s / nodes as f64
}

/// Node `j` of an `n`-point rule on the circle `c + r e^{iθ}`, with
/// `θ_j = 2π(j + offset)/n`. Returns `(ζ_j, r e^{iθ_j})`; the second entry is
/// `dζ/dθ / i`.
pub fn circle_node(center: C64, radius: f64, nodes: usize, offset: f64, j: usize) -> (C64, C64) {
    let th = 2.0 * PI * (j as f64 + offset) / nodes as f64;
    let e = C64::from_polar(radius, th);
    (center + e, e)
}

pub fn circle_nodes(center: C64, radius: f64, nodes: usize, offset: f64) -> Vec<(C64, C64)> {
    (0..nodes)
        .map(|j| circle_node(center, radius, nodes, offset, j))
        .collect()
}

/// `(1/2πi) ∮ g(ζ) dζ` over the positively oriented circle.
pub fn circle_integral<F>(center: C64, radius: f64, nodes: usize, offset: f64, g: F) -> C64
where
    F: Fn(C64) -> C64,
{
    let s: C64 = circle_nodes(center, radius, nodes, offset)
        .into_iter()
        .map(|(z, e)| g(z) * e)
        .sum();
    s / nodes as f64
}

/// Cauchy formula `f(z0) = (1/2πi) ∮ f(ζ)/(ζ - z0) dζ` from samples on a circle.
pub fn cauchy_reconstruct(samples: &[(C64, C64)], values: &[C64], z0: C64) -> C64 {
    let s: C64 = samples
        .iter()
        .zip(values)
        .map(|(&(z, e), &f)| f * e / (z - z0))
        .sum();
    s / samples.len() as f64
}
