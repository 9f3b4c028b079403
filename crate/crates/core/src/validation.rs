//! Internal-consistency checks on a truncated tree, run by `spectree validate`.

use serde::Serialize;

use crate::birman_schwinger::{g_exact, g_series, BirmanSchwinger, SERIES_RADIUS};
use crate::decomposition::{interior_commutator, SphericalBasis};
use crate::error::Result;
use crate::linalg::{relative_frobenius, symmetric_eigenvalues};
use crate::operators::{adjacency, free_operator, lowering, raising, theta, PotentialSpec};
use crate::resolvent::{
    boundary_corrected_resolvent, calibrate_sine_prefactor, fourier_coefficient,
    fourier_coefficient_quadrature, free_kernel, SpectralPoint, Threshold,
};
use crate::tree::TreeGraph;
use crate::{t_minus, t_plus, C64};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }
}

/// Dense checks run on the largest sub-ball with at most this many vertices.
pub const DENSE_VERTEX_LIMIT: usize = 1200;

fn dense_depth(k: usize, depth: usize) -> usize {
    let mut r = 0;
    while r < depth {
        match TreeGraph::with_cap(k, r + 1, DENSE_VERTEX_LIMIT) {
            Ok(_) => r += 1,
            Err(_) => break,
        }
    }
    r
}

pub fn run_suite(k: usize, depth: usize) -> Result<Vec<Check>> {
    let t = TreeGraph::new(k, depth)?;
    let mut out = Vec::new();

    let layout_errors = (1..t.vertex_count())
        .filter(|&v| {
            let p = (v - 1) / k;
            t.vertex_depth(p).ok().map(|d| d + 1) != t.vertex_depth(v).ok()
                || !t.children(p).map(|c| c.contains(&v)).unwrap_or(false)
        })
        .count();
    let expected: usize = (0..=depth).map(|r| k.pow(r as u32)).sum();
    let count_error = t.vertex_count().abs_diff(expected);
    out.push(Check::new(
        "tree_layout",
        (layout_errors + count_error) as f64,
        0.0,
    ));

    let dt = TreeGraph::new(k, dense_depth(k, depth))?;
    let a = adjacency(&dt);
    out.push(Check::new(
        "adjacency_symmetric",
        (&a - a.transpose()).norm(),
        0.0,
    ));
    out.push(Check::new(
        "raising_plus_lowering",
        (raising(&dt) + lowering(&dt) - &a).norm(),
        0.0,
    ));
    let th = nalgebra::DMatrix::from_diagonal(&theta(&dt));
    out.push(Check::new(
        "theta_anticommutes",
        (&th * &a * &th + &a).norm(),
        0.0,
    ));

    let h = free_operator(&dt).map(|x| x.re);
    let eig = symmetric_eigenvalues(&h);
    let (lo, hi) = (t_minus(k), t_plus(k));
    let escape = eig
        .iter()
        .map(|&e| (lo - e).max(e - hi).max(0.0))
        .fold(0.0, f64::max);
    out.push(Check::new("free_spectrum_in_band", escape, 1e-10));

    let b = SphericalBasis::build(&dt)?;
    let full = b.full_basis();
    let n = dt.vertex_count();
    out.push(Check::new(
        "decomposition_orthonormal",
        (full.transpose() * &full - nalgebra::DMatrix::identity(n, n)).norm(),
        1e-10,
    ));
    let dim_total: usize = (0..=dt.depth())
        .map(|m| b.dim(m) * (dt.depth() - m + 1))
        .sum();
    out.push(Check::new(
        "decomposition_dimension",
        dim_total.abs_diff(n) as f64,
        0.0,
    ));
    let jac = (0..=dt.depth())
        .map(|m| b.verify_jacobi_form(&dt, m))
        .fold(0.0, f64::max);
    out.push(Check::new("jacobi_form", jac, 1e-10));
    let comm = (0..=dt.depth())
        .map(|m| interior_commutator(&dt, &b, m))
        .fold(0.0, f64::max);
    out.push(Check::new("projector_commutes", comm, 1e-10));

    let sp = SpectralPoint::from_lambda(k, C64::new(0.05, 0.12), Threshold::Minus, 0.3)?;
    let vertices: Vec<usize> = (0..n).collect();
    let (k0, _) = free_kernel(&b, &vertices, &sp, false)?;
    let dense = boundary_corrected_resolvent(&dt, &sp)?;
    out.push(Check::new(
        "kernel_vs_dense",
        relative_frobenius(&k0, &dense),
        1e-10,
    ));

    let mut fourier: f64 = 0.0;
    for u in [
        C64::new(0.3, 0.4),
        C64::new(-1.2, 0.05),
        C64::new(2.5, -0.7),
    ] {
        let sp = SpectralPoint::from_u(k, u)?;
        for m in -4..=4 {
            let exact = fourier_coefficient(m, &sp)?;
            let quad = fourier_coefficient_quadrature(m, u, 2048);
            fourier = fourier.max((exact - quad).norm());
        }
    }
    out.push(Check::new("fourier_identity", fourier, 1e-8));

    let cal = calibrate_sine_prefactor(&[C64::new(0.5, 0.6), C64::new(-1.0, -0.3)], 4, 2048)?;
    out.push(Check::new("sine_prefactor", cal.derived_error, 1e-8));

    let mut seam: f64 = 0.0;
    for a in 0..8 {
        for i in 0..8 {
            let l = C64::from_polar(SERIES_RADIUS, 0.3 + i as f64 * 0.7);
            let (s, e) = (g_series(a, l), g_exact(a, l));
            seam = seam.max((s - e).norm() / e.norm().max(1.0));
        }
    }
    out.push(Check::new("gamma_beta_seam", seam, 1e-8));

    let spec = PotentialSpec::radial_exp(
        C64::new(0.4, 0.1),
        crate::operators::minimal_delta(k).max(2.0),
    );
    let bs = BirmanSchwinger::new(k, &spec, Threshold::Minus)?;
    let lam = C64::new(0.02, 0.015);
    let (hol, split) = bs.hol_split(lam)?;
    let rel = split.unwrap_or(f64::INFINITY) / hol.norm().max(1e-300);
    out.push(Check::new("hol_split", rel, 1e-9));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for (k, depth) in [(1, 12), (2, 6), (3, 4)] {
            for c in run_suite(k, depth).unwrap() {
                assert!(
                    c.passed,
                    "k = {k}: {} = {:e} > {:e}",
                    c.name, c.value, c.tolerance
                );
            }
        }
    }
}
