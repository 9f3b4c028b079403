//! Spectral coordinates and the closed-form resolvent kernel of `-L + k + 1`.
//!
//! Coordinates: `u = (z + 2√k - k - 1)/√k`, `w = e^{iΦ}` the root of
//! `w² - (2 - u)w + 1 = 0` with `|w| < 1` on the physical sheet,
//! `D = √u√(4-u) = 2 sin Φ` and `λ = 2 sin(Φ/2)`, so `u = λ²` and
//! `z = t₋ + λ²√k`.
//!
//! On `M_n` the operator `-L + k + 1 - z` is `√k (2 - 2cos θ - u)` in the sine
//! picture, so every kernel entry is a finite sum over `n ≤ min(|v|, |v'|)` of
//! `(1/√k)·i(w^{|j-ℓ|} - w^{j+ℓ+2})/D` times the lifted overlap. The sum is the
//! exact infinite-tree resolvent restricted to the truncation.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::SphericalBasis;
use crate::error::{Error, Result};
use crate::linalg::inverse;
use crate::operators::{decay_assumption_holds, free_operator, ComplexValue};
use crate::quadrature::torus_mean;
use crate::tree::TreeGraph;
use crate::{c64, t_minus, t_plus, CMatrix, Diagonal, C64};

/// Constant in front of the bracket `(-i w^{j+ℓ+2} + i w^{|j-ℓ|})/D` in the
/// `(1/π)`-normalized sine-projected coefficient. Fixed by quadrature.
pub const SINE_PREFACTOR: f64 = 1.0;

/// The competing constant `√(2/π)`; kept only so the calibration can report it fails.
pub fn printed_sine_prefactor() -> f64 {
    (2.0 / PI).sqrt()
}

/// Scalar in front of the assembled kernel: `SINE_PREFACTOR / √k`.
pub fn kernel_prefactor(k: usize) -> f64 {
    SINE_PREFACTOR / (k as f64).sqrt()
}

/// Distance from the band below which a point counts as on the spectrum.
pub const SPECTRUM_GUARD: f64 = 1e-12;

/// Default radius of the working disk in `λ`: `min(δ/8, 0.3)`.
pub fn working_radius(delta: f64) -> f64 {
    (delta / 8.0).min(0.3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Minus,
    Plus,
}

impl std::str::FromStr for Threshold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus" | "-" => Ok(Self::Minus),
            "plus" | "+" => Ok(Self::Plus),
            _ => Err(Error::InvalidParameter(format!(
                "threshold must be 'minus' or 'plus', got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Minus => "minus",
            Self::Plus => "plus",
        })
    }
}

/// Coupled coordinates of a spectral point.
///
/// `u`, `phi`, `w` and `d` always describe the point where the free kernel is
/// evaluated: `z` itself near `t₋`, and `ω = 2(k+1) - z` near `t₊`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub k: usize,
    pub lambda: C64,
    pub z: C64,
    pub u: C64,
    pub phi: C64,
    pub w: C64,
    /// `√u√(4-u) = 2 sin Φ`.
    pub d: C64,
    pub threshold: Threshold,
}

impl SpectralPoint {
    /// Physical-sheet point for `z` off `[t₋, t₊]`.
    pub fn from_z(k: usize, z: C64) -> Result<Self> {
        check_k(k)?;
        if z.im.abs() <= SPECTRUM_GUARD
            && z.re >= t_minus(k) - SPECTRUM_GUARD
            && z.re <= t_plus(k) + SPECTRUM_GUARD
        {
            return Err(Error::OnSpectrum { re: z.re, im: z.im });
        }
        let sk = (k as f64).sqrt();
        let u = (z + 2.0 * sk - (k as f64 + 1.0)) / sk;
        let b = 2.0 - u;
        let s = (b * b - 4.0).sqrt();
        let (w1, w2) = ((b - s) / 2.0, (b + s) / 2.0);
        let w = if w1.norm() <= w2.norm() { w1 } else { w2 };
        if !(w.norm() < 1.0) {
            return Err(Error::BranchFailure(format!(
                "no root of modulus < 1 at z = {z}"
            )));
        }
        let phi = -C64::i() * w.ln();
        let lambda = 2.0 * (phi / 2.0).sin();
        let d = -C64::i() * (w - 1.0 / w);
        Ok(Self {
            k,
            lambda,
            z,
            u,
            phi,
            w,
            d,
            threshold: Threshold::Minus,
        })
    }

    /// Point for `u ∉ [0, 4]`.
    pub fn from_u(k: usize, u: C64) -> Result<Self> {
        let sk = (k as f64).sqrt();
        Self::from_z(k, u * sk - 2.0 * sk + (k as f64 + 1.0))
    }

    /// `z_{t₋}(λ) = t₋ + λ²√k` or `z_{t₊}(λ) = t₊ - λ²√k`, for `0 < |λ| < eps0`.
    pub fn from_lambda(k: usize, lambda: C64, threshold: Threshold, eps0: f64) -> Result<Self> {
        if !(lambda.norm() < eps0) {
            return Err(Error::OutOfDisk {
                modulus: lambda.norm(),
                radius: eps0,
            });
        }
        if lambda == C64::default() {
            return Err(Error::InvalidParameter(
                "lambda = 0 is the threshold itself".into(),
            ));
        }
        Self::from_lambda_unchecked(k, lambda, threshold)
    }

    /// As [`Self::from_lambda`] without the disk check (any `|λ| < 2`, `λ = 0` allowed).
    pub fn from_lambda_unchecked(k: usize, lambda: C64, threshold: Threshold) -> Result<Self> {
        check_k(k)?;
        if !(lambda.norm() < 2.0) {
            return Err(Error::BranchFailure(format!(
                "|lambda| = {} outside the branch disk |lambda| < 2",
                lambda.norm()
            )));
        }
        let sk = (k as f64).sqrt();
        let u = lambda * lambda;
        let phi = 2.0 * (lambda / 2.0).asin();
        let w = 1.0 - u / 2.0 + C64::i() * lambda * (1.0 - u / 4.0).sqrt();
        let d = lambda * (4.0 - u).sqrt();
        let z = match threshold {
            Threshold::Minus => t_minus(k) + u * sk,
            Threshold::Plus => t_plus(k) - u * sk,
        };
        Ok(Self {
            k,
            lambda,
            z,
            u,
            phi,
            w,
            d,
            threshold,
        })
    }

    /// Where the free kernel is evaluated: `z` or `ω = 2(k+1) - z`.
    pub fn eval_z(&self) -> C64 {
        match self.threshold {
            Threshold::Minus => self.z,
            Threshold::Plus => 2.0 * (self.k as f64 + 1.0) - self.z,
        }
    }

    /// `Im λ >= 0`.
    pub fn is_physical(&self) -> bool {
        self.lambda.im >= 0.0
    }

    /// The other sheet over the same `u`: `Φ ↦ -Φ`, `w ↦ 1/w`, `D ↦ -D`, `λ ↦ -λ`.
    pub fn sheet_swapped(&self) -> Self {
        Self {
            lambda: -self.lambda,
            phi: -self.phi,
            w: 1.0 / self.w,
            d: -self.d,
            ..*self
        }
    }

    /// `dΦ/dλ = 2/√(4-λ²)`.
    pub fn dphi_dlambda(&self) -> C64 {
        2.0 / (4.0 - self.u).sqrt()
    }

    /// `dD/dλ = (4 - 2λ²)/√(4-λ²)`.
    pub fn dd_dlambda(&self) -> C64 {
        (4.0 - 2.0 * self.u) / (4.0 - self.u).sqrt()
    }

    fn check_d(&self) -> Result<()> {
        if self.d == C64::default() || !self.d.is_finite() {
            return Err(Error::BranchFailure(format!(
                "2 sin(phi) vanishes at u = {}",
                self.u
            )));
        }
        Ok(())
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        Err(Error::InvalidParameter(format!(
            "branching factor must be >= 1, got {k}"
        )))
    } else {
        Ok(())
    }
}

/// JSON form of a threshold spectral point: `{"k":2,"lambda":{"re":0,"im":0.1},"threshold":"minus"}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPointSpec {
    pub k: usize,
    pub lambda: ComplexValue,
    pub threshold: Threshold,
}

impl SpectralPointSpec {
    pub fn to_point(&self, eps0: f64) -> Result<SpectralPoint> {
        SpectralPoint::from_lambda(self.k, self.lambda.into(), self.threshold, eps0)
    }
}

/// `(1/2π)∫ e^{inθ}(2 - 2cos θ - u)^{-1} dθ = i w^{|n|}/D`.
pub fn fourier_coefficient(n: i64, sp: &SpectralPoint) -> Result<C64> {
    sp.check_d()?;
    Ok(C64::i() * sp.w.powu(n.unsigned_abs() as u32) / sp.d)
}

/// `i(w^{a_diff} - w^{a_sum})/D`.
pub fn bracket(a_diff: usize, a_sum: usize, sp: &SpectralPoint) -> Result<C64> {
    sp.check_d()?;
    Ok(C64::i() * (sp.w.powu(a_diff as u32) - sp.w.powu(a_sum as u32)) / sp.d)
}

/// `(1/π)∫ (2 - 2cos θ - u)^{-1} sin((j+1)θ) sin((ℓ+1)θ) dθ` in closed form.
pub fn sine_projected_coefficient(j: usize, l: usize, sp: &SpectralPoint) -> Result<C64> {
    sine_projected_with(j, l, sp, SINE_PREFACTOR)
}

pub fn sine_projected_with(j: usize, l: usize, sp: &SpectralPoint, prefactor: f64) -> Result<C64> {
    Ok(prefactor * bracket(j.abs_diff(l), j + l + 2, sp)?)
}

/// Trapezoidal oracle for [`fourier_coefficient`].
pub fn fourier_coefficient_quadrature(n: i64, u: C64, nodes: usize) -> C64 {
    torus_mean(nodes, |th| {
        C64::from_polar(1.0, n as f64 * th) / (2.0 - 2.0 * th.cos() - u)
    })
}

/// Trapezoidal oracle for [`sine_projected_coefficient`].
pub fn sine_projected_quadrature(j: usize, l: usize, u: C64, nodes: usize) -> C64 {
    // (1/π)∫ = 2·(1/2π)∫
    2.0 * torus_mean(nodes, |th| {
        let s = ((j + 1) as f64 * th).sin() * ((l + 1) as f64 * th).sin();
        c64(s, 0.0) / (2.0 - 2.0 * th.cos() - u)
    })
}

/// Result of fixing the sine-projected constant against quadrature.
#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    /// Mean of `quadrature / bracket` over the grid.
    pub fitted: f64,
    /// Largest deviation of an individual ratio from `fitted`.
    pub spread: f64,
    /// Worst closed-form error with [`SINE_PREFACTOR`].
    pub derived_error: f64,
    /// Worst closed-form error with `√(2/π)`.
    pub printed_error: f64,
}

impl Calibration {
    pub fn derived_passes(&self, tol: f64) -> bool {
        self.derived_error <= tol
    }

    pub fn printed_passes(&self, tol: f64) -> bool {
        self.printed_error <= tol
    }
}

/// Calibrates the sine-projected constant on a `u`-grid for `j, ℓ ≤ jl_max`.
pub fn calibrate_sine_prefactor(us: &[C64], jl_max: usize, nodes: usize) -> Result<Calibration> {
    let mut ratios = Vec::new();
    let mut derived_error: f64 = 0.0;
    let mut printed_error: f64 = 0.0;
    for &u in us {
        let sp = SpectralPoint::from_u(1, u)?;
        for j in 0..=jl_max {
            for l in 0..=jl_max {
                let q = sine_projected_quadrature(j, l, u, nodes);
                let unit = bracket(j.abs_diff(l), j + l + 2, &sp)?;
                ratios.push(q / unit);
                derived_error = derived_error.max((SINE_PREFACTOR * unit - q).norm());
                printed_error = printed_error.max((printed_sine_prefactor() * unit - q).norm());
            }
        }
    }
    let mean: C64 = ratios.iter().sum::<C64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| (r - mean).norm()).fold(0.0, f64::max);
    Ok(Calibration {
        fitted: mean.re,
        spread: spread.max(mean.im.abs()),
        derived_error,
        printed_error,
    })
}

/// Dense kernel on a vertex set together with how it was built.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub vertices: Vec<usize>,
    pub entries: CMatrix,
    pub prefactor: f64,
    pub point: SpectralPoint,
}

/// Powers `w^p`, `p = 0..=max`, and the `λ`-derivatives of the brackets.
struct BracketTable {
    pw: Vec<C64>,
    d: C64,
    dphi: C64,
    dd: C64,
}

impl BracketTable {
    fn new(sp: &SpectralPoint, max_power: usize) -> Result<Self> {
        sp.check_d()?;
        let mut pw = Vec::with_capacity(max_power + 1);
        let mut acc = c64(1.0, 0.0);
        for _ in 0..=max_power {
            pw.push(acc);
            acc *= sp.w;
        }
        Ok(Self {
            pw,
            d: sp.d,
            dphi: sp.dphi_dlambda(),
            dd: sp.dd_dlambda(),
        })
    }

    fn value(&self, a_diff: usize, a_sum: usize) -> C64 {
        C64::i() * (self.pw[a_diff] - self.pw[a_sum]) / self.d
    }

    /// `d/dλ` of [`Self::value`], using `dw^a/dλ = i a Φ' w^a`.
    fn derivative(&self, a_diff: usize, a_sum: usize) -> C64 {
        let num = self.pw[a_diff] - self.pw[a_sum];
        let dnum = C64::i()
            * self.dphi
            * (a_diff as f64 * self.pw[a_diff] - a_sum as f64 * self.pw[a_sum]);
        C64::i() * (dnum * self.d - num * self.dd) / (self.d * self.d)
    }
}

/// Unweighted kernel `K0(v, v')` (and optionally `∂_λ K0`) on `vertices`.
///
/// Rows are computed in parallel; each entry sums over `n` in a fixed order.
pub fn free_kernel(
    b: &SphericalBasis,
    vertices: &[usize],
    sp: &SpectralPoint,
    derivative: bool,
) -> Result<(CMatrix, Option<CMatrix>)> {
    if sp.k != b.k() {
        return Err(Error::DimensionMismatch(format!(
            "spectral point has k = {}, basis has k = {}",
            sp.k,
            b.k()
        )));
    }
    let nv = b.vertex_count();
    if let Some(&bad) = vertices.iter().find(|&&v| v >= nv) {
        return Err(Error::IndexOutOfRange {
            vertex: bad,
            vertex_count: nv,
        });
    }
    let depths: Vec<usize> = vertices.iter().map(|&v| b.depth_of(v)).collect();
    let table = BracketTable::new(sp, 2 * b.depth() + 2)?;
    let pre = kernel_prefactor(b.k());
    let m = vertices.len();
    let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let (v, r) = (vertices[i], depths[i]);
            let mut row = vec![C64::default(); m];
            let mut drow = if derivative {
                vec![C64::default(); m]
            } else {
                Vec::new()
            };
            let mut profile = Vec::new();
            for jj in 0..m {
                let (w, rp) = (vertices[jj], depths[jj]);
                let mut s = C64::default();
                let mut ds = C64::default();
                b.overlap_profile(v, r, w, rp, &mut profile);
                for &(n, y) in &profile {
                    let (ad, asum) = (r.abs_diff(rp), r + rp - 2 * n + 2);
                    s += table.value(ad, asum) * y;
                    if derivative {
                        ds += table.derivative(ad, asum) * y;
                    }
                }
                row[jj] = s * pre;
                if derivative {
                    drow[jj] = ds * pre;
                }
            }
            (row, drow)
        })
        .collect();
    let k0 = CMatrix::from_fn(m, m, |i, j| rows[i].0[j]);
    let dk0 = derivative.then(|| CMatrix::from_fn(m, m, |i, j| rows[i].1[j]));
    Ok((k0, dk0))
}

/// `K(v, v') = A(v) conj(B(v')) K0(v, v')` over all vertices of the truncation.
pub fn weighted_resolvent_kernel(
    t: &TreeGraph,
    b: &SphericalBasis,
    a: &Diagonal,
    bw: &Diagonal,
    sp: &SpectralPoint,
) -> Result<KernelMatrix> {
    let n = t.vertex_count();
    if a.len() != n || bw.len() != n || b.depth() != t.depth() || b.k() != t.k() {
        return Err(Error::DimensionMismatch(
            "weights and basis must match the tree".into(),
        ));
    }
    let vertices: Vec<usize> = (0..n).collect();
    let (k0, _) = free_kernel(b, &vertices, sp, false)?;
    let entries = CMatrix::from_fn(n, n, |i, j| a[i] * bw[j].conj() * k0[(i, j)]);
    Ok(KernelMatrix {
        vertices,
        entries,
        prefactor: kernel_prefactor(t.k()),
        point: *sp,
    })
}

/// `(-L + k + 1 - z)^{-1}` of the truncated matrix, with no boundary term.
pub fn dense_resolvent(t: &TreeGraph, z: C64) -> Result<CMatrix> {
    let n = t.vertex_count();
    let h = free_operator(t) - CMatrix::identity(n, n) * z;
    inverse(&h).ok_or(Error::OnSpectrum { re: z.re, im: z.im })
}

/// Resolvent of the infinite tree restricted to the truncation: the truncated
/// matrix with the leaf self-energy `-√k w` (the Schur complement of the
/// `k` subtrees hanging off every leaf) added on the boundary sphere.
pub fn boundary_corrected_resolvent(t: &TreeGraph, sp: &SpectralPoint) -> Result<CMatrix> {
    if sp.k != t.k() {
        return Err(Error::DimensionMismatch("k mismatch".into()));
    }
    let n = t.vertex_count();
    let z = sp.eval_z();
    let mut h = free_operator(t) - CMatrix::identity(n, n) * z;
    let sigma = sp.w * (t.k() as f64).sqrt();
    for v in t.sphere(t.depth()) {
        h[(v, v)] -= sigma;
    }
    inverse(&h).ok_or(Error::OnSpectrum { re: z.re, im: z.im })
}

/// `A G conj(B)` entrywise for a dense resolvent `G`.
pub fn weight_dense(g: &CMatrix, a: &Diagonal, bw: &Diagonal) -> CMatrix {
    CMatrix::from_fn(g.nrows(), g.ncols(), |i, j| a[i] * bw[j].conj() * g[(i, j)])
}

fn disk_extremes(lambda_max: f64) -> (f64, f64) {
    // max of |w| (at least 1) and of |Φ/(2 sin Φ)| over |λ| <= λmax, attained on the circle
    let mut rho: f64 = 1.0;
    let mut kappa: f64 = 0.5;
    if lambda_max > 0.0 {
        for i in 0..256 {
            let l = C64::from_polar(lambda_max, 2.0 * PI * i as f64 / 256.0);
            let phi = 2.0 * (l / 2.0).asin();
            let w = (C64::i() * phi).exp();
            rho = rho.max(w.norm());
            kappa = kappa.max((phi / (2.0 * phi.sin())).norm());
        }
    }
    (rho, kappa)
}

/// Upper estimate of the Hilbert–Schmidt norm of `e₋ G e₋` carried by vertex
/// pairs with `max(|v|, |v'|) > R`, uniformly for `|λ| <= λmax`.
///
/// Per shell pair the kernel entry is at most
/// `(2κ/√k)(r+r'+2) ρ̂^{r+r'+2} e^{-δ(r+r')/2} k^{-|r-r'|/2} S_k` where
/// `ρ̂ = max|w|`, `κ = max|Φ/(2 sin Φ)|` and `S_k` bounds the sum over `n`;
/// squared entries are weighted by the `k^{r+r'}` vertex pairs of the shells.
pub fn tail_bound(k: usize, delta: f64, depth: usize, lambda_max: f64) -> Result<f64> {
    check_k(k)?;
    if !decay_assumption_holds(k, delta) {
        return Err(Error::AssumptionViolated(format!(
            "tail bound needs delta >= 6 ln k (k = {k}, delta = {delta})"
        )));
    }
    if !(0.0..2.0).contains(&lambda_max) {
        return Err(Error::InvalidParameter(format!(
            "lambda_max must lie in [0, 2), got {lambda_max}"
        )));
    }
    let (rho, kappa) = disk_extremes(lambda_max);
    let kf = k as f64;
    let q = kf * rho * rho * (-delta).exp();
    if q >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let extra = ((60.0 / -q.ln()).ceil() as usize + 8).min(4000);
    let rmax = depth + 1 + extra;
    let sk = kf.sqrt();
    let ln_entry = |r: usize, rp: usize| -> f64 {
        let s = (r + rp) as f64;
        let mult = if k == 1 {
            (r.min(rp) + 1) as f64
        } else {
            kf / (kf - 1.0)
        };
        (2.0 * kappa / sk * (s + 2.0) * mult).ln() + (s + 2.0) * rho.ln()
            - 0.5 * delta * s
            - 0.5 * r.abs_diff(rp) as f64 * kf.ln()
    };
    let mut total = 0.0;
    for r in 0..=rmax {
        for rp in 0..=rmax {
            if r.max(rp) <= depth {
                continue;
            }
            total += ((r + rp) as f64 * kf.ln() + 2.0 * ln_entry(r, rp)).exp();
        }
    }
    Ok(total.sqrt())
}

/// Smallest truncation depth whose [`tail_bound`] is at most `tol`.
pub fn depth_for_tolerance(k: usize, delta: f64, lambda_max: f64, tol: f64) -> Result<usize> {
    for r in 0..=500 {
        if tail_bound(k, delta, r, lambda_max)? <= tol {
            return Ok(r);
        }
    }
    Err(Error::NonConvergent {
        residual: tail_bound(k, delta, 500, lambda_max)?,
        nodes: 500,
    })
}
