//! The Birman–Schwinger operator `T(λ) = ±J√|M̃| G(z_{t₋}(λ)) √|M̃|` on the
//! support of `M̃`, the `γ`/`β` functions and the holomorphic part `Hol(λ)`.
//!
//! Near `t₋` the operator is `T_{+M̃}`; near `t₊` the parity map `Θ` turns the
//! problem into `T_{-M̃}` at `ω = 2(k+1) - z = z_{t₋}(λ)`, which is the same
//! kernel with the global sign flipped.
//!
//! A radial potential commutes with the spherical decomposition, so its `T` is
//! block diagonal in the lifted basis: block `n` has size `R_s - n + 1` and
//! multiplicity `dim Q_{n,n}`. That path is used for all counting; the dense
//! path is the general one and the cross-check.

use nalgebra::DVector;

use crate::decomposition::SphericalBasis;
use crate::error::{Error, Result};
use crate::linalg::BlockDiagonal;
use crate::operators::{AssumptionCheck, PotentialKind, PotentialSpec};
use crate::resolvent::{free_kernel, kernel_prefactor, working_radius, SpectralPoint, Threshold};
use crate::tree::TreeGraph;
use crate::{c64, CMatrix, Diagonal, C64};

/// `|M̃(v)|` below this is treated as outside the support.
pub const SUPPORT_FLOOR: f64 = 1e-14;

/// Below this `|λ|` the `γ`/`β` functions switch to their Maclaurin series.
pub const SERIES_RADIUS: f64 = 1e-3;

/// Highest power of `λ` kept in the series.
pub const SERIES_ORDER: usize = 8;

/// Calibrated constant `c'` in `T_{+M̃}(λ) = c'·J·Hol(λ)` when `Hol` carries
/// the kernel constant `i/(2√k)`.
pub const HOL_CONSTANT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// `T_{+M̃}` near `t₋`, `T_{-M̃}` near `t₊`.
    pub fn for_threshold(th: Threshold) -> Self {
        match th {
            Threshold::Minus => Sign::Plus,
            Threshold::Plus => Sign::Minus,
        }
    }
}

/// Polar decomposition `M̃ = J|M̃|` of a diagonal: `(J, √|M̃|)` with `J = 1` where `M̃ = 0`.
pub fn polar_factors(m_tilde: &Diagonal) -> (Diagonal, DVector<f64>) {
    let j = m_tilde.map(|m| {
        if m == C64::default() {
            c64(1.0, 0.0)
        } else {
            m / m.norm()
        }
    });
    let s = DVector::from_iterator(m_tilde.len(), m_tilde.iter().map(|m| m.norm().sqrt()));
    (j, s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaBeta {
    pub j: usize,
    pub l: usize,
    pub lambda: C64,
    pub gamma: C64,
    pub beta: C64,
}

impl GammaBeta {
    pub fn difference(&self) -> C64 {
        self.beta - self.gamma
    }
}

/// Maclaurin coefficients (orders `0..=SERIES_ORDER`) of
/// `g_a(λ) = (e^{iaΦ(λ)} - 1)/(λ√(4-λ²))`, `Φ = 2 arcsin(λ/2)`.
pub fn g_series_coeffs(a: usize) -> [C64; SERIES_ORDER + 1] {
    const N: usize = SERIES_ORDER + 2;
    // Φ(λ) = Σ 2 c_n (λ/2)^{2n+1}, c_n = (2n)!/(4^n (n!)² (2n+1))
    let mut phi = [0.0f64; N];
    let mut central = 1.0; // (2n)!/(4^n (n!)²)
    for n in 0.. {
        let p = 2 * n + 1;
        if p >= N {
            break;
        }
        phi[p] = 2.0 * central / (2 * n + 1) as f64 / 2f64.powi(p as i32);
        central *= (2 * n + 1) as f64 / (2 * n + 2) as f64;
    }
    // E = exp(i a Φ): E' = (i a Φ)' E
    let s: Vec<C64> = phi.iter().map(|&x| c64(0.0, a as f64 * x)).collect();
    let mut e = [C64::default(); N];
    e[0] = c64(1.0, 0.0);
    for m in 1..N {
        let mut acc = C64::default();
        for p in 1..=m {
            acc += s[p] * e[m - p] * p as f64;
        }
        e[m] = acc / m as f64;
    }
    // √(4-λ²) = 2 Σ binom(1/2, n) (-λ²/4)^n
    let mut root = [0.0f64; N];
    let mut binom = 1.0;
    for n in 0.. {
        if 2 * n >= N {
            break;
        }
        root[2 * n] = 2.0 * binom * (-0.25f64).powi(n as i32);
        binom *= (0.5 - n as f64) / (n + 1) as f64;
    }
    // ((E - 1)/λ) / √(4-λ²)
    let mut out = [C64::default(); SERIES_ORDER + 1];
    for m in 0..=SERIES_ORDER {
        let mut acc = e[m + 1];
        for p in 1..=m {
            acc -= out[m - p] * root[p];
        }
        out[m] = acc / root[0];
    }
    out
}

fn horner(coeffs: &[C64], x: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::default(), |acc, &c| acc * x + c)
}

/// `g_a` by its series; accurate for `|λ| < SERIES_RADIUS`.
pub fn g_series(a: usize, lambda: C64) -> C64 {
    horner(&g_series_coeffs(a), lambda)
}

/// `g_a` from the exponential form; loses relative accuracy as `λ → 0`.
pub fn g_exact(a: usize, lambda: C64) -> C64 {
    let u = lambda * lambda;
    let w = 1.0 - u / 2.0 + C64::i() * lambda * (1.0 - u / 4.0).sqrt();
    (w.powu(a as u32) - 1.0) / (lambda * (4.0 - u).sqrt())
}

/// Chebyshev form of `g_a`, free of cancellation:
/// `-(λ/2) U_{a-1}(√(1-λ²/4))² / √(4-λ²) + (i/2) U_{a-1}(1-λ²/2)`.
pub fn g_chebyshev(a: usize, lambda: C64) -> C64 {
    fn u_prev(a: usize, x: C64) -> C64 {
        // U_{a-1}(x) with U_{-1} = 0, U_0 = 1
        if a == 0 {
            return C64::default();
        }
        let (mut p, mut q) = (C64::default(), c64(1.0, 0.0));
        for _ in 1..a {
            let next = 2.0 * x * q - p;
            p = q;
            q = next;
        }
        q
    }
    let u = lambda * lambda;
    let half = u_prev(a, (1.0 - u / 4.0).sqrt());
    -(lambda / 2.0) * half * half / (4.0 - u).sqrt() + C64::i() / 2.0 * u_prev(a, 1.0 - u / 2.0)
}

/// `g_a(λ)`, switching to the series for `|λ| < SERIES_RADIUS`.
pub fn g_function(a: usize, lambda: C64) -> C64 {
    if a == 0 {
        C64::default()
    } else if lambda.norm() < SERIES_RADIUS {
        g_series(a, lambda)
    } else {
        g_exact(a, lambda)
    }
}

/// `dg_a/dλ`.
pub fn g_derivative(a: usize, lambda: C64) -> C64 {
    if a == 0 {
        return C64::default();
    }
    if lambda.norm() < SERIES_RADIUS {
        let c = g_series_coeffs(a);
        let d: Vec<C64> = (1..c.len()).map(|p| c[p] * p as f64).collect();
        return horner(&d, lambda);
    }
    let u = lambda * lambda;
    let root = (4.0 - u).sqrt();
    let w = 1.0 - u / 2.0 + C64::i() * lambda * (1.0 - u / 4.0).sqrt();
    let wa = w.powu(a as u32);
    let d = lambda * root;
    let dphi = 2.0 / root;
    let dd = (4.0 - 2.0 * u) / root;
    (C64::i() * a as f64 * dphi * wa * d - (wa - 1.0) * dd) / (d * d)
}

/// `γ = g_{j+ℓ+2}`, `β = g_{|j-ℓ|}`.
pub fn gamma_beta(j: usize, l: usize, lambda: C64) -> GammaBeta {
    GammaBeta {
        j,
        l,
        lambda,
        gamma: g_function(j + l + 2, lambda),
        beta: g_function(j.abs_diff(l), lambda),
    }
}

/// Finite matrix of `T(λ)` on the support with its polar factors.
#[derive(Clone, Debug)]
pub struct BsOperator {
    pub support: Vec<usize>,
    pub j: Diagonal,
    pub sqrt_abs: DVector<f64>,
    pub lambda: C64,
    pub sign: Sign,
    pub matrix: CMatrix,
}

#[derive(Clone, Copy, Debug)]
pub struct BsOptions {
    pub check: AssumptionCheck,
    /// Radius of the admissible `λ` disk; defaults to `min(δ/8, 0.3)`.
    pub disk_radius: Option<f64>,
    /// Ignore radial symmetry and always use the dense path.
    pub dense_only: bool,
}

impl Default for BsOptions {
    fn default() -> Self {
        Self {
            check: AssumptionCheck::Enforce,
            disk_radius: None,
            dense_only: false,
        }
    }
}

/// Per-sphere data of a radial potential on the ball of radius `R_s`.
#[derive(Clone, Debug)]
struct RadialLevels {
    j: Vec<C64>,
    sqrt_abs: Vec<f64>,
}

/// Evaluator of `λ ↦ T(λ)` for one potential and threshold.
#[derive(Clone, Debug)]
pub struct BirmanSchwinger {
    k: usize,
    threshold: Threshold,
    tree: TreeGraph,
    basis: SphericalBasis,
    support: Vec<usize>,
    m_tilde: Diagonal,
    j: Diagonal,
    sqrt_abs: DVector<f64>,
    radial: Option<RadialLevels>,
    disk_radius: f64,
}

impl BirmanSchwinger {
    pub fn new(k: usize, spec: &PotentialSpec, threshold: Threshold) -> Result<Self> {
        Self::with_options(k, spec, threshold, BsOptions::default())
    }

    pub fn with_options(
        k: usize,
        spec: &PotentialSpec,
        threshold: Threshold,
        opts: BsOptions,
    ) -> Result<Self> {
        let support_depth = match &spec.kind {
            PotentialKind::RadialExp { amplitude } => {
                let amp = C64::from(*amplitude).norm();
                if amp < SUPPORT_FLOOR {
                    0
                } else {
                    ((amp / SUPPORT_FLOOR).ln() / spec.delta).floor().max(0.0) as usize
                }
            }
            PotentialKind::Table { .. } => match spec.max_table_vertex() {
                None => 0,
                Some(v) => depth_of_vertex(k, v)?,
            },
        };
        let tree = TreeGraph::new(k, support_depth)?;
        match opts.check {
            AssumptionCheck::Enforce => spec.check_assumption(&tree)?,
            AssumptionCheck::Override => {}
        }
        let basis = SphericalBasis::build(&tree)?;
        let mut mt = spec.materialize(&tree);
        mt[0] -= 1.0;
        let support: Vec<usize> = (0..tree.vertex_count())
            .filter(|&v| mt[v].norm() >= SUPPORT_FLOOR)
            .collect();
        let m_tilde = Diagonal::from_iterator(support.len(), support.iter().map(|&v| mt[v]));
        let (j, sqrt_abs) = polar_factors(&m_tilde);
        let radial = (spec.is_radial() && !opts.dense_only).then(|| {
            let values: Vec<C64> = (0..=support_depth)
                .map(|r| mt[tree.sphere(r).start])
                .collect();
            let (j, s) = polar_factors(&Diagonal::from_vec(values));
            RadialLevels {
                j: j.iter().copied().collect(),
                sqrt_abs: s.iter().copied().collect(),
            }
        });
        Ok(Self {
            k,
            threshold,
            tree,
            basis,
            support,
            m_tilde,
            j,
            sqrt_abs,
            radial,
            disk_radius: opts
                .disk_radius
                .unwrap_or_else(|| working_radius(spec.delta)),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn sign(&self) -> Sign {
        Sign::for_threshold(self.threshold)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `M̃` on the support.
    pub fn m_tilde(&self) -> &Diagonal {
        &self.m_tilde
    }

    pub fn tree(&self) -> &TreeGraph {
        &self.tree
    }

    pub fn basis(&self) -> &SphericalBasis {
        &self.basis
    }

    pub fn disk_radius(&self) -> f64 {
        self.disk_radius
    }

    pub fn is_radial(&self) -> bool {
        self.radial.is_some()
    }

    /// Spectral point for `λ`, checked against the working disk.
    pub fn point(&self, lambda: C64) -> Result<SpectralPoint> {
        SpectralPoint::from_lambda(self.k, lambda, self.threshold, self.disk_radius)
    }

    /// Dense `T(λ)` on the support, and `∂_λ T` if asked.
    pub fn dense(&self, lambda: C64, derivative: bool) -> Result<(CMatrix, Option<CMatrix>)> {
        let sp = self.point(lambda)?;
        self.dense_at(&sp, derivative)
    }

    /// Dense `T` at an arbitrary spectral point (e.g. a sheet-swapped one).
    pub fn dense_at(
        &self,
        sp: &SpectralPoint,
        derivative: bool,
    ) -> Result<(CMatrix, Option<CMatrix>)> {
        let (k0, dk0) = free_kernel(&self.basis, &self.support, sp, derivative)?;
        let sign = self.sign().factor();
        let sandwich = |m: &CMatrix| {
            CMatrix::from_fn(m.nrows(), m.ncols(), |a, b| {
                self.j[a] * (sign * self.sqrt_abs[a] * self.sqrt_abs[b]) * m[(a, b)]
            })
        };
        Ok((sandwich(&k0), dk0.as_ref().map(sandwich)))
    }

    pub fn operator(&self, lambda: C64) -> Result<BsOperator> {
        let (matrix, _) = self.dense(lambda, false)?;
        Ok(BsOperator {
            support: self.support.clone(),
            j: self.j.clone(),
            sqrt_abs: self.sqrt_abs.clone(),
            lambda,
            sign: self.sign(),
            matrix,
        })
    }

    /// `T(λ)` as a block-diagonal matrix: the lifted-basis blocks for radial
    /// potentials, otherwise the dense matrix as one block.
    pub fn blocks(
        &self,
        lambda: C64,
        derivative: bool,
    ) -> Result<(BlockDiagonal, Option<BlockDiagonal>)> {
        let sp = self.point(lambda)?;
        self.blocks_at(&sp, derivative)
    }

    pub fn blocks_at(
        &self,
        sp: &SpectralPoint,
        derivative: bool,
    ) -> Result<(BlockDiagonal, Option<BlockDiagonal>)> {
        let Some(rad) = &self.radial else {
            let (t, dt) = self.dense_at(sp, derivative)?;
            return Ok((
                BlockDiagonal::new(vec![(1, t)]),
                dt.map(|d| BlockDiagonal::new(vec![(1, d)])),
            ));
        };
        let rs = self.tree.depth();
        let pre = kernel_prefactor(self.k);
        let sign = self.sign().factor();
        let w = sp.w;
        let d = sp.d;
        if d == C64::default() || !d.is_finite() {
            return Err(Error::BranchFailure(format!(
                "2 sin(phi) vanishes at u = {}",
                sp.u
            )));
        }
        let (dphi, dd) = (sp.dphi_dlambda(), sp.dd_dlambda());
        let pw: Vec<C64> = (0..=2 * rs + 2).map(|p| w.powu(p as u32)).collect();
        let coeff = |a: usize, b: usize| C64::i() * (pw[a] - pw[b]) / d;
        let dcoeff = |a: usize, b: usize| {
            let num = pw[a] - pw[b];
            let dnum = C64::i() * dphi * (a as f64 * pw[a] - b as f64 * pw[b]);
            C64::i() * (dnum * d - num * dd) / (d * d)
        };
        let mut blocks = Vec::new();
        let mut dblocks = Vec::new();
        for n in 0..=rs {
            let mult = self.basis.dim(n);
            if mult == 0 {
                continue;
            }
            let size = rs - n + 1;
            let entry = |l: usize, j: usize, f: &dyn Fn(usize, usize) -> C64| {
                rad.j[n + l]
                    * (sign * pre * rad.sqrt_abs[n + l] * rad.sqrt_abs[n + j])
                    * f(l.abs_diff(j), l + j + 2)
            };
            blocks.push((
                mult,
                CMatrix::from_fn(size, size, |l, j| entry(l, j, &coeff)),
            ));
            if derivative {
                dblocks.push((
                    mult,
                    CMatrix::from_fn(size, size, |l, j| entry(l, j, &dcoeff)),
                ));
            }
        }
        Ok((
            BlockDiagonal::new(blocks),
            derivative.then(|| BlockDiagonal::new(dblocks)),
        ))
    }

    /// Columns of the lifted basis of the support ball, ordered as the radial
    /// blocks (`n`, then copy `m`, then `j`). Only for radial evaluators.
    pub fn block_basis(&self) -> Option<CMatrix> {
        self.radial.as_ref()?;
        let nv = self.tree.vertex_count();
        let mut cols = Vec::with_capacity(nv);
        for n in 0..=self.tree.depth() {
            let d = self.basis.dim(n);
            let lb = self.basis.level_basis(n);
            for m in 0..d {
                for j in 0..=(self.tree.depth() - n) {
                    cols.push(lb.column(j * d + m).map(|x| c64(x, 0.0)));
                }
            }
        }
        // rows restricted to the support
        let full = CMatrix::from_columns(&cols);
        Some(CMatrix::from_fn(
            self.support.len(),
            full.ncols(),
            |a, c| full[(self.support[a], c)],
        ))
    }

    /// `Hol(λ)` on the support: kernel `(i/(2√k)) √|M̃(v)| √|M̃(v')| Σ_n (β - γ) Y_n`.
    /// Defined at `λ = 0`.
    pub fn hol(&self, lambda: C64) -> Result<CMatrix> {
        if !(lambda.norm() < self.disk_radius) {
            return Err(Error::OutOfDisk {
                modulus: lambda.norm(),
                radius: self.disk_radius,
            });
        }
        let b = &self.basis;
        let depths: Vec<usize> = self.support.iter().map(|&v| b.depth_of(v)).collect();
        let rs = self.tree.depth();
        let g: Vec<C64> = (0..=2 * rs + 2).map(|a| g_function(a, lambda)).collect();
        let pre = C64::i() / (2.0 * (self.k as f64).sqrt());
        let m = self.support.len();
        Ok(CMatrix::from_fn(m, m, |a, c| {
            let (v, w) = (self.support[a], self.support[c]);
            let (r, rp) = (depths[a], depths[c]);
            let mut s = C64::default();
            for n in 0..=r.min(rp) {
                let y = b.lifted_overlap(n, v, w);
                if y != 0.0 {
                    // β - γ with j = r - n, ℓ = r' - n
                    s += (g[r.abs_diff(rp)] - g[r + rp - 2 * n + 2]) * y;
                }
            }
            pre * self.sqrt_abs[a] * self.sqrt_abs[c] * s
        }))
    }

    /// `Hol(λ)` and `‖T(λ) - sign·c'·J·Hol(λ)‖_F` (absent at `λ = 0`, where `T` itself is undefined).
    pub fn hol_split(&self, lambda: C64) -> Result<(CMatrix, Option<f64>)> {
        let hol = self.hol(lambda)?;
        if lambda == C64::default() {
            return Ok((hol, None));
        }
        let (t, _) = self.dense(lambda, false)?;
        let scale = self.sign().factor() * HOL_CONSTANT;
        let rec = CMatrix::from_fn(hol.nrows(), hol.ncols(), |a, c| {
            self.j[a] * scale * hol[(a, c)]
        });
        Ok((hol, Some((t - rec).norm())))
    }
}

fn depth_of_vertex(k: usize, v: usize) -> Result<usize> {
    if k == 1 {
        return Ok(v);
    }
    let mut depth = 0;
    let mut first = 0usize; // first index of the current sphere
    let mut size = 1usize;
    while v >= first + size {
        first += size;
        size = size.checked_mul(k).ok_or(Error::CapacityExceeded {
            requested: u128::MAX,
            cap: usize::MAX,
        })?;
        depth += 1;
    }
    Ok(depth)
}
