//! Characteristic values of `λ ↦ I + T(λ)`: contour-integral counting,
//! determinant winding, the `-1` eigenvalue indicator, the threshold absence
//! scan, Riesz multiplicities and spectra of the truncated operator.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::birman_schwinger::BirmanSchwinger;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, inverse, singular_values, symmetric_eigenvalues, BlockDiagonal};
use crate::operators::{
    m_tilde, perturbed_laplacian, AssumptionCheck, ComplexValue, PotentialSpec,
};
use crate::quadrature::circle_nodes;
use crate::tree::TreeGraph;
use crate::{t_minus, t_plus, CMatrix, C64};

pub const DEFAULT_NODES: usize = 256;

/// Positively oriented circle used as a contour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub center: C64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: C64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "contour radius must be positive, got {radius}"
            )));
        }
        if nodes < 16 {
            return Err(Error::InvalidParameter(format!(
                "contour needs at least 16 nodes, got {nodes}"
            )));
        }
        Ok(Self {
            center,
            radius,
            nodes,
        })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(C64::default(), radius, DEFAULT_NODES)
    }
}

/// Certification thresholds for [`contour_index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexOptions {
    pub residual_tol: f64,
    pub min_sv_tol: f64,
    /// Number of times the node count may double after a failed residual check.
    pub max_doublings: u32,
    /// Nodes sit at `θ_j = 2π(j + offset)/N`.
    pub node_offset: f64,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            residual_tol: 0.1,
            min_sv_tol: 1e-10,
            max_doublings: 2,
            node_offset: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub raw: ComplexValue,
    pub rounded: i64,
    pub residual: f64,
    pub min_sv: f64,
    #[serde(skip)]
    pub nodes: usize,
}

impl IndexReport {
    pub fn raw(&self) -> C64 {
        self.raw.into()
    }

    pub fn is_certified(&self, opts: &IndexOptions) -> bool {
        self.residual < opts.residual_tol && self.min_sv > opts.min_sv_tol
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// A holomorphic matrix family `λ ↦ F(λ)`, optionally with `F'(λ)`.
pub trait HolomorphicFamily: Sync {
    fn eval(&self, lambda: C64, derivative: bool)
        -> Result<(BlockDiagonal, Option<BlockDiagonal>)>;
}

/// Family given by a closure returning a dense `F` and optional `F'`.
pub struct FnFamily<F>(pub F);

impl<F> HolomorphicFamily for FnFamily<F>
where
    F: Fn(C64) -> (CMatrix, Option<CMatrix>) + Sync,
{
    fn eval(
        &self,
        lambda: C64,
        _derivative: bool,
    ) -> Result<(BlockDiagonal, Option<BlockDiagonal>)> {
        let (f, df) = (self.0)(lambda);
        Ok((
            BlockDiagonal::new(vec![(1, f)]),
            df.map(|d| BlockDiagonal::new(vec![(1, d)])),
        ))
    }
}

/// `F(λ) = I + T(λ)` for a Birman–Schwinger evaluator.
pub struct IPlusT<'a>(pub &'a BirmanSchwinger);

impl HolomorphicFamily for IPlusT<'_> {
    fn eval(
        &self,
        lambda: C64,
        derivative: bool,
    ) -> Result<(BlockDiagonal, Option<BlockDiagonal>)> {
        let (t, dt) = self.0.blocks(lambda, derivative)?;
        Ok((t.identity_plus(), dt))
    }
}

/// Complex central difference step relative to the contour radius.
pub const FD_STEP: f64 = 1e-6;

fn derivative_at(
    f: &dyn HolomorphicFamily,
    lambda: C64,
    h: f64,
) -> Result<(BlockDiagonal, BlockDiagonal)> {
    let (val, d) = f.eval(lambda, true)?;
    if let Some(d) = d {
        return Ok((val, d));
    }
    let (p, _) = f.eval(lambda + h, false)?;
    let (m, _) = f.eval(lambda - h, false)?;
    let blocks = p
        .blocks
        .iter()
        .zip(&m.blocks)
        .map(|((mult, a), (_, b))| (*mult, (a - b) / C64::new(2.0 * h, 0.0)))
        .collect();
    Ok((val, BlockDiagonal::new(blocks)))
}

/// `(1/2πi) ∮ Tr[F(λ)⁻¹ F'(λ)] dλ` by the trapezoidal rule, rounded and certified.
pub fn contour_index(
    f: &dyn HolomorphicFamily,
    c: &ContourSpec,
    opts: &IndexOptions,
) -> Result<IndexReport> {
    let mut last = None;
    for attempt in 0..=opts.max_doublings {
        let n = c.nodes << attempt;
        let nodes = circle_nodes(c.center, c.radius, n, opts.node_offset);
        let h = FD_STEP * c.radius;
        let per_node: Vec<Result<(C64, f64)>> = nodes
            .par_iter()
            .map(|&(z, e)| {
                let (val, d) = derivative_at(f, z, h)?;
                let sv = val.min_singular_value();
                if sv <= opts.min_sv_tol {
                    return Err(Error::SingularOnContour {
                        min_sv: sv,
                        threshold: opts.min_sv_tol,
                    });
                }
                let tr = val.trace_inv_times(&d).ok_or(Error::SingularOnContour {
                    min_sv: sv,
                    threshold: opts.min_sv_tol,
                })?;
                Ok((tr * e, sv))
            })
            .collect();
        let mut sum = C64::default();
        let mut min_sv = f64::INFINITY;
        for r in per_node {
            let (v, sv) = r?;
            sum += v;
            min_sv = min_sv.min(sv);
        }
        let raw = sum / n as f64;
        let rounded = raw.re.round();
        let residual = (raw - rounded).norm();
        let report = IndexReport {
            raw: raw.into(),
            rounded: rounded as i64,
            residual,
            min_sv,
            nodes: n,
        };
        if residual < opts.residual_tol {
            return Ok(report);
        }
        last = Some(report);
    }
    let last = last.expect("at least one attempt");
    Err(Error::NonConvergent {
        residual: last.residual,
        nodes: last.nodes,
    })
}

/// Winding number of `det F` along the contour, by phase unwrapping.
pub fn determinant_winding(
    f: &dyn HolomorphicFamily,
    c: &ContourSpec,
    opts: &IndexOptions,
) -> Result<f64> {
    let nodes = circle_nodes(c.center, c.radius, c.nodes, opts.node_offset);
    let dets: Vec<C64> = nodes
        .par_iter()
        .map(|&(z, _)| f.eval(z, false).map(|(v, _)| v.determinant()))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for i in 0..dets.len() {
        let (a, b) = (dets[i], dets[(i + 1) % dets.len()]);
        if a == C64::default() || b == C64::default() {
            return Err(Error::SingularOnContour {
                min_sv: 0.0,
                threshold: opts.min_sv_tol,
            });
        }
        total += (b / a).arg();
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Eigenvalues of `T(λ)` and their distance to `-1`.
#[derive(Clone, Debug)]
pub struct Indicator {
    pub eigs: Vec<C64>,
    pub dist_to_minus_one: f64,
    /// Smallest singular value of `I + T(λ)`.
    pub min_sv: f64,
    /// Largest singular value of `T(λ)`.
    pub norm: f64,
}

impl Indicator {
    /// `dist < 1e-6·(1 + ‖T‖)`.
    pub fn is_resonance(&self) -> bool {
        self.dist_to_minus_one < 1e-6 * (1.0 + self.norm)
    }
}

pub fn resonance_indicator(bs: &BirmanSchwinger, lambda: C64) -> Result<Indicator> {
    let (t, _) = bs.blocks(lambda, false)?;
    Ok(indicator_from_blocks(&t))
}

fn indicator_from_blocks(t: &BlockDiagonal) -> Indicator {
    let eigs = t.eigenvalues();
    let dist = eigs
        .iter()
        .map(|e| (e + 1.0).norm())
        .fold(f64::INFINITY, f64::min);
    Indicator {
        eigs,
        dist_to_minus_one: dist,
        min_sv: t.identity_plus().min_singular_value(),
        norm: t.max_singular_value(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub dist_minus_one: f64,
    pub min_sv: f64,
}

#[derive(Clone, Debug)]
pub struct LadderEntry {
    pub radius: f64,
    pub report: std::result::Result<IndexReport, String>,
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub ladder: Vec<LadderEntry>,
    pub min_sv: f64,
    pub min_dist: f64,
}

impl ScanReport {
    /// Every ladder circle certified with index 0 at the given residual.
    pub fn all_zero(&self, residual_tol: f64) -> bool {
        self.ladder
            .iter()
            .all(|e| matches!(&e.report, Ok(r) if r.rounded == 0 && r.residual < residual_tol))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_scan_csv(&self.rows, out)
    }
}

/// CSV with header `re_lambda,im_lambda,dist_minus_one,min_sv`, 17 significant digits.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re_lambda", "im_lambda", "dist_minus_one", "min_sv"])?;
    for r in rows {
        w.write_record([
            format!("{:.16e}", r.re_lambda),
            format!("{:.16e}", r.im_lambda),
            format!("{:.16e}", r.dist_minus_one),
            format!("{:.16e}", r.min_sv),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_csv<R: std::io::Read>(input: R) -> Result<Vec<ScanRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ScanRow>, _>>()?;
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct ScanParams {
    pub r_min: f64,
    pub r_max: f64,
    /// The annulus grid is `grid` radii by `grid` angles.
    pub grid: usize,
    /// Ladder radii; defaults to `r_min·2^i ≤ r_max`.
    pub ladder: Option<Vec<f64>>,
    pub nodes: usize,
    pub index: IndexOptions,
}

impl ScanParams {
    pub fn new(r_min: f64, r_max: f64, grid: usize) -> Self {
        Self {
            r_min,
            r_max,
            grid,
            ladder: None,
            nodes: DEFAULT_NODES,
            index: IndexOptions::default(),
        }
    }

    pub fn ladder_radii(&self) -> Vec<f64> {
        self.ladder.clone().unwrap_or_else(|| {
            let mut out = Vec::new();
            let mut r = self.r_min;
            while r <= self.r_max * (1.0 + 1e-12) {
                out.push(r);
                r *= 2.0;
            }
            out
        })
    }

    /// Grid points, radius-major: radii evenly spaced over `[r_min, r_max]`,
    /// angles `2π(j + 1/2)/grid`.
    pub fn grid_points(&self) -> Vec<C64> {
        let g = self.grid;
        let mut pts = Vec::with_capacity(g * g);
        for i in 0..g {
            let r = if g == 1 {
                self.r_min
            } else {
                self.r_min + (self.r_max - self.r_min) * i as f64 / (g - 1) as f64
            };
            for j in 0..g {
                let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / g as f64;
                pts.push(C64::from_polar(r, th));
            }
        }
        pts
    }
}

/// Index on a ladder circle, nudging the radius outward if a node is singular.
fn ladder_index(
    bs: &BirmanSchwinger,
    r: f64,
    p: &ScanParams,
) -> std::result::Result<IndexReport, String> {
    let mut radius = r;
    let mut last = String::new();
    for _ in 0..3 {
        let c = ContourSpec::new(C64::default(), radius, p.nodes).map_err(|e| e.to_string())?;
        match contour_index(&IPlusT(bs), &c, &p.index) {
            Ok(rep) => return Ok(rep),
            Err(e @ Error::SingularOnContour { .. }) => {
                last = e.to_string();
                radius *= 1.01;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Err(last)
}

/// Threshold absence scan: index on every ladder circle plus `min_sv` and
/// the distance to `-1` on the annulus grid. Failures of individual circles
/// are recorded in the report rather than aborting the scan.
pub fn absence_scan(bs: &BirmanSchwinger, p: &ScanParams) -> Result<ScanReport> {
    let eps0 = bs.disk_radius();
    if !(0.0 < p.r_min && p.r_min < p.r_max && p.r_max < eps0) {
        return Err(Error::InvalidParameter(format!(
            "annulus must satisfy 0 < r_min < r_max < {eps0}, got ({}, {})",
            p.r_min, p.r_max
        )));
    }
    if p.grid == 0 {
        return Err(Error::InvalidParameter("grid must be positive".into()));
    }
    let rows: Vec<ScanRow> = p
        .grid_points()
        .par_iter()
        .map(|&l| {
            resonance_indicator(bs, l).map(|ind| ScanRow {
                re_lambda: l.re,
                im_lambda: l.im,
                dist_minus_one: ind.dist_to_minus_one,
                min_sv: ind.min_sv,
            })
        })
        .collect::<Result<_>>()?;
    let ladder = p
        .ladder_radii()
        .into_iter()
        .map(|r| LadderEntry {
            radius: r,
            report: ladder_index(bs, r, p),
        })
        .collect();
    let min_sv = rows.iter().map(|r| r.min_sv).fold(f64::INFINITY, f64::min);
    let min_dist = rows
        .iter()
        .map(|r| r.dist_minus_one)
        .fold(f64::INFINITY, f64::min);
    Ok(ScanReport {
        rows,
        ladder,
        min_sv,
        min_dist,
    })
}

/// Rank of the Riesz projection `(1/2πi)∮(ζ - op)⁻¹ dζ` around `z0`.
///
/// Eigenvalues within `radius/2` of `z0` count as the cluster at `z0`; every
/// other eigenvalue must be at least `2·radius` away.
pub fn riesz_multiplicity(op: &CMatrix, z0: C64, c: &ContourSpec) -> Result<usize> {
    if op.nrows() != op.ncols() {
        return Err(Error::DimensionMismatch(
            "Riesz projection needs a square matrix".into(),
        ));
    }
    for e in eigenvalues(op) {
        let d = (e - z0).norm();
        if d >= 0.5 * c.radius && d < 2.0 * c.radius {
            return Err(Error::NotIsolated {
                distance: d,
                radius: c.radius,
            });
        }
    }
    let n = op.nrows();
    let nodes = circle_nodes(z0, c.radius, c.nodes, 0.5);
    let mut p = CMatrix::zeros(n, n);
    for (z, e) in nodes {
        let resolvent =
            inverse(&(CMatrix::identity(n, n) * z - op)).ok_or(Error::SingularOnContour {
                min_sv: 0.0,
                threshold: 0.0,
            })?;
        p += resolvent * e;
    }
    p /= C64::new(c.nodes as f64, 0.0);
    Ok(singular_values(&p).into_iter().filter(|&s| s > 0.5).count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub re: f64,
    pub im: f64,
    /// Inside `[t₋, t₊]` (to `1e-10`) on the real axis.
    pub in_band: bool,
}

impl SpectrumPoint {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Tolerance for tagging an eigenvalue as inside the band.
pub const BAND_TOL: f64 = 1e-10;

/// Eigenvalues of the truncated `-Δ_M̃`, sorted by real part, tagged by band membership.
pub fn spectrum(
    t: &TreeGraph,
    spec: &PotentialSpec,
    check: AssumptionCheck,
) -> Result<Vec<SpectrumPoint>> {
    let mt = m_tilde(t, spec, check)?;
    let h = perturbed_laplacian(t, &mt);
    let mut eigs: Vec<C64> = if spec.is_self_adjoint() {
        symmetric_eigenvalues(&h.map(|x| x.re))
            .into_iter()
            .map(|x| C64::new(x, 0.0))
            .collect()
    } else {
        eigenvalues(&h)
    };
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let (lo, hi) = (t_minus(t.k()), t_plus(t.k()));
    Ok(eigs
        .into_iter()
        .map(|e| SpectrumPoint {
            re: e.re,
            im: e.im,
            in_band: e.im.abs() <= BAND_TOL && e.re >= lo - BAND_TOL && e.re <= hi + BAND_TOL,
        })
        .collect())
}

pub fn write_spectrum_csv<W: Write>(points: &[SpectrumPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re", "im", "in_band"])?;
    for p in points {
        w.write_record([
            format!("{:.16e}", p.re),
            format!("{:.16e}", p.im),
            p.in_band.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
