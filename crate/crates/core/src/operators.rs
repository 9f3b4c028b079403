//! The tree operators as dense matrices and diagonals.
//!
//! Structural operators (`L`, `Π`, `Π*`, `-Δ`, `Θ`, `e_±`) are real; anything
//! carrying the potential is complex. The Laplacian is always formed with the
//! infinite-tree degree `k + 1 - d₀`, so the truncated operator is the
//! compression of the infinite one to the ball of radius `R`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::TreeGraph;
use crate::{CMatrix, Diagonal, C64};

pub type RMatrix = DMatrix<f64>;

/// Adjacency operator `L`.
pub fn adjacency(t: &TreeGraph) -> RMatrix {
    let n = t.vertex_count();
    let mut a = RMatrix::zeros(n, n);
    for (p, c) in t.edges() {
        a[(p, c)] = 1.0;
        a[(c, p)] = 1.0;
    }
    a
}

/// Matrix-free adjacency for trees too large for dense storage.
#[derive(Clone, Copy, Debug)]
pub struct SparseAdjacency<'a> {
    tree: &'a TreeGraph,
}

impl<'a> SparseAdjacency<'a> {
    pub fn new(tree: &'a TreeGraph) -> Self {
        Self { tree }
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.tree.vertex_count());
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (p, c) in self.tree.edges() {
            y[p] += x[c];
            y[c] += x[p];
        }
        y
    }
}

/// Raising operator `(Πφ)(v) = φ(parent(v))`, mapping `ℓ²(S_r)` into `ℓ²(S_{r+1})`.
pub fn raising(t: &TreeGraph) -> RMatrix {
    let n = t.vertex_count();
    let mut pi = RMatrix::zeros(n, n);
    for (p, c) in t.edges() {
        pi[(c, p)] = 1.0;
    }
    pi
}

/// Lowering operator `Π*`, summing over children.
pub fn lowering(t: &TreeGraph) -> RMatrix {
    raising(t).transpose()
}

#[derive(Clone, Debug)]
pub struct DegreeTerms {
    /// Infinite-tree degree `k + 1 - d₀`.
    pub d: DVector<f64>,
    /// Root indicator `d₀`.
    pub d0: DVector<f64>,
    /// Degree inside the truncation; differs from `d` on the boundary sphere.
    pub truncated: DVector<f64>,
}

pub fn degree_terms(t: &TreeGraph) -> DegreeTerms {
    let n = t.vertex_count();
    let k = t.k() as f64;
    let mut d0 = DVector::zeros(n);
    d0[0] = 1.0;
    let d = DVector::from_fn(n, |v, _| k + 1.0 - d0[v]);
    let mut truncated = DVector::zeros(n);
    for (p, c) in t.edges() {
        truncated[p] += 1.0;
        truncated[c] += 1.0;
    }
    DegreeTerms { d, d0, truncated }
}

/// `-Δ = -L + d` with the infinite-tree degree.
pub fn laplacian(t: &TreeGraph) -> RMatrix {
    let mut lap = -adjacency(t);
    let d = degree_terms(t).d;
    for v in 0..t.vertex_count() {
        lap[(v, v)] += d[v];
    }
    lap
}

/// `-L + k + 1 + M̃`, i.e. `-Δ_M̃` with `M̃ = -d₀ + M`.
pub fn perturbed_laplacian(t: &TreeGraph, m_tilde: &Diagonal) -> CMatrix {
    let n = t.vertex_count();
    assert_eq!(m_tilde.len(), n);
    let shift = (t.k() + 1) as f64;
    let mut h = adjacency(t).map(|x| C64::new(-x, 0.0));
    for v in 0..n {
        h[(v, v)] += m_tilde[v] + shift;
    }
    h
}

/// `-L + k + 1`, the unperturbed operator whose resolvent the kernel represents.
pub fn free_operator(t: &TreeGraph) -> CMatrix {
    perturbed_laplacian(t, &Diagonal::zeros(t.vertex_count()))
}

/// Parity operator `(Θφ)(v) = (-1)^{|v|} φ(v)`.
pub fn theta(t: &TreeGraph) -> DVector<f64> {
    DVector::from_iterator(
        t.vertex_count(),
        t.depths()
            .into_iter()
            .map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }),
    )
}

/// Exponential weights `e_∓(v) = e^{∓(δ/2)|v|}`, returned as `(e_minus, e_plus)`.
pub fn weights(t: &TreeGraph, delta: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight exponent must be positive, got {delta}"
        )));
    }
    let depths = t.depths();
    let minus = DVector::from_iterator(
        depths.len(),
        depths.iter().map(|&r| (-0.5 * delta * r as f64).exp()),
    );
    let plus = minus.map(|x| 1.0 / x);
    Ok((minus, plus))
}

/// Whether `δ` satisfies the decay requirement for branching `k`.
pub fn decay_assumption_holds(k: usize, delta: f64) -> bool {
    if k <= 1 {
        delta > 0.0
    } else {
        delta >= 6.0 * (k as f64).ln()
    }
}

/// Smallest decay rate accepted for branching `k` (0 for the half-line).
pub fn minimal_delta(k: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        6.0 * (k as f64).ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<ComplexValue> for C64 {
    fn from(c: ComplexValue) -> Self {
        C64::new(c.re, c.im)
    }
}

impl From<C64> for ComplexValue {
    fn from(c: C64) -> Self {
        ComplexValue { re: c.re, im: c.im }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub v: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `M(v) = amplitude · e^{-δ|v|}`.
    RadialExp { amplitude: ComplexValue },
    /// Explicit per-vertex values; unlisted vertices carry zero.
    Table { values: Vec<TableEntry> },
}

/// Per-vertex complex potential `M` with its decay certificate `(C, δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    pub delta: f64,
    /// Decay constant `C`; estimated from the values when absent.
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

/// Whether materialization enforces the decay assumption.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssumptionCheck {
    Enforce,
    /// Skip the check; meant for negative tests and controls.
    Override,
}

impl PotentialSpec {
    pub fn radial_exp(amplitude: C64, delta: f64) -> Self {
        Self {
            kind: PotentialKind::RadialExp {
                amplitude: amplitude.into(),
            },
            delta,
            constant: None,
        }
    }

    pub fn table(values: impl IntoIterator<Item = (usize, C64)>, delta: f64) -> Self {
        Self {
            kind: PotentialKind::Table {
                values: values
                    .into_iter()
                    .map(|(v, m)| TableEntry {
                        v,
                        re: m.re,
                        im: m.im,
                    })
                    .collect(),
            },
            delta,
            constant: None,
        }
    }

    pub fn zero() -> Self {
        Self::table(std::iter::empty(), 1.0)
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = Some(c);
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate_shape()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "potential decay rate must be positive, got {}",
                self.delta
            )));
        }
        if let Some(c) = self.constant {
            if !(c >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "decay constant must be non-negative, got {c}"
                )));
            }
        }
        if let PotentialKind::Table { values } = &self.kind {
            let mut seen = std::collections::BTreeSet::new();
            for e in values {
                if !seen.insert(e.v) {
                    return Err(Error::InvalidParameter(format!(
                        "vertex {} listed twice in potential table",
                        e.v
                    )));
                }
                if !e.re.is_finite() || !e.im.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite potential value at vertex {}",
                        e.v
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, PotentialKind::RadialExp { .. })
    }

    /// True when every value of `M` is real, i.e. `M = M*`.
    pub fn is_self_adjoint(&self) -> bool {
        match &self.kind {
            PotentialKind::RadialExp { amplitude } => amplitude.im == 0.0,
            PotentialKind::Table { values } => values.iter().all(|e| e.im == 0.0),
        }
    }

    /// `M(v)` for a vertex at depth `r`.
    pub fn value(&self, v: usize, r: usize) -> C64 {
        match &self.kind {
            PotentialKind::RadialExp { amplitude } => {
                C64::from(*amplitude) * (-self.delta * r as f64).exp()
            }
            PotentialKind::Table { values } => values
                .iter()
                .find(|e| e.v == v)
                .map(|e| C64::new(e.re, e.im))
                .unwrap_or_default(),
        }
    }

    /// Largest vertex index carrying a nonzero table value.
    pub fn max_table_vertex(&self) -> Option<usize> {
        match &self.kind {
            PotentialKind::Table { values } => values
                .iter()
                .filter(|e| e.re != 0.0 || e.im != 0.0)
                .map(|e| e.v)
                .max(),
            PotentialKind::RadialExp { .. } => None,
        }
    }

    /// `M` on the truncation (table entries outside it are dropped).
    pub fn materialize(&self, t: &TreeGraph) -> Diagonal {
        let mut m = Diagonal::zeros(t.vertex_count());
        match &self.kind {
            PotentialKind::RadialExp { .. } => {
                for (v, r) in t.depths().into_iter().enumerate() {
                    m[v] = self.value(v, r);
                }
            }
            PotentialKind::Table { values } => {
                for e in values.iter().filter(|e| e.v < t.vertex_count()) {
                    m[e.v] = C64::new(e.re, e.im);
                }
            }
        }
        m
    }

    /// `C` as supplied, else `max_v |M(v)| e^{δ|v|}` over the truncation.
    pub fn decay_constant(&self, t: &TreeGraph) -> f64 {
        self.constant.unwrap_or_else(|| self.estimated_constant(t))
    }

    pub fn estimated_constant(&self, t: &TreeGraph) -> f64 {
        let m = self.materialize(t);
        t.depths()
            .into_iter()
            .enumerate()
            .map(|(v, r)| m[v].norm() * (self.delta * r as f64).exp())
            .fold(0.0, f64::max)
    }

    /// Checks the decay rate against the decay assumption and the certificate
    /// `|M(v)| <= C e^{-δ|v|}` on the truncation.
    pub fn check_assumption(&self, t: &TreeGraph) -> Result<()> {
        self.validate_shape()?;
        let k = t.k();
        // the zero potential decays at every rate
        let vanishes = self.materialize(t).iter().all(|m| *m == C64::default());
        if !vanishes && !decay_assumption_holds(k, self.delta) {
            return Err(Error::AssumptionViolated(format!(
                "delta = {} but k = {k} requires {}",
                self.delta,
                if k == 1 {
                    "delta > 0".to_string()
                } else {
                    format!("delta >= 6 ln k = {}", minimal_delta(k))
                }
            )));
        }
        let c = self.decay_constant(t);
        let m = self.materialize(t);
        for (v, r) in t.depths().into_iter().enumerate() {
            let bound = c * (-self.delta * r as f64).exp();
            if m[v].norm() > bound * (1.0 + 1e-12) {
                return Err(Error::AssumptionViolated(format!(
                    "|M({v})| = {} exceeds C e^(-delta |v|) = {bound}",
                    m[v].norm()
                )));
            }
        }
        Ok(())
    }
}

/// Multiplication operator by `M`.
pub fn potential_matrix(
    t: &TreeGraph,
    spec: &PotentialSpec,
    check: AssumptionCheck,
) -> Result<Diagonal> {
    if check == AssumptionCheck::Enforce {
        spec.check_assumption(t)?;
    } else {
        spec.validate_shape()?;
    }
    Ok(spec.materialize(t))
}

/// `M̃ = -d₀ + M`.
pub fn m_tilde(t: &TreeGraph, spec: &PotentialSpec, check: AssumptionCheck) -> Result<Diagonal> {
    let mut m = potential_matrix(t, spec, check)?;
    m[0] -= 1.0;
    Ok(m)
}
