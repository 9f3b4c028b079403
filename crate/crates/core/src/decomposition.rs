//! Orthogonal splitting `ℓ²(𝒱) = ⊕_n M_n`, `M_n = ⊕_j Q_{n,n+j}`.
//!
//! `Q_{0,0} = ℓ²(S_0)` and `Q_{n,n} = ℓ²(S_n) ⊖ Π ℓ²(S_{n-1})`. The image of `Π`
//! is the space of functions constant on each sibling group, so `Q_{n,n}` is
//! the space of functions summing to zero over every group of `k` siblings.
//! Every group carries the same local complement, so one orthonormal
//! `k × (k-1)` block is certified once and reused for all groups and levels.
//! The lifted vectors are `E^{n,n+j} = (Π/√k)^j χ`, which reuse the χ-basis
//! across `j`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::{adjacency, RMatrix};
use crate::tree::TreeGraph;

/// Relative singular-value floor for accepting a Gram–Schmidt direction.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SphericalBasis {
    k: usize,
    depth: usize,
    /// Sphere starts followed by the vertex count.
    offsets: Vec<usize>,
    /// Orthonormal basis of the zero-sum vectors of `ℂ^k`, one column per χ in a group.
    group_basis: RMatrix,
    /// `group_basis · group_basisᵀ`, the projector onto zero-sum vectors.
    group_gram: RMatrix,
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Returns the
/// accepted orthonormal columns.
fn gram_schmidt(candidates: &RMatrix, rel_tol: f64) -> Vec<nalgebra::DVector<f64>> {
    let scale = candidates
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let mut accepted: Vec<nalgebra::DVector<f64>> = Vec::new();
    for col in candidates.column_iter() {
        let mut x = col.clone_owned();
        for _ in 0..2 {
            for q in &accepted {
                let p = q.dot(&x);
                x.axpy(-p, q, 1.0);
            }
        }
        let nrm = x.norm();
        if nrm > rel_tol * scale {
            accepted.push(x / nrm);
        }
    }
    accepted
}

impl SphericalBasis {
    pub fn build(t: &TreeGraph) -> Result<Self> {
        let k = t.k();
        let group_basis = if k == 1 {
            RMatrix::zeros(1, 0)
        } else {
            // e_i minus the group mean: spans the complement of the raised indicator
            let candidates = RMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    1.0 - 1.0 / k as f64
                } else {
                    -1.0 / k as f64
                }
            });
            let found = gram_schmidt(&candidates, RANK_TOLERANCE);
            if found.len() != k - 1 {
                return Err(Error::NumericalRankFailure {
                    level: 1,
                    found: found.len(),
                    expected: k - 1,
                });
            }
            RMatrix::from_columns(&found)
        };
        let group_gram = &group_basis * group_basis.transpose();
        Ok(Self {
            k,
            depth: t.depth(),
            offsets: {
                let mut o = t.sphere_offsets().to_vec();
                o.push(t.vertex_count());
                o
            },
            group_basis,
            group_gram,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `dim Q_{n,n}`: 1 for `n = 0`, `k^{n-1}(k-1)` otherwise.
    pub fn dim(&self, n: usize) -> usize {
        if n == 0 {
            1
        } else {
            self.k.pow(n as u32 - 1) * (self.k - 1)
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..=self.depth).map(|n| self.dim(n)).collect()
    }

    /// `dim Q_{ℓ,r}` for `ℓ = 0..=r`; sums to `k^r`.
    pub fn triangular_dims(&self, r: usize) -> Vec<usize> {
        (0..=r).map(|l| self.dim(l)).collect()
    }

    fn sphere_len(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }

    fn ancestor(&self, mut v: usize, steps: usize) -> usize {
        for _ in 0..steps {
            v = (v - 1) / self.k;
        }
        v
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets[self.depth + 1]
    }

    /// `|v|`; `v` must lie in the truncation.
    pub fn depth_of(&self, v: usize) -> usize {
        self.offsets.partition_point(|&o| o <= v) - 1
    }

    /// χ-basis of `Q_{n,n}` in local coordinates of `S_n` (`|S_n| × dim`).
    pub fn chi(&self, n: usize) -> RMatrix {
        assert!(n <= self.depth, "level {n} beyond depth {}", self.depth);
        if n == 0 {
            return RMatrix::from_element(1, 1, 1.0);
        }
        let k = self.k;
        let rows = self.sphere_len(n);
        let mut chi = RMatrix::zeros(rows, self.dim(n));
        for g in 0..rows / k {
            chi.view_mut((g * k, g * (k - 1)), (k, k - 1))
                .copy_from(&self.group_basis);
        }
        chi
    }

    /// `E^{n,n+j}` in local coordinates of `S_{n+j}`.
    pub fn lifted(&self, n: usize, j: usize) -> Result<RMatrix> {
        if n + j > self.depth {
            return Err(Error::InvalidParameter(format!(
                "lift to level {} exceeds depth {}",
                n + j,
                self.depth
            )));
        }
        let chi = self.chi(n);
        let scale = (self.k as f64).powf(-0.5 * j as f64);
        let start_r = self.offsets[n + j];
        let start_n = self.offsets[n];
        let rows = self.sphere_len(n + j);
        Ok(RMatrix::from_fn(rows, chi.ncols(), |i, m| {
            scale * chi[(self.ancestor(start_r + i, j) - start_n, m)]
        }))
    }

    /// All lifted vectors of `M_n` embedded in the truncation, columns ordered
    /// by `(j, m)` with `j` outermost.
    pub fn level_basis(&self, n: usize) -> RMatrix {
        let nv = self.offsets[self.depth + 1];
        let d = self.dim(n);
        let blocks = self.depth + 1 - n;
        let mut out = RMatrix::zeros(nv, d * blocks);
        for j in 0..blocks {
            let e = self.lifted(n, j).expect("level within depth");
            out.view_mut((self.offsets[n + j], j * d), (e.nrows(), d))
                .copy_from(&e);
        }
        out
    }

    /// Every `E^{n,n+j}_m`, concatenated over `n`: an orthonormal basis of the truncation.
    pub fn full_basis(&self) -> RMatrix {
        let cols: Vec<RMatrix> = (0..=self.depth).map(|n| self.level_basis(n)).collect();
        let nv = self.offsets[self.depth + 1];
        let total: usize = cols.iter().map(|c| c.ncols()).sum();
        let mut out = RMatrix::zeros(nv, total);
        let mut at = 0;
        for c in cols {
            out.columns_mut(at, c.ncols()).copy_from(&c);
            at += c.ncols();
        }
        out
    }

    /// Orthogonal projector `P_n` onto `M_n` on the truncation.
    pub fn projector(&self, n: usize) -> RMatrix {
        let b = self.level_basis(n);
        &b * b.transpose()
    }

    /// `Σ_m E^{n,|v|}_m(v) E^{n,|v'|}_m(v')`, the `M_n` contribution at a
    /// vertex pair; zero unless `n ≤ min(|v|, |v'|)`.
    pub fn lifted_overlap(&self, n: usize, v: usize, w: usize) -> f64 {
        let (rv, rw) = (self.depth_of(v), self.depth_of(w));
        if n > rv.min(rw) {
            return 0.0;
        }
        let scale = (self.k as f64).powf(-0.5 * (rv + rw - 2 * n) as f64);
        if n == 0 {
            return scale;
        }
        let a = self.ancestor(v, rv - n) - self.offsets[n];
        let b = self.ancestor(w, rw - n) - self.offsets[n];
        let k = self.k;
        if a / k != b / k {
            return 0.0;
        }
        scale * self.group_gram[(a % k, b % k)]
    }

    /// Depth of the deepest common ancestor of `v` and `w`.
    pub fn meet_depth(&self, mut v: usize, rv: usize, mut w: usize, rw: usize) -> usize {
        let (mut rv, mut rw) = (rv, rw);
        while rv > rw {
            v = (v - 1) / self.k;
            rv -= 1;
        }
        while rw > rv {
            w = (w - 1) / self.k;
            rw -= 1;
        }
        while v != w {
            v = (v - 1) / self.k;
            w = (w - 1) / self.k;
            rv -= 1;
        }
        rv
    }

    /// Every nonzero [`lifted_overlap`](Self::lifted_overlap) of a vertex pair
    /// at depths `rv`, `rw`, written into `out` as `(n, value)`.
    ///
    /// The group Gram matrix is `I - 1/k`, so with `ℓ` the meet depth the
    /// overlap is `1 - 1/k` (scaled) for `1 ≤ n ≤ ℓ`, `-1/k` at `n = ℓ + 1`
    /// and zero beyond.
    pub fn overlap_profile(
        &self,
        v: usize,
        rv: usize,
        w: usize,
        rw: usize,
        out: &mut Vec<(usize, f64)>,
    ) {
        out.clear();
        let kf = self.k as f64;
        let top = rv.min(rw);
        let meet = self.meet_depth(v, rv, w, rw);
        let scale = |n: usize| kf.powi(-((rv + rw - 2 * n) as i32)).sqrt();
        out.push((0, scale(0)));
        if self.k == 1 {
            return;
        }
        for n in 1..=meet.min(top) {
            out.push((n, scale(n) * (1.0 - 1.0 / kf)));
        }
        if meet < top {
            out.push((meet + 1, -scale(meet + 1) / kf));
        }
    }

    /// Max deviation of `⟨L E^{n,n+j}_m, E^{n,n+ℓ}_q⟩` from the free Jacobi
    /// matrix `√k(δ_{j,ℓ+1} + δ_{j+1,ℓ})δ_{mq}`, ignoring the boundary level.
    pub fn verify_jacobi_form(&self, t: &TreeGraph, n: usize) -> f64 {
        assert_eq!(t.vertex_count(), self.offsets[self.depth + 1]);
        let b = self.level_basis(n);
        let d = self.dim(n);
        if d == 0 {
            return 0.0;
        }
        let sk = (self.k as f64).sqrt();
        let interior = self.depth - n;
        // columns are j-major, so the interior levels are a leading column block
        let b = b.columns(0, interior * d);
        let mut lb = RMatrix::zeros(b.nrows(), b.ncols());
        for col in 0..b.ncols() {
            for (p, c) in t.edges() {
                lb[(p, col)] += b[(c, col)];
                lb[(c, col)] += b[(p, col)];
            }
        }
        let m = b.tr_mul(&lb);
        let mut worst: f64 = 0.0;
        for j in 0..interior {
            for l in 0..interior {
                for p in 0..d {
                    for q in 0..d {
                        let want = if p == q && (j == l + 1 || l == j + 1) {
                            sk
                        } else {
                            0.0
                        };
                        worst = worst.max((m[(j * d + p, l * d + q)] - want).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Commutator `‖[P_n, L]‖` restricted away from the boundary sphere.
pub fn interior_commutator(t: &TreeGraph, b: &SphericalBasis, n: usize) -> f64 {
    let p = b.projector(n);
    let a = adjacency(t);
    let comm: DMatrix<f64> = &p * &a - &a * &p;
    let inner = t.ball(t.depth().saturating_sub(1));
    let mut worst: f64 = 0.0;
    for i in inner.clone() {
        for j in inner.clone() {
            worst = worst.max(comm[(i, j)].abs());
        }
    }
    worst
}
