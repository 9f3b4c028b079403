//! Dense complex linear-algebra helpers on top of `nalgebra`, and the
//! block-diagonal matrices produced by radial potentials.

use nalgebra::linalg::SVD;

use crate::{CMatrix, C64};

/// Eigenvalues of a general complex matrix.
///
/// Backed by `faer`: `nalgebra`'s complex Schur iteration stalls on the badly
/// scaled sandwiches produced by fast-decaying potentials.
pub fn eigenvalues(m: &CMatrix) -> Vec<C64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        _ => to_faer(m)
            .eigenvalues()
            .expect("eigenvalue iteration failed to converge")
            .into_iter()
            .map(|e| C64::new(e.re, e.im))
            .collect(),
    }
}

/// Ascending eigenvalues of a real symmetric matrix (lower triangle is read).
pub fn symmetric_eigenvalues(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)])
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigenvalue iteration failed to converge")
}

fn to_faer(m: &CMatrix) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let x = m[(i, j)];
        faer::c64::new(x.re, x.im)
    })
}

/// Inverse by partial-pivoting LU; `None` when the factorization breaks down.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    use faer::linalg::solvers::DenseSolveCore;
    let n = m.nrows();
    if n != m.ncols() {
        return None;
    }
    if n == 0 {
        return Some(CMatrix::zeros(0, 0));
    }
    let inv = to_faer(m).partial_piv_lu().inverse();
    let out = CMatrix::from_fn(n, n, |i, j| {
        let x = inv[(i, j)];
        C64::new(x.re, x.im)
    });
    out.iter().all(|x| x.is_finite()).then_some(out)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

pub fn min_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn max_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// `I + m`.
pub fn identity_plus(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += 1.0;
    }
    out
}

/// `Tr(f⁻¹ f')` via an LU solve; `None` if `f` is singular.
pub fn trace_inv_times(f: &CMatrix, df: &CMatrix) -> Option<C64> {
    let x = f.clone().lu().solve(df)?;
    Some(x.trace())
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Relative Frobenius distance `‖a - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = (a - b).norm();
    let s = b.norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// Block-diagonal matrix `⊕ (I_{mult} ⊗ B)`: each block repeated with a multiplicity.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonal {
    pub blocks: Vec<(usize, CMatrix)>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<(usize, CMatrix)>) -> Self {
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(m, b)| m * b.nrows()).sum()
    }

    pub fn map_blocks<F>(&self, f: F) -> Self
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        Self::new(self.blocks.iter().map(|(m, b)| (*m, f(b))).collect())
    }

    pub fn identity_plus(&self) -> Self {
        self.map_blocks(identity_plus)
    }

    /// Dense form with blocks laid out in order, each repeated `mult` times.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        let mut at = 0;
        for (m, b) in &self.blocks {
            let s = b.nrows();
            for _ in 0..*m {
                out.view_mut((at, at), (s, s)).copy_from(b);
                at += s;
            }
        }
        out
    }

    /// Eigenvalues with multiplicity.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dim());
        for (m, b) in &self.blocks {
            let e = eigenvalues(b);
            for _ in 0..*m {
                out.extend_from_slice(&e);
            }
        }
        out
    }

    pub fn min_singular_value(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|(m, b)| *m > 0 && b.nrows() > 0)
            .map(|(_, b)| min_singular_value(b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_singular_value(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|(m, b)| *m > 0 && b.nrows() > 0)
            .map(|(_, b)| max_singular_value(b))
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(m, b)| *m as f64 * b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `Tr(self⁻¹ d)` for a conformal block-diagonal `d`.
    pub fn trace_inv_times(&self, d: &BlockDiagonal) -> Option<C64> {
        assert_eq!(self.blocks.len(), d.blocks.len());
        let mut s = C64::new(0.0, 0.0);
        for ((m, f), (_, df)) in self.blocks.iter().zip(&d.blocks) {
            if *m == 0 || f.nrows() == 0 {
                continue;
            }
            s += trace_inv_times(f, df)? * *m as f64;
        }
        Some(s)
    }

    pub fn determinant(&self) -> C64 {
        self.blocks
            .iter()
            .map(|(m, b)| {
                if b.nrows() == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    b.clone().lu().determinant().powu(*m as u32)
                }
            })
            .product()
    }
}
