//! Perturbed Laplacians on regular rooted k-ary trees.
//!
//! The crate follows the operator `-Δ_M = -L + k + 1 - d₀ + M` on a truncated
//! rooted tree from construction to resonance counting:
//!
//! - [`tree`]: breadth-first indexed truncated trees.
//! - [`operators`]: adjacency, raising/lowering, Laplacian, potentials, Θ and
//!   exponential weights as dense matrices / diagonals.
//! - [`decomposition`]: the orthogonal splitting into `L`-invariant subspaces
//!   `M_n = ⊕_j Q_{n,n+j}` and its free Jacobi form.
//! - [`resolvent`]: the change of variables `z ↔ u ↔ Φ ↔ λ`, the discrete
//!   Fourier identity and the closed-form weighted resolvent kernel.
//! - [`birman_schwinger`]: the sandwiched resolvent `±J√|M̃| R₀(z) √|M̃|`, the
//!   `γ`/`β` functions and the holomorphic part `Hol(λ)`.
//! - [`charval`]: contour-integral characteristic-value counting, Riesz
//!   multiplicities, spectra and the threshold absence scan.
//!
//! All matrices are `nalgebra` dense matrices over [`C64`].

// `!(x < y)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birman_schwinger;
pub mod charval;
pub mod decomposition;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod resolvent;
pub mod tree;
pub mod validation;

pub use nalgebra::{Complex, DMatrix, DVector};

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;
/// Diagonal operator stored as its diagonal.
pub type Diagonal = DVector<C64>;

pub use birman_schwinger::{BirmanSchwinger, BsOperator, GammaBeta, Sign};
pub use charval::{ContourSpec, IndexReport, ScanReport};
pub use decomposition::SphericalBasis;
pub use error::{Error, Result};
pub use linalg::BlockDiagonal;
pub use operators::{PotentialKind, PotentialSpec};
pub use resolvent::{KernelMatrix, SpectralPoint, Threshold};
pub use tree::TreeGraph;

/// Lower spectral threshold `t₋(k) = k + 1 - 2√k`.
pub fn t_minus(k: usize) -> f64 {
    k as f64 + 1.0 - 2.0 * (k as f64).sqrt()
}

/// Upper spectral threshold `t₊(k) = k + 1 + 2√k`.
pub fn t_plus(k: usize) -> f64 {
    k as f64 + 1.0 + 2.0 * (k as f64).sqrt()
}

pub(crate) fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
