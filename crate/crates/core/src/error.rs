use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tree with {requested} vertices exceeds the capacity cap of {cap}")]
    CapacityExceeded { requested: u128, cap: usize },
    #[error("vertex {vertex} out of range (tree has {vertex_count} vertices)")]
    IndexOutOfRange { vertex: usize, vertex_count: usize },
    #[error("the root has no parent")]
    RootHasNoParent,
    #[error("decay assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("orthonormalization at level {level} found rank {found}, expected {expected}")]
    NumericalRankFailure {
        level: usize,
        found: usize,
        expected: usize,
    },
    #[error("spectral parameter z = {re}{im:+}i lies on the spectrum [t-, t+]")]
    OnSpectrum { re: f64, im: f64 },
    #[error("|lambda| = {modulus} is outside the working disk of radius {radius}")]
    OutOfDisk { modulus: f64, radius: f64 },
    #[error("branch failure: {0}")]
    BranchFailure(String),
    #[error("smallest singular value {min_sv:e} on the contour is below {threshold:e}")]
    SingularOnContour { min_sv: f64, threshold: f64 },
    #[error("contour index did not converge (residual {residual:.3e} after {nodes} nodes)")]
    NonConvergent { residual: f64, nodes: usize },
    #[error(
        "z0 is not isolated: eigenvalue at distance {distance:e} with contour radius {radius:e}"
    )]
    NotIsolated { distance: f64, radius: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
