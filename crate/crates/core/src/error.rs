use thiserror::Error;

/// Errors raised across the laboratory. Variants carry enough context to
/// reproduce the failing call.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside the domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("invalid vorticity data: {0}")]
    InvalidVorticity(String),

    #[error("f'(lambda) has no sign change on [{lo}, {hi}]")]
    NoCriticalPoint { lo: f64, hi: f64 },

    #[error("no depth satisfies the Bernoulli closure for Q = {q}; scanned lambda in [{lo}, {hi}]")]
    NoRoot { q: f64, lo: f64, hi: f64 },

    #[error("degenerate grid: column {column} has height {height}")]
    DegenerateGrid { column: usize, height: f64 },

    #[error("test function support touches the bed (lowest point {lowest}, bed {bed})")]
    UnsupportedTestFn { lowest: f64, bed: f64 },

    #[error("every node was excluded by the gradient cutoff {cutoff}")]
    AllNodesExcluded { cutoff: f64 },

    #[error("|grad psi| vanishes off the surface at ({x}, {y})")]
    StagnationInterior { x: f64, y: f64 },

    #[error("ratio |grad psi|^2/|Y| = {ratio} exceeds the admissible bound")]
    Unbounded { ratio: f64 },

    #[error("continuation seed failure: {0}")]
    SeedFailure(String),

    #[error("Newton iteration diverged at amplitude {amplitude}: last residual {residual}")]
    NewtonDivergence { amplitude: f64, residual: f64 },

    #[error("surface samples are not monotone near the crest at x = {x}")]
    NonMonotoneSurface { x: f64 },

    #[error("window leaves the source domain; largest admissible scale is {max_eps}")]
    WindowOutsideDomain { max_eps: f64 },

    #[error("only {found} samples in the smallest fitting range (need 8)")]
    InsufficientResolution { found: usize },

    #[error("cone not contained in the admissible region: {0}")]
    ConeNotContained(String),

    #[error("abscissa must be positive, got {0}")]
    NonPositiveAbscissa(f64),

    #[error("cumulative integral of sin(theta) vanishes at x = {x}")]
    QuaViolated { x: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update})")]
    MaxIterExceeded { iterations: usize, last_update: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature failed to reach tolerance (estimate {estimate}, error {error})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
