use thiserror::Error;

/// Errors raised by the numerical modules and the batch driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh topology: {0}")]
    Topology(String),

    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    #[error("integrand returned a non-finite value on panel {panel}")]
    Evaluation { panel: usize },

    #[error("quadrature failed for panel pair ({target}, {source_panel})")]
    Quadrature { target: usize, source_panel: usize },

    #[error("series diverges: corrections grew for 3 consecutive orders (q_hat = {q_hat:.4})")]
    SeriesDivergence { q_hat: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Neumann iteration diverges (kernel norm estimate {norm_estimate:.3}); use the direct solver")]
    NeumannDivergence { norm_estimate: f64 },

    #[error("singular system (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("system is close to an interior eigenvalue (condition estimate {condition:.3e})")]
    NearEigenvalue { condition: f64 },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("point lies within distance {guard:.4e} of particle {particle} (distance {distance:.4e})")]
    OutOfRegion {
        particle: usize,
        distance: f64,
        guard: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("problem too large: {0}")]
    Budget(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
