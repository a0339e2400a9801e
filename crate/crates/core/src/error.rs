use thiserror::Error;

/// Errors raised by the solvers, signal algebra and simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigenvalue iteration failed to converge for a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("{hypothesis} hypothesis fails: {detail}")]
    HypothesisFailed {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("matrix -A is not exponentially stable (spectral abscissa of -A = {abscissa:e})")]
    NotStable { abscissa: f64 },

    #[error("eigenvalue {re:e}{im:+e}i lies within {margin:e} of the imaginary axis")]
    NotHyperbolic { re: f64, im: f64, margin: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("controllability Gramian is numerically singular (condition number {0:e})")]
    IllConditionedGramian(f64),

    #[error("matrix exponential overflows: ||tA||_1 = {0:e}")]
    ExponentialOverflow(f64),

    #[error("Newton-Kleinman iteration did not converge in {iterations} steps; residuals {history:?}")]
    NewtonDiverged {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("Riccati certificate failed: {0}")]
    CertificateFailed(String),

    #[error("closed loop lost stability at Newton step {step} (abscissa {abscissa:e})")]
    LostStability { step: usize, abscissa: f64 },

    #[error("truncation horizon {given} too short for decay rate {rate:e}; use at least {suggested}")]
    InsufficientTruncation {
        given: f64,
        rate: f64,
        suggested: f64,
    },

    #[error("step size {dt:e} too large for closed-loop norm {norm:e}; use dt <= {suggested:e}")]
    StepTooLarge { dt: f64, norm: f64, suggested: f64 },

    #[error("closed-form path requires a trigonometric polynomial, got signal `{0}`")]
    NotTrigPolynomial(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("unknown builtin signal `{0}`")]
    UnknownBuiltin(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
