use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode of the library. Variants carry the time node or
/// index that witnesses the failure so reports can point at it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("singularity at t = {t} in `{node}`")]
    Singularity { t: f64, node: String },

    #[error("not differentiable at t = {t}")]
    NonDifferentiablePoint { t: f64 },

    #[error("derivative not available for `{what}`")]
    DerivativeUnavailable { what: String },

    #[error("matrix is not Hermitian: deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("eigenvalue iteration did not converge for a {n}x{n} matrix")]
    ConvergenceFailure { n: usize },

    #[error("matrix not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular matrix (estimated rank {rank} of {n})")]
    SingularMatrix { rank: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("t = {t} outside the domain ({lo}, {hi})")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("t = {t} is not a node of the trajectory grid")]
    NodesNotOnGrid { t: f64 },

    #[error("D + D^H is not uniformly positive at t = {t} (min eigenvalue {min_eig:e})")]
    DPlusDHNotUniformlyPositive { t: f64, min_eig: f64 },

    #[error("Riccati solution blows up near t = {t}")]
    BlowUp { t: f64 },

    #[error("invariant `{invariant}` violated at t = {t} (residual {residual:e})")]
    InvariantViolation {
        invariant: String,
        t: f64,
        residual: f64,
    },

    #[error("Q is not a KYP solution: min eigenvalue {min_eig:e} at t = {t}")]
    NotAKypSolution { t: f64, min_eig: f64 },

    #[error("rank of Q is not constant: {expected} expected, {found} at t = {t}")]
    RankNotConstant { t: f64, expected: usize, found: usize },

    #[error("rank of Q increases at t = {t} ({from} -> {to})")]
    RankIncreaseDetected { t: f64, from: usize, to: usize },

    #[error("ambiguous eigenvector alignment at t = {t}")]
    EigenvalueCrossingUnresolved { t: f64 },

    #[error("A12 block does not vanish at t = {t} (norm {norm:e})")]
    A12NotZero { t: f64, norm: f64 },

    #[error("C2 block does not vanish at t = {t} (norm {norm:e})")]
    C2NotZero { t: f64, norm: f64 },

    #[error("transformation is singular at t = {t} (smallest singular value {sigma_min:e})")]
    SingularTransform { t: f64, sigma_min: f64 },

    #[error("time map is not orientation preserving at t = {t} (derivative {rate:e})")]
    NotOrientationPreserving { t: f64, rate: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("storage volume not positive at t = {t} ({volume:e})")]
    VolumeNonPositive { t: f64, volume: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of a numerical method rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. }
                | Error::IntegrationFailure { .. }
                | Error::BlowUp { .. }
                | Error::SingularMatrix { .. }
                | Error::EigenvalueCrossingUnresolved { .. }
        )
    }
}
