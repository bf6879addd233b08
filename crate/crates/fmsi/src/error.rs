//! Library-wide error type with a data-vs-numerical classification used by the
//! CLI to choose exit codes.

use thiserror::Error;

/// Broad failure class: bad or degenerate input data versus a numerical
/// breakdown inside an otherwise well-posed computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate genomic region: t_min == t_max == {0}")]
    DegenerateRegion(f64),

    #[error("position {position} outside region [{lo}, {hi}]")]
    PositionOutsideRange { position: f64, lo: f64, hi: f64 },

    #[error("empty methylation sample: no CpG sites")]
    EmptySample,

    #[error("invalid methylation sample '{id}': {reason}")]
    InvalidSample { id: String, reason: String },

    #[error("isolated grid point: all kernel weights vanished at t = {t}")]
    IsolatedGridPoint { t: f64 },

    #[error("invalid basis: need L >= degree + 1, got L = {l}, degree = {degree}")]
    InvalidBasis { l: usize, degree: usize },

    #[error("penalty requires degree >= 2, got degree = {degree}")]
    PenaltyDegree { degree: usize },

    #[error("invalid weight specification: {0}")]
    InvalidWeight(String),

    #[error("negative distance {0} passed to weight function; pass |t - u_d|")]
    NegativeDistance(f64),

    #[error("{what}: length mismatch ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("SNP outside scaled region: u_{index} = {position}")]
    SnpOutsideRegion { index: usize, position: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("monomorphic SNP {index}: genotype column is constant")]
    MonomorphicSnp { index: usize },

    #[error("duplicate SNP positions: u_{first} == u_{second} == {position}")]
    DuplicateSnpPositions {
        first: usize,
        second: usize,
        position: f64,
    },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("insufficient sample size: need N > S + 2D + L + 1 = {bound}, got N = {n}")]
    InsufficientSampleSize { n: usize, bound: usize },

    #[error("unidentifiable model: penalized normal matrix is singular")]
    Unidentifiable,

    #[error("ill-conditioned normal matrix: condition estimate {estimate:.3e} exceeds 1e12")]
    IllConditioned { estimate: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("no admissible smoothing parameter: REML objective failed on the whole search grid")]
    NoAdmissibleLambda,

    #[error("degenerate interaction covariance")]
    DegenerateInteractionCovariance,

    #[error("invalid degrees of freedom: df1 = {df1}, df2 = {df2}; both must be >= 1")]
    InvalidDf { df1: i64, df2: i64 },

    #[error("invalid argument to F upper tail: {0}")]
    FDomain(String),

    #[error("empty window: no CpG site within {window_bp} bp of SNP {snp_index}")]
    EmptyWindow { snp_index: usize, window_bp: f64 },

    #[error("perfect separation in logistic stage: coefficient norm {norm:.3e} diverged")]
    PerfectSeparation { norm: f64 },

    #[error("logistic stage did not converge after {iterations} iterations")]
    IrlsNoConvergence { iterations: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero signal variance: gaussian_snr10 noise undefined when the signal is constant")]
    ZeroSignalVariance,

    #[error("study failed: {excluded} of {total} replicates excluded (> 1%)")]
    ExcessiveExclusions { excluded: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Classification consumed by the CLI exit-code mapping.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Unidentifiable
            | IllConditioned { .. }
            | NonFinite { .. }
            | NoAdmissibleLambda
            | DegenerateInteractionCovariance
            | PerfectSeparation { .. }
            | IrlsNoConvergence { .. }
            | ExcessiveExclusions { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
