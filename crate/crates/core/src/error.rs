use thiserror::Error;

pub type Result<T> = std::result::Result<T, EsrError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsrError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid matrix shape: {0}")]
    Shape(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian (max |M - M^dagger| = {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid property: {0}")]
    InvalidProperty(String),

    #[error("detection probability {value} for state '{state}' is outside [0, 1]")]
    DetectionOutOfRange { state: String, value: f64 },

    #[error("yes-outcome impossible: Tr[T rho T^dagger] = {denominator:e}")]
    YesOutcomeImpossible { denominator: f64 },

    #[error("invalid outcome distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("unknown property '{0}'")]
    UnknownProperty(String),

    #[error("invalid microstate model: {0}")]
    InvalidModel(String),

    #[error("enumeration bound exceeded: {parties} parties x {settings} settings > {max}")]
    EnumerationBound {
        parties: usize,
        settings: usize,
        max: usize,
    },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("LP too large: {variables} variables, {constraints} constraints (limit {max_variables} x {max_constraints})")]
    LpTooLarge {
        variables: usize,
        constraints: usize,
        max_variables: usize,
        max_constraints: usize,
    },

    #[error("LP unbounded")]
    Unbounded,

    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("value {value} of '{name}' is outside [{lo}, {hi}]")]
    OutOfRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown setting '{0}'")]
    UnknownSetting(String),

    #[error("zero joint-detection mass ({0:e})")]
    ZeroDetectionMass(f64),

    #[error("empty efficiency grid")]
    EmptyGrid,
}
