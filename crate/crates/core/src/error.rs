use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot factor zero")]
    ZeroInput,

    #[error("{0} is not a valid cubic discriminant shape")]
    NotCubicDiscriminant(i64),

    #[error("{0} is not a fundamental discriminant")]
    NotFundamental(i64),

    #[error("infinite quotient: relations have rank {rank} but there are {generators} generators")]
    InfiniteQuotient { rank: usize, generators: usize },

    #[error("matrix does not square to the identity on the group")]
    NotInvolution,

    #[error("search bound exceeded (bound {bound})")]
    SearchBoundExceeded { bound: u64 },

    #[error("generator bound too small (bound {bound})")]
    GeneratorBoundTooSmall { bound: u64 },

    #[error("maximality tests disagree for form {form:?} at p = {p}")]
    TestsDisagree { form: [i64; 4], p: u64 },

    #[error("census bound insufficient: need |disc| up to {required}, census covers {covered}")]
    CensusBoundInsufficient { required: u64, covered: u64 },

    #[error("invalid local condition {tag} at p = {p}")]
    InvalidLocalClass { p: u64, tag: &'static str },

    #[error("inconsistent arguments: {0}")]
    InconsistentArguments(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precision not reached: routes agree to {achieved} digits, {requested} requested")]
    PrecisionNotReached { requested: u32, achieved: u32 },

    #[error("Euler product tail bound {bound:e} exceeds tolerance {tolerance:e}")]
    TailBoundExceeded { bound: f64, tolerance: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("census cache: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
