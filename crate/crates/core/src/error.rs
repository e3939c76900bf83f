use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pairwise energy on edge ({0}, {1}) is not submodular")]
    NonSubmodularEnergy(usize, usize),

    #[error("coupling q[{0},{1}] = {2} is positive; only submodular (q <= 0) couplings are supported")]
    PositiveCoupling(usize, usize, f64),

    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pseudoflow value {value} on edge ({i}, {j}) exceeds |q| = {bound}")]
    AlphaOutOfBox {
        i: usize,
        j: usize,
        value: f64,
        bound: f64,
    },

    #[error("flow state does not satisfy the flow constraints of the graph")]
    StaleFlow,

    #[error("weight {value} at node {index} is not a positive integer")]
    WeightNotPositiveInteger { index: usize, value: f64 },

    #[error("invalid weight {value} at node {index}: weights must be finite and >= 0")]
    InvalidWeight { index: usize, value: f64 },

    #[error("penalty slopes must be nondecreasing (slope {0} follows {1})")]
    NonConvexPenalty(f64, f64),

    #[error("penalty breakpoints must be strictly increasing")]
    UnsortedBreakpoints,

    #[error("problem size {0} exceeds the limit of {1}")]
    TooLarge(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
