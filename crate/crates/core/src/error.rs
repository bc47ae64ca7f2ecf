use num_bigint::BigUint;
use thiserror::Error;

use crate::bits::BitString;
use crate::dyadic::Dyadic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("string deeper than class approximation (length {len}, depth {depth})")]
    TooDeep { len: usize, depth: usize },

    #[error("class depth {0} exceeds the supported maximum of 128")]
    DepthLimit(usize),

    #[error("measure budget exhausted: partial sum {partial_sum} is not below measure {measure}")]
    BudgetExhausted { partial_sum: Dyadic, measure: Dyadic },

    #[error("negative overhead at block {index}: l = {l} < m = {m}")]
    NegativeOverhead { index: usize, m: u64, l: u64 },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("extension property violated at {node:?}: {found} extendible extensions, {needed} needed")]
    ExtensionViolated { node: BitString, found: BigUint, needed: BigUint },

    #[error("source length must equal M(n) for some block count n (got {len} bits)")]
    SourceLength { len: usize },

    #[error("oracle outside code tree at block {block}")]
    OutsideCodeTree { block: usize },

    #[error("oracle too short: {have} bits, {need} needed")]
    OracleTooShort { have: usize, need: usize },

    #[error("class is empty")]
    EmptyClass,

    #[error("approximation stages must share one depth and shrink monotonically (stage {0})")]
    NotShrinking(usize),

    #[error("instance too large for oracle: {0}")]
    TooLarge(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("nodes {first:?} and {second:?} are not siblings")]
    NotSiblings { first: BitString, second: BitString },

    #[error("no sibling to splice with: {0:?} was given twice")]
    NoSibling(BitString),

    #[error("label conflict: siblings carry x_{first:?} and x_{second:?}")]
    LabelConflict { first: BitString, second: BitString },

    #[error("invalid splice sequence at step {step}: {reason}")]
    InvalidSteps { step: usize, reason: String },

    #[error("level lengths violate n(t+1) > n(t) + g(t) at t = {0}")]
    LevelSpacing(usize),

    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Process exit status for the command-line surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::InvalidTree(_) | Error::Schedule(_) => 2,
            Error::NegativeOverhead { .. } => 2,
            Error::Invariant(_) => 4,
            _ => 3,
        }
    }
}
