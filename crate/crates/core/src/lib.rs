//! Block coding through effectively closed classes, at a scale where every
//! measure is an exact dyadic rational, plus the labelled-tree machinery that
//! decides when such coding succeeds.

pub mod analysis;
pub mod bits;
pub mod clopen;
pub mod coder;
pub mod dyadic;
pub mod error;
pub mod instances;
pub mod labeltree;
pub mod schedule;

pub use bits::{lex_compare, BitString};
pub use clopen::{ApproxSequence, ClopenClass};
pub use dyadic::{dyadic_sum, Dyadic};
pub use error::{Error, Result};
pub use schedule::Schedule;
