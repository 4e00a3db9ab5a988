//! fslab: a desk-scale laboratory for exact dyadic-grid experiments on
//! fractal sumsets, projections, multiplicity sets, Hausdorff content and
//! Frostman measures.
//!
//! The crate is organised around immutable values and pure functions:
//!
//! - [`grid`]: dyadic cells, grid sets, neighborhoods, rescaling maps;
//! - [`measure`]: weighted cell measures, entropy, convolution, projection
//!   pushforwards;
//! - [`content`]: resolution-limited dyadic Hausdorff content and maximal
//!   Frostman measures, linked by tree duality;
//! - [`regularity`]: example-set generators and Ahlfors/Frostman checkers;
//! - [`projection`]: sumsets, fiber multiplicity counts, high-multiplicity
//!   sets and direction scans;
//! - [`branching`]: branching profiles, uniformisation, convolution-norm
//!   hypothesis checks, good-scale counting, entropy pigeonholing;
//! - [`experiment`]: reproducible CLI experiment configs with CSV/JSON output.

pub mod branching;
pub mod content;
pub mod experiment;
pub mod grid;
pub mod measure;
pub mod projection;
pub mod regularity;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} exceeds configured maximum {max}")]
    LevelTooFine { level: u32, max: u32 },
    #[error("cannot refine from level {from} to level {to} without a set model")]
    CannotRefine { from: u32, to: u32 },
    #[error("grid levels differ: {a} vs {b}")]
    LevelMismatch { a: u32, b: u32 },
    #[error("out of representable bounds: {what}")]
    OutOfBounds { what: String },
    #[error("measure is not a probability measure (mass {mass})")]
    NotProbability { mass: f64 },
    #[error("restriction to null set")]
    NullRestriction,
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
    #[error("empty input: {what}")]
    EmptyInput { what: String },
    #[error("regularity precondition failed: {witness}")]
    RegularityPrecondition { witness: String },
    #[error("Frostman precondition too weak at this resolution")]
    FrostmanTooWeak,
    #[error("point not in set")]
    PointNotInSet,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
