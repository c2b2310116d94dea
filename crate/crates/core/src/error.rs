use thiserror::Error;

use crate::groups::GroupTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter {name} = {value} outside its domain: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("matrix is not in {tag:?}: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotInGroup {
        tag: GroupTag,
        residual: f64,
        tolerance: f64,
    },

    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Shape {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("diagonal exponents must sum to zero, got {0:.3e}")]
    SumNotZero(f64),

    #[error("A + iB is not unitary: residual {0:.3e}")]
    NonUnitary(f64),

    #[error("operation needs {expected} elements, got {actual:?}")]
    WrongGroup {
        expected: &'static str,
        actual: GroupTag,
    },

    #[error("cannot combine elements of {0:?} and {1:?}")]
    MixedGroups(GroupTag, GroupTag),

    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("singular values do not come in reciprocal pairs (deviation {0:.3e})")]
    NotReciprocal(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("target {value} outside the bracket [{lo}, {hi}]")]
    OutOfBracket { value: f64, lo: f64, hi: f64 },

    #[error("negative discriminant {0:.3e}")]
    NegativeDiscriminant(f64),

    #[error("incompatible exponents p = {p}, q = {q}")]
    IncompatibleExponents { p: f64, q: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("invalid certificate: {0}")]
    Certificate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
