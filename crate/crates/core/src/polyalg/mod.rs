//! Polynomial algebra over dense real coefficients.
//!
//! Monomial dictionaries `F(x)`, matrix-valued polynomials, the factorization
//! `F(x) = aleph(x) x`, and coefficient-level identity checks.

mod monomial;
mod polymatrix;

pub use monomial::{Monomial, MonomialDictionary};
pub(crate) use monomial::monomials_in_degree_range;
pub use polymatrix::{
    factorize_dictionary, poly_multiply, poly_residual, PolyMatrix, PolyMatrixSerial, SerialTerm,
};
pub(crate) use polymatrix::row_major;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("invalid degree range [{d_min}, {d_max}]: need 1 <= d_min <= d_max")]
    InvalidDegreeRange { d_min: u32, d_max: u32 },
    #[error("state dimension must be positive, got {0}")]
    InvalidDimension(usize),
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("dictionary entry {index} has degree zero")]
    ZeroDegreeEntry { index: usize },
    #[error("duplicate monomial {0} in dictionary")]
    DuplicateMonomial(String),
    #[error("{context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{context}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed dictionary JSON: {0}")]
    Json(#[from] serde_json::Error),
}
