//! Exact sparse multivariate polynomials over the rationals.
//!
//! The variable set for maps `(R^d)^n → R^d` is a [`VarUniverse`]: a V-block
//! `v[j][i]` holding the input vectors and an ℓ-block `l[i]` holding the dual
//! coordinates of `ℓ ∈ W*`. Abstract generator variables `X_k` ([`XVar`]) use
//! the same machinery.

mod json;
mod monomial;
mod polynomial;
mod var;

use thiserror::Error;

pub use json::{format_rational, parse_rational, PolynomialJson, TermJson, XPolynomialJson};
pub use monomial::Monomial;
pub use polynomial::{dense_point, rat, ratio, Bidegree, CompiledPoly, Polynomial};
pub use var::{Var, VarUniverse, Variable, XUniverse, XVar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("invalid variable universe d={d}, n={n}: both must be at least 1")]
    InvalidUniverse { d: usize, n: usize },
    #[error("polynomials over different universes: {left} vs {right}")]
    UniverseMismatch { left: String, right: String },
    #[error("variable {0} is not part of the universe")]
    UnknownVariable(String),
    #[error("no value assigned to variable {0}")]
    MissingAssignment(String),
    #[error("term {0} is not linear in the ℓ-block")]
    NotLinearInEll(String),
    #[error("malformed polynomial: {0}")]
    Malformed(String),
}
