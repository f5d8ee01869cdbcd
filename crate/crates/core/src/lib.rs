//! Equivariant polynomial maps from invariant generators.
//!
//! Given bihomogeneous generators of the invariant ring on `V × W*` for a
//! classical matrix group, the crate derives a parametrization of all
//! equivariant polynomial maps `V → W` (invariant features plus equivariant
//! basis maps), certifies decompositions of user-supplied maps exactly, and
//! fits equivariant regressors on invariant features.

pub mod poly;

pub mod group;
pub mod seed;
pub mod catalog;
pub mod metrics;
pub mod engine;
pub mod certifier;
pub mod linsolve;
pub mod fit;
