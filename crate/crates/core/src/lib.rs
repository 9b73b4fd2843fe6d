//! Least cone-constrained singular values of a matrix.
//!
//! For a matrix `A` and polyhedral cones `P = G·ℝᵖ₊`, `Q = H·ℝ^q₊` the crate
//! computes `min ⟨u, A v⟩` over unit `u ∈ P`, `v ∈ Q`. With `A = I` this is
//! the cosine of the maximal angle between the cones; with orthant cones it
//! is the least Pareto singular value.

pub mod apps;
pub mod bfas;
pub mod bnb;
pub mod cones;
pub mod eao;
pub mod error;
pub mod instance;
pub mod numerics;
pub mod srpl;

pub use error::{Error, Result};
