//! Numerical laboratory for Lorentz-Minkowski geometry: the tangent space of
//! a Lorentz-Finsler manifold at one point.
//!
//! The crate evaluates a Finsler Lagrangian `L(v)` with exact second
//! derivatives, builds the fundamental tensor `g_v`, maps the light-cone
//! structure of the tangent space and runs property checks on the causal
//! cones, the reverse Cauchy-Schwarz and triangle inequalities, the Legendre
//! map and its dual Hamiltonian.

pub mod atlas;
pub mod autodiff;
pub mod catalogue;
pub mod checks;
pub mod error;
pub mod expr;
pub mod inequalities;
pub mod lagrangian;
pub mod legendre;
pub mod metric;
pub mod newton;
pub mod report;
pub mod sampling;
pub mod sphere;

pub use error::{LabError, Result};
