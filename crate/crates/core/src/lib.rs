//! Equality-constrained sequential quadratic programming on product manifolds.
//!
//! - [`manifold`]: sphere parametrizations, product points, transports.
//! - [`kkt`]: saddle-point factorization and the step computations built on it.
//! - [`sqp`]: local SQP and the globalized composite step method.
//! - [`rod`]: the discretized inextensible elastic rod.

pub mod kkt;
pub mod manifold;
pub mod rod;
pub mod sqp;
