use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use super::SqpError;
use crate::kkt::KktPartition;

/// An equality-constrained problem `min f(x)` s.t. `c(x) = 0` on a manifold,
/// seen through tangent coordinates `u` at a base point `x`.
///
/// Implementations must be pure: the same inputs give the same outputs.
pub trait ProblemOracle {
    type Point: Clone;

    fn tangent_dim(&self, x: &Self::Point) -> usize;
    fn constraint_dim(&self, x: &Self::Point) -> usize;

    /// `f(R_x(u))` for the update retraction.
    fn objective(&self, x: &Self::Point, u: &DVector<f64>) -> Result<f64, SqpError>;
    /// Constraint pullback at `R_x(u)` for the update retraction.
    fn constraint(&self, x: &Self::Point, u: &DVector<f64>) -> Result<DVector<f64>, SqpError>;

    /// `f′(0)`.
    fn objective_gradient(&self, x: &Self::Point) -> DVector<f64>;
    /// `c′(0)`.
    fn constraint_jacobian(&self, x: &Self::Point) -> CsrMatrix<f64>;
    /// `f″(0) + p·c″(0)` for the model retraction.
    fn lagrangian_hessian(&self, x: &Self::Point, p: &DVector<f64>) -> CsrMatrix<f64>;

    /// `R_x(u)` for the update retraction.
    fn retract(&self, x: &Self::Point, u: &DVector<f64>) -> Result<Self::Point, SqpError>;

    /// Block-tridiagonal ordering of the saddle-point unknowns, if any.
    fn kkt_partition(&self, _x: &Self::Point) -> Option<KktPartition> {
        None
    }

    /// Whether model and update retractions (and stratifications) agree to
    /// second order, so the plain quadratic model is consistent.
    fn second_order_consistent(&self) -> bool {
        true
    }

    /// Largest `t ∈ [0, 1]` such that `R_x(base + t·dir)` is defined.
    fn step_domain(&self, _x: &Self::Point, _base: &DVector<f64>, _dir: &DVector<f64>) -> f64 {
        1.0
    }
}
