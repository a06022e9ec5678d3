//! Problems on `ℝᵈ` with the trivial retraction `x + u`, given by closures.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use super::{ProblemOracle, SqpError};
use crate::kkt::dense_to_csr;

type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64>>;
type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64>>;
type WeightedMatrixFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64>>;

pub struct EuclideanProblem {
    pub dim: usize,
    pub constraints: usize,
    pub objective: ScalarFn,
    pub gradient: VectorFn,
    pub hessian: MatrixFn,
    pub constraint: VectorFn,
    pub jacobian: MatrixFn,
    /// `(x, p) ↦ Σⱼ pⱼ c″ⱼ(x)`
    pub constraint_hessian: WeightedMatrixFn,
}

impl EuclideanProblem {
    /// `min ½xᵀGx + gᵀx` subject to `Ax = b`.
    pub fn quadratic(
        g_mat: DMatrix<f64>,
        g: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Self {
        let dim = g.len();
        let constraints = b.len();
        let (g1, g2, g3) = (g_mat.clone(), g_mat.clone(), g_mat);
        let (gv1, gv2) = (g.clone(), g);
        let (a1, a2) = (a.clone(), a);
        Self {
            dim,
            constraints,
            objective: Box::new(move |x| 0.5 * x.dot(&(&g1 * x)) + gv1.dot(x)),
            gradient: Box::new(move |x| &g2 * x + &gv2),
            hessian: Box::new(move |_| g3.clone()),
            constraint: Box::new(move |x| &a1 * x - &b),
            jacobian: Box::new(move |_| a2.clone()),
            constraint_hessian: Box::new(move |_, _| DMatrix::zeros(dim, dim)),
        }
    }
}

impl ProblemOracle for EuclideanProblem {
    type Point = DVector<f64>;

    fn tangent_dim(&self, _x: &DVector<f64>) -> usize {
        self.dim
    }

    fn constraint_dim(&self, _x: &DVector<f64>) -> usize {
        self.constraints
    }

    fn objective(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64, SqpError> {
        Ok((self.objective)(&(x + u)))
    }

    fn constraint(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, SqpError> {
        Ok((self.constraint)(&(x + u)))
    }

    fn objective_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    fn constraint_jacobian(&self, x: &DVector<f64>) -> CsrMatrix<f64> {
        dense_to_csr(&(self.jacobian)(x))
    }

    fn lagrangian_hessian(&self, x: &DVector<f64>, p: &DVector<f64>) -> CsrMatrix<f64> {
        dense_to_csr(&((self.hessian)(x) + (self.constraint_hessian)(x, p)))
    }

    fn retract(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, SqpError> {
        Ok(x + u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sqp::{composite_step_solve, local_sqp_solve, SolverConfig};

    fn qp() -> EuclideanProblem {
        EuclideanProblem::quadratic(
            DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]),
            DVector::from_column_slice(&[1.0, -2.0, 0.5]),
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            DVector::from_column_slice(&[1.0]),
        )
    }

    /// `min x + y` on the circle `x² + y² = 2`, solved by `(−1, −1)`.
    fn circle() -> EuclideanProblem {
        EuclideanProblem {
            dim: 2,
            constraints: 1,
            objective: Box::new(|x| x[0] + x[1]),
            gradient: Box::new(|_| DVector::from_column_slice(&[1.0, 1.0])),
            hessian: Box::new(|_| DMatrix::zeros(2, 2)),
            constraint: Box::new(|x| DVector::from_element(1, x.norm_squared() - 2.0)),
            jacobian: Box::new(|x| DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]])),
            constraint_hessian: Box::new(|_, p| DMatrix::identity(2, 2) * (2.0 * p[0])),
        }
    }

    #[test]
    fn quadratic_program_takes_one_local_step() {
        let state = local_sqp_solve(
            &qp(),
            DVector::from_column_slice(&[3.0, -1.0, 2.0]),
            1e-10,
            10,
        )
        .unwrap();
        assert_eq!(state.iterations(), 1);
        let c = (qp().constraint)(&state.x);
        assert!(c.amax() < 1e-12);
    }

    #[test]
    fn quadratic_program_takes_an_almost_full_composite_step() {
        // the cubic term with a tiny ω_f shortens the first step slightly
        let cfg = SolverConfig {
            omega_c_init: 0.0,
            ..Default::default()
        };
        let state =
            composite_step_solve(&qp(), DVector::from_column_slice(&[3.0, -1.0, 2.0]), &cfg)
                .unwrap();
        assert!(state.iterations() <= 2);
        let first = state.history[0];
        assert!(first.accepted && first.nu == 1.0 && first.tau > 1.0 - 1e-5);
        let reference = local_sqp_solve(
            &qp(),
            DVector::from_column_slice(&[3.0, -1.0, 2.0]),
            1e-12,
            10,
        )
        .unwrap();
        assert!((state.x - reference.x).amax() < 1e-12);
    }

    #[test]
    fn stationary_start_needs_no_steps() {
        let x = DVector::from_column_slice(&[-1.0, -1.0]);
        let state = composite_step_solve(&circle(), x.clone(), &SolverConfig::default()).unwrap();
        assert_eq!(state.iterations(), 0);
        assert!(state.history.is_empty());
        let state = local_sqp_solve(&circle(), x, 1e-12, 10).unwrap();
        assert_eq!(state.iterations(), 0);
    }

    #[test]
    fn circle_from_far_away() {
        let state = composite_step_solve(
            &circle(),
            DVector::from_column_slice(&[0.3, -2.5]),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((&state.x - DVector::from_column_slice(&[-1.0, -1.0])).amax() < 1e-8);
        let last = state.history.last().unwrap();
        assert!(last.accepted);
        assert_eq!(
            state.history.iter().filter(|r| r.accepted).count(),
            state.iterations()
        );
    }

    #[test]
    fn hybrid_model_also_converges() {
        let cfg = SolverConfig {
            hybrid_model: true,
            ..Default::default()
        };
        let state = composite_step_solve(&circle(), DVector::from_column_slice(&[0.3, -2.5]), &cfg)
            .unwrap();
        assert!((state.x - DVector::from_column_slice(&[-1.0, -1.0])).amax() < 1e-8);
    }

    #[test]
    fn zero_iteration_budget_fails_with_history() {
        let cfg = SolverConfig {
            max_iter: 0,
            ..Default::default()
        };
        let err = composite_step_solve(&circle(), DVector::from_column_slice(&[0.3, -2.5]), &cfg)
            .unwrap_err();
        assert_eq!(err.error, SqpError::MaxIterExceeded(0));
        assert!(err.state.history.is_empty());
    }
}
