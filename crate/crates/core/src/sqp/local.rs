use nalgebra::DVector;

use super::{fail, IterationRecord, ProblemOracle, SolveResult, SolverState, SqpError};
use crate::kkt::{csr_tr_mul, identity_csr, SaddlePointFactorization};

/// Undamped SQP: `x ← R_x(Δx)` with `Δx` the Lagrange-Newton step, until
/// `‖Δx‖ ≤ tol`.
///
/// The multiplier is re-estimated from the gradient at every iterate.
/// Records carry `ν = τ = 1` and zero `ω` estimates.
pub fn local_sqp_solve<O: ProblemOracle>(
    oracle: &O,
    x0: O::Point,
    tol: f64,
    max_iter: usize,
) -> SolveResult<O::Point> {
    let mut state = SolverState::new(x0, 0.0, 0.0);
    loop {
        match local_step(oracle, &mut state, tol, max_iter) {
            Ok(true) => return Ok(state),
            Ok(false) => {}
            Err(e) => return Err(fail(e, state)),
        }
    }
}

fn local_step<O: ProblemOracle>(
    oracle: &O,
    state: &mut SolverState<O::Point>,
    tol: f64,
    max_iter: usize,
) -> Result<bool, SqpError> {
    let x = state.x.clone();
    let d = oracle.tangent_dim(&x);
    let zero = DVector::zeros(d);
    let c0 = oracle.constraint(&x, &zero)?;
    let gradient = oracle.objective_gradient(&x);
    let jacobian = oracle.constraint_jacobian(&x);
    let partition = oracle.kkt_partition(&x);

    let metric = SaddlePointFactorization::factor(&identity_csr(d), &jacobian, partition.as_ref())?;
    let (_, p) = metric.lagrange_multiplier(&gradient);
    let hessian = oracle.lagrangian_hessian(&x, &p);
    let kkt = SaddlePointFactorization::factor(&hessian, &jacobian, partition.as_ref())?;
    let lagrangian_gradient = &gradient + csr_tr_mul(&jacobian, &p);
    let dx = kkt.solve(&lagrangian_gradient, &c0).step;
    state.p = p;

    let norm_dx = dx.norm();
    if norm_dx <= tol {
        return Ok(true);
    }
    if state.history.len() >= max_iter {
        return Err(SqpError::MaxIterExceeded(max_iter));
    }
    if oracle.step_domain(&x, &zero, &dx) < 1.0 {
        return Err(SqpError::UpdateNotDefined(
            "step leaves the retraction domain".into(),
        ));
    }
    let dn = metric.normal_step(&c0);
    let f_new = oracle.objective(&x, &dx)?;
    let feasibility = oracle.constraint(&x, &dx)?.amax();
    state.x = oracle
        .retract(&x, &dx)
        .map_err(|e| SqpError::UpdateNotDefined(e.to_string()))?;
    state.history.push(IterationRecord {
        iter: state.history.len(),
        nu: 1.0,
        tau: 1.0,
        norm_dn: dn.norm(),
        norm_dt: (&dx - &dn).norm(),
        norm_dx,
        norm_ds: 0.0,
        omega_c: 0.0,
        omega_f: 0.0,
        f_value: f_new,
        feasibility_inf_norm: feasibility,
        eta: 1.0,
        accepted: true,
    });
    Ok(false)
}
