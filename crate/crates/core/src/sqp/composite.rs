use nalgebra::DVector;

use super::{
    acceptance_test, compute_nu, compute_tau, cubic_model, fail, simplified_normal_step,
    update_omega_c, update_omega_f, AcceptanceInput, IterationRecord, LocalModel, ProblemOracle,
    SolveResult, SolverConfig, SolverState, SqpError, MAX_CONSECUTIVE_REJECTIONS,
};
use crate::kkt::{csr_mul, csr_tr_mul, hessian_regularize, identity_csr, SaddlePointFactorization};

/// Relative resolution of objective values in the decrease test.
const VALUE_RESOLUTION: f64 = 1e-12;

enum Outer {
    Converged,
    Accepted { converged: bool },
}

/// Affine covariant composite step method with cubic regularization.
///
/// Every trial step (accepted or not) appends one [`IterationRecord`]. The
/// run stops successfully when the linearization at the current iterate is
/// already below tolerance, or when an accepted step satisfies
/// `‖δx‖ ≤ tol_dx` and leads to a point with constraint residual
/// `≤ tol_feas` in the ∞-norm.
pub fn composite_step_solve<O: ProblemOracle>(
    oracle: &O,
    x0: O::Point,
    cfg: &SolverConfig,
) -> SolveResult<O::Point> {
    let mut state = SolverState::new(x0, cfg.omega_c_init, cfg.omega_f_init);
    if let Err(e) = cfg.validate() {
        return Err(fail(SqpError::InvalidProblem(e.to_string()), state));
    }
    let hybrid = cfg.hybrid_model || !oracle.second_order_consistent();
    loop {
        match outer_iteration(oracle, &mut state, cfg, hybrid) {
            Ok(Outer::Converged) | Ok(Outer::Accepted { converged: true }) => return Ok(state),
            Ok(Outer::Accepted { converged: false }) => {}
            Err(e) => return Err(fail(e, state)),
        }
    }
}

fn outer_iteration<O: ProblemOracle>(
    oracle: &O,
    state: &mut SolverState<O::Point>,
    cfg: &SolverConfig,
    hybrid: bool,
) -> Result<Outer, SqpError> {
    let x = state.x.clone();
    let d = oracle.tangent_dim(&x);
    let zero = DVector::zeros(d);
    let f0 = oracle.objective(&x, &zero)?;
    let c0 = oracle.constraint(&x, &zero)?;
    let gradient = oracle.objective_gradient(&x);
    let jacobian = oracle.constraint_jacobian(&x);
    let partition = oracle.kkt_partition(&x);

    let metric = SaddlePointFactorization::factor(&identity_csr(d), &jacobian, partition.as_ref())?;
    let full_dn = metric.normal_step(&c0);
    let (_, p) = metric.lagrange_multiplier(&gradient);
    let lagrangian_hessian = oracle.lagrangian_hessian(&x, &p);
    let regularized = hessian_regularize(&lagrangian_hessian, &jacobian, partition.as_ref())?;
    state.p = p.clone();
    let model = LocalModel {
        f0,
        c0,
        gradient,
        jacobian,
        hessian: regularized.hessian,
        multiplier: p,
    };
    let lagrangian_gradient = &model.gradient + csr_tr_mul(&model.jacobian, &model.multiplier);
    let tangential = |dn: &DVector<f64>| {
        let rhs = &lagrangian_gradient + csr_mul(&model.hessian, dn);
        regularized.factorization.tangential_step(&rhs).0
    };

    let full_dt = tangential(&full_dn);
    if (&full_dn + &full_dt).norm() <= cfg.tol_dx && model.c0.amax() <= cfg.tol_feas {
        return Ok(Outer::Converged);
    }
    if state.iterations() >= cfg.max_iter {
        return Err(SqpError::MaxIterExceeded(cfg.max_iter));
    }

    let norm_full_dn = full_dn.norm();
    let resolution = VALUE_RESOLUTION * (1.0 + f0.abs());
    let mut rejections = 0;
    loop {
        let nu = compute_nu(
            state.omega_c,
            cfg.theta_aim,
            cfg.rho_ellbow,
            norm_full_dn,
            oracle.step_domain(&x, &zero, &full_dn),
        );
        let dn = &full_dn * nu;
        let dt_full = if nu == 1.0 {
            full_dt.clone()
        } else {
            tangential(&dn)
        };
        let tau = compute_tau(
            &model,
            state.omega_f,
            state.omega_c,
            cfg.theta_aim,
            &dn,
            &dt_full,
            oracle.step_domain(&x, &dn, &dt_full),
        );
        let dt = &dt_full * tau;
        let dx = &dn + &dt;

        let c_dx = oracle.constraint(&x, &dx)?;
        let ds = simplified_normal_step(&metric, &model, &c_dx, &dx);
        let sigma = oracle.step_domain(&x, &dx, &ds);
        let trial = &dx + &ds * sigma;
        let f_new = oracle.objective(&x, &trial)?;
        let feasibility = oracle.constraint(&x, &trial)?.amax();

        let (q_dx, q_dn) = if hybrid {
            let l_dn = (oracle.objective(&x, &dn)? - f0)
                + model.multiplier.dot(&oracle.constraint(&x, &dn)?);
            (
                model.hybrid_increment(l_dn, nu, &dn, &dt),
                model.hybrid_increment(l_dn, nu, &dn, &zero),
            )
        } else {
            (
                model.quadratic_increment(&dx),
                model.quadratic_increment(&dn),
            )
        };
        let norm_dx = dx.norm();
        let norm_ds = ds.norm();
        let outcome = acceptance_test(
            &AcceptanceInput {
                norm_dx,
                norm_ds,
                f_new: f_new - f0,
                m_dx: cubic_model(q_dx, state.omega_f, &dx),
                m_dn: cubic_model(q_dn, state.omega_f, &dn),
                tangential_norm: dt.norm(),
                resolution,
            },
            cfg,
        )?;
        if norm_dx > 0.0 {
            state.omega_c = update_omega_c(&dx, &ds)?;
            state.omega_f = update_omega_f(
                state.omega_f,
                f_new - f0,
                q_dx,
                &dx,
                outcome.eta,
                outcome.decrease_ok,
                cfg,
            );
        }
        state.history.push(IterationRecord {
            iter: state.history.len(),
            nu,
            tau,
            norm_dn: dn.norm(),
            norm_dt: dt.norm(),
            norm_dx,
            norm_ds,
            omega_c: state.omega_c,
            omega_f: state.omega_f,
            f_value: f_new,
            feasibility_inf_norm: feasibility,
            eta: outcome.eta,
            accepted: outcome.accepted,
        });

        if outcome.accepted {
            state.x = oracle.retract(&x, &trial)?;
            return Ok(Outer::Accepted {
                converged: norm_dx <= cfg.tol_dx && feasibility <= cfg.tol_feas,
            });
        }
        rejections += 1;
        if rejections >= MAX_CONSECUTIVE_REJECTIONS {
            return Err(SqpError::StallDetected(rejections));
        }
    }
}
