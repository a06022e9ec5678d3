use nalgebra::DVector;

use super::{LocalModel, SolverConfig, SqpError};
use crate::kkt::csr_mul;

/// Lower bound for the running estimate of the constraint Lipschitz constant.
pub const OMEGA_C_FLOOR: f64 = 1e-12;

const TAU_TOL: f64 = 1e-12;

/// Normal-step damping `ν = min(1, 2ρΘ_aim / (ω_c‖Δn‖))`, capped by `domain_cap`.
pub fn compute_nu(
    omega_c: f64,
    theta_aim: f64,
    rho_ellbow: f64,
    norm_dn: f64,
    domain_cap: f64,
) -> f64 {
    let nu = if omega_c * norm_dn > 0.0 {
        (2.0 * rho_ellbow * theta_aim / (omega_c * norm_dn)).min(1.0)
    } else {
        1.0
    };
    nu.min(domain_cap).max(0.0)
}

/// Tangential damping: minimizes the cubic model along `δn + τΔt`, `τ ∈ [0, 1]`,
/// then caps `τ` so that `(ω_c/2)‖δn + τΔt‖ ≤ Θ_aim`.
pub fn compute_tau(
    model: &LocalModel,
    omega_f: f64,
    omega_c: f64,
    theta_aim: f64,
    dn: &DVector<f64>,
    dt: &DVector<f64>,
    domain_cap: f64,
) -> f64 {
    let dt_norm2 = dt.norm_squared();
    if dt_norm2 == 0.0 {
        return 1.0;
    }
    let h_dt = csr_mul(&model.hessian, dt);
    let lin = model.gradient.dot(dt) + dn.dot(&h_dt);
    let curv = dt.dot(&h_dt);
    let dn_dt = dn.dot(dt);
    let dn_norm2 = dn.norm_squared();
    let slope = |tau: f64| {
        let norm2 = dn_norm2 + 2.0 * tau * dn_dt + tau * tau * dt_norm2;
        lin + tau * curv + 0.5 * omega_f * norm2.max(0.0).sqrt() * (dn_dt + tau * dt_norm2)
    };

    let mut tau = if slope(1.0) <= 0.0 {
        1.0
    } else if slope(0.0) >= 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > TAU_TOL {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    if omega_c > 0.0 {
        // largest τ with ‖δn + τΔt‖ ≤ 2Θ_aim/ω_c
        let radius = 2.0 * theta_aim / omega_c;
        let c = dn_norm2 - radius * radius;
        let cap = if c >= 0.0 {
            0.0
        } else {
            let b = dn_dt;
            (-b + (b * b - dt_norm2 * c).sqrt()) / dt_norm2
        };
        tau = tau.min(cap);
    }
    tau.min(domain_cap).clamp(0.0, 1.0)
}

/// `max(2‖δs‖/‖δx‖², OMEGA_C_FLOOR)`.
pub fn update_omega_c(dx: &DVector<f64>, ds: &DVector<f64>) -> Result<f64, SqpError> {
    let nx = dx.norm();
    if nx == 0.0 {
        return Err(SqpError::ZeroStep);
    }
    Ok((2.0 * ds.norm() / (nx * nx)).max(OMEGA_C_FLOOR))
}

/// Safeguarded update of the cubic-model constant from the observed model
/// error `f(δx + σδs) − q̂(δx)`.
///
/// `decrease_ok` states whether the decrease test passed; if not, the
/// estimate grows at least by `b_hat`. If `eta ≥ eta_hat` it does not grow.
pub fn update_omega_f(
    old: f64,
    f_new: f64,
    qhat: f64,
    dx: &DVector<f64>,
    eta: f64,
    decrease_ok: bool,
    cfg: &SolverConfig,
) -> f64 {
    let nx = dx.norm();
    let raw = if nx > 0.0 {
        6.0 / nx.powi(3) * (f_new - qhat)
    } else {
        old
    };
    let mut new = raw.clamp(cfg.b_lo * old, cfg.b_hi * old);
    if !decrease_ok {
        new = new.max(cfg.b_hat * old);
    }
    if eta >= cfg.eta_hat {
        new = new.min(old);
    }
    new
}

/// Quantities entering the acceptance test of a trial step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceInput {
    pub norm_dx: f64,
    pub norm_ds: f64,
    /// `f(δx + σδs)`
    pub f_new: f64,
    /// `m(δx)`
    pub m_dx: f64,
    /// `m(δn)`
    pub m_dn: f64,
    /// `τ‖Δt‖`
    pub tangential_norm: f64,
    /// Absolute resolution of objective values; model decreases below it
    /// are treated as exact (`η = 1`).
    pub resolution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceOutcome {
    pub accepted: bool,
    pub contraction_ok: bool,
    pub decrease_ok: bool,
    pub eta: f64,
}

/// Contraction test `‖δs‖ ≤ Θ_acc‖δx‖` and decrease test
/// `η = (f(δx+σδs) − m(δn)) / (m(δx) − m(δn)) ≥ η_lo`.
pub fn acceptance_test(
    input: &AcceptanceInput,
    cfg: &SolverConfig,
) -> Result<AcceptanceOutcome, SqpError> {
    let contraction_ok = input.norm_ds <= cfg.theta_acc * input.norm_dx;
    let denominator = input.m_dx - input.m_dn;
    let eta = if input.tangential_norm == 0.0 {
        1.0
    } else if denominator == 0.0 {
        return Err(SqpError::DegenerateDenominator);
    } else if denominator.abs() <= input.resolution {
        1.0
    } else if denominator > 0.0 {
        return Err(SqpError::DegenerateDenominator);
    } else {
        (input.f_new - input.m_dn) / denominator
    };
    let decrease_ok = eta >= cfg.eta_lo;
    Ok(AcceptanceOutcome {
        accepted: contraction_ok && decrease_ok,
        contraction_ok,
        decrease_ok,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::{dense_to_csr, identity_csr};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn unit_model(gradient: &[f64]) -> LocalModel {
        LocalModel {
            f0: 0.0,
            c0: DVector::zeros(1),
            gradient: DVector::from_column_slice(gradient),
            jacobian: dense_to_csr(&DMatrix::from_row_slice(1, 2, &[0.0, 1.0])),
            hessian: identity_csr(2),
            multiplier: DVector::zeros(1),
        }
    }

    #[test]
    fn nu_examples() {
        assert_relative_eq!(compute_nu(2.0, 0.5, 1.0, 1.0, f64::INFINITY), 0.5);
        assert_eq!(compute_nu(0.0, 0.5, 1.0, 1.0, f64::INFINITY), 1.0);
        assert_eq!(compute_nu(2.0, 0.5, 1.0, 0.1, f64::INFINITY), 1.0);
        assert_eq!(compute_nu(2.0, 0.5, 1.0, 0.0, f64::INFINITY), 1.0);
        assert_eq!(compute_nu(0.0, 0.5, 1.0, 1.0, 0.3), 0.3);
    }

    #[test]
    fn tau_examples() {
        let zero = DVector::zeros(2);
        let dt = DVector::from_column_slice(&[-1.0, 0.0]);
        // Δt is the Newton step of q along e₁: f′Δt = −1, L″(Δt, Δt) = 1
        let model = unit_model(&[1.0, 0.0]);
        assert_eq!(compute_tau(&model, 0.0, 0.0, 0.5, &zero, &dt, 1.0), 1.0);
        // τ + τ² − 1 = 0
        let tau = compute_tau(&model, 2.0, 0.0, 0.5, &zero, &dt, 1.0);
        assert_relative_eq!(tau, (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-11);
        // trust-region cap 2Θ_aim/ω_c = 0.25
        let tau = compute_tau(&model, 0.0, 4.0, 0.5, &zero, &dt, 1.0);
        assert_relative_eq!(tau, 0.25, epsilon = 1e-15);
        assert_eq!(compute_tau(&model, 2.0, 1.0, 0.5, &zero, &zero, 1.0), 1.0);
    }

    #[test]
    fn tau_cap_accounts_for_normal_part() {
        let model = unit_model(&[1.0, 0.0]);
        let dn = DVector::from_column_slice(&[0.0, 0.15]);
        let dt = DVector::from_column_slice(&[-1.0, 0.0]);
        let tau = compute_tau(&model, 0.0, 4.0, 0.5, &dn, &dt, 1.0);
        assert_relative_eq!((&dn + &dt * tau).norm(), 0.25, epsilon = 1e-14);
        assert_relative_eq!(tau, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn omega_c_examples() {
        let dx = DVector::from_column_slice(&[0.2, 0.0]);
        let ds = DVector::from_column_slice(&[0.0, 0.02]);
        assert_relative_eq!(update_omega_c(&dx, &ds).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(
            update_omega_c(&dx, &DVector::zeros(2)).unwrap(),
            OMEGA_C_FLOOR
        );
        assert_eq!(
            update_omega_c(&DVector::zeros(2), &ds),
            Err(SqpError::ZeroStep)
        );
    }

    #[test]
    fn omega_f_examples() {
        let cfg = SolverConfig::default();
        let dx = DVector::from_column_slice(&[1.0, 0.0]);
        // raw = 6 (f_new − q̂) for ‖δx‖ = 1
        assert_relative_eq!(
            update_omega_f(1.0, 10.0 / 6.0, 0.0, &dx, 0.5, true, &cfg),
            4.0
        );
        assert_relative_eq!(
            update_omega_f(1.0, -5.0 / 6.0, 0.0, &dx, 0.5, true, &cfg),
            0.25
        );
        assert_relative_eq!(
            update_omega_f(1.0, 1.5 / 6.0, 0.0, &dx, 0.1, false, &cfg),
            2.0
        );
        assert_relative_eq!(
            update_omega_f(1.0, 3.0 / 6.0, 0.0, &dx, 0.95, true, &cfg),
            1.0
        );
        assert_relative_eq!(
            update_omega_f(1.0, 0.5 / 6.0, 0.0, &dx, 0.95, true, &cfg),
            0.5
        );
    }

    fn input(norm_ds: f64, f_new: f64) -> AcceptanceInput {
        AcceptanceInput {
            norm_dx: 1.0,
            norm_ds,
            f_new,
            m_dx: -1.0,
            m_dn: 0.0,
            tangential_norm: 1.0,
            resolution: 1e-14,
        }
    }

    #[test]
    fn acceptance_examples() {
        let cfg = SolverConfig::default();
        let out = acceptance_test(&input(0.1, -1.0), &cfg).unwrap();
        assert!(out.accepted);
        assert_eq!(out.eta, 1.0);
        let out = acceptance_test(&input(0.9, -1.0), &cfg).unwrap();
        assert!(!out.accepted && !out.contraction_ok && out.decrease_ok);
        let out = acceptance_test(&input(0.1, -0.1), &cfg).unwrap();
        assert!(!out.accepted && !out.decrease_ok);
        assert_relative_eq!(out.eta, 0.1);
    }

    #[test]
    fn acceptance_degenerate_denominator() {
        let cfg = SolverConfig::default();
        let degenerate = AcceptanceInput {
            m_dx: 0.0,
            ..input(0.1, 0.0)
        };
        assert_eq!(
            acceptance_test(&degenerate, &cfg),
            Err(SqpError::DegenerateDenominator)
        );
        let no_tangent = AcceptanceInput {
            tangential_norm: 0.0,
            ..degenerate
        };
        assert!(acceptance_test(&no_tangent, &cfg).unwrap().accepted);
        let increase = AcceptanceInput {
            m_dx: 1.0,
            ..input(0.1, 0.0)
        };
        assert_eq!(
            acceptance_test(&increase, &cfg),
            Err(SqpError::DegenerateDenominator)
        );
        let roundoff = AcceptanceInput {
            m_dx: -1e-16,
            ..input(0.1, 0.0)
        };
        assert_eq!(acceptance_test(&roundoff, &cfg).unwrap().eta, 1.0);
    }
}
