use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;

use crate::kkt::{csr_mul, SaddlePointFactorization};

/// Derivative data of the pullbacks at the origin of one tangent space.
///
/// Model values are also available as increments over `f(0)`, which keeps
/// differences of nearby model values free of cancellation against `f(0)`.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub f0: f64,
    pub c0: DVector<f64>,
    pub gradient: DVector<f64>,
    pub jacobian: CsrMatrix<f64>,
    /// `L″(0, p)`, possibly regularized.
    pub hessian: CsrMatrix<f64>,
    pub multiplier: DVector<f64>,
}

impl LocalModel {
    /// `f′(0)δx + ½ L″(δx, δx)`.
    pub fn quadratic_increment(&self, dx: &DVector<f64>) -> f64 {
        self.gradient.dot(dx) + 0.5 * dx.dot(&csr_mul(&self.hessian, dx))
    }

    /// `q(δx) = f(0) + f′(0)δx + ½ L″(0,p)(δx, δx)`.
    pub fn quadratic(&self, dx: &DVector<f64>) -> f64 {
        self.f0 + self.quadratic_increment(dx)
    }

    /// Hybrid model over `f(0)`, given `L(δn, p) − f(0)`.
    pub fn hybrid_increment(
        &self,
        lagrangian_increment_at_dn: f64,
        nu: f64,
        dn: &DVector<f64>,
        dt: &DVector<f64>,
    ) -> f64 {
        let h_dn = csr_mul(&self.hessian, dn);
        lagrangian_increment_at_dn - (1.0 - nu) * self.multiplier.dot(&self.c0)
            + (&self.gradient + h_dn).dot(dt)
            + 0.5 * dt.dot(&csr_mul(&self.hessian, dt))
    }

    /// `q̃(δn)(δt) = L(δn,p) − (1−ν)p·c(0) + (f′(0) + L″δn)δt + ½L″(δt, δt)`,
    /// given `L(δn, p)`.
    pub fn hybrid(
        &self,
        lagrangian_at_dn: f64,
        nu: f64,
        dn: &DVector<f64>,
        dt: &DVector<f64>,
    ) -> f64 {
        self.f0 + self.hybrid_increment(lagrangian_at_dn - self.f0, nu, dn, dt)
    }

    /// `c(δx) − c(0) − c′(0)δx`.
    pub fn constraint_remainder(&self, c_at_dx: &DVector<f64>, dx: &DVector<f64>) -> DVector<f64> {
        c_at_dx - &self.c0 - csr_mul(&self.jacobian, dx)
    }
}

/// `m(v) = q̂(v) + (ω_f/6)‖v‖³`.
pub fn cubic_model(model_value: f64, omega_f: f64, dx: &DVector<f64>) -> f64 {
    model_value + omega_f / 6.0 * dx.norm().powi(3)
}

/// Second-order correction `δs = −c′(0)⁻(c(δx) − c(0) − c′(0)δx)`, with
/// `metric` the factored system `[M c′(0)ᵀ; c′(0) 0]`.
pub fn simplified_normal_step(
    metric: &SaddlePointFactorization,
    model: &LocalModel,
    c_at_dx: &DVector<f64>,
    dx: &DVector<f64>,
) -> DVector<f64> {
    metric.normal_step(&model.constraint_remainder(c_at_dx, dx))
}
