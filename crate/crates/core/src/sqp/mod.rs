//! Local and globalized SQP for equality-constrained problems posed through
//! retractions.
//!
//! Problems are supplied through [`ProblemOracle`]: objective and constraint
//! values are pulled back through an *update* retraction, derivatives at the
//! origin through a *model* retraction. The two may differ.

mod composite;
mod config;
mod damping;
pub mod euclidean;
mod local;
mod model;
mod oracle;
mod stratification;

pub use composite::composite_step_solve;
pub use config::{ConfigError, SolverConfig};
pub use damping::{
    acceptance_test, compute_nu, compute_tau, update_omega_c, update_omega_f, AcceptanceInput,
    OMEGA_C_FLOOR,
};
pub use local::local_sqp_solve;
pub use model::{cubic_model, simplified_normal_step, LocalModel};
pub use oracle::ProblemOracle;
pub use stratification::Stratification;

use nalgebra::DVector;
use thiserror::Error;

use crate::kkt::KktError;
use crate::manifold::ManifoldError;

/// Consecutive rejected trial steps tolerated before giving up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqpError {
    #[error(transparent)]
    Kkt(#[from] KktError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("update not defined: {0}")]
    UpdateNotDefined(String),
    #[error("model decrease vanishes for a nonzero tangential step")]
    DegenerateDenominator,
    #[error("step length is zero")]
    ZeroStep,
    #[error("no convergence within {0} iterations")]
    MaxIterExceeded(usize),
    #[error("{0} consecutive trial steps rejected")]
    StallDetected(usize),
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),
}

/// One trial step of an SQP run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub nu: f64,
    pub tau: f64,
    pub norm_dn: f64,
    pub norm_dt: f64,
    pub norm_dx: f64,
    pub norm_ds: f64,
    pub omega_c: f64,
    pub omega_f: f64,
    /// Objective at the trial point.
    pub f_value: f64,
    /// ∞-norm of the constraint residual at the trial point.
    pub feasibility_inf_norm: f64,
    pub eta: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolverState<P> {
    pub x: P,
    /// Multiplier estimate at the last linearization point.
    pub p: DVector<f64>,
    pub omega_c: f64,
    pub omega_f: f64,
    pub history: Vec<IterationRecord>,
}

impl<P> SolverState<P> {
    pub fn new(x: P, omega_c: f64, omega_f: f64) -> Self {
        Self {
            x,
            p: DVector::zeros(0),
            omega_c,
            omega_f,
            history: Vec::new(),
        }
    }

    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.history.iter().filter(|r| r.accepted).count()
    }
}

/// Error together with the solver state reached before it occurred.
#[derive(Debug, Clone)]
pub struct SolveFailure<P> {
    pub error: SqpError,
    pub state: SolverState<P>,
}

pub type SolveResult<P> = Result<SolverState<P>, Box<SolveFailure<P>>>;

fn fail<P>(error: impl Into<SqpError>, state: SolverState<P>) -> Box<SolveFailure<P>> {
    Box::new(SolveFailure {
        error: error.into(),
        state,
    })
}
