use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid solver configuration: {0}")]
pub struct ConfigError(pub String);

/// Parameters of the composite step method.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Desired contraction of the simplified normal step.
    pub theta_aim: f64,
    /// Largest contraction accepted.
    pub theta_acc: f64,
    /// Share of `theta_aim` granted to the normal step.
    pub rho_ellbow: f64,
    /// Decrease-ratio acceptance threshold.
    pub eta_lo: f64,
    /// Decrease ratio above which `omega_f` is not increased.
    pub eta_hat: f64,
    /// Lower safeguard factor for `omega_f` updates.
    pub b_lo: f64,
    /// Minimal growth factor of `omega_f` after a failed decrease test.
    pub b_hat: f64,
    /// Upper safeguard factor for `omega_f` updates.
    pub b_hi: f64,
    pub omega_c_init: f64,
    pub omega_f_init: f64,
    pub tol_dx: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Use the hybrid model even when the retractions are second-order consistent.
    pub hybrid_model: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta_aim: 0.5,
            theta_acc: 0.75,
            rho_ellbow: 0.8,
            eta_lo: 0.25,
            eta_hat: 0.9,
            b_lo: 0.25,
            b_hat: 2.0,
            b_hi: 4.0,
            omega_c_init: 1e-6,
            omega_f_init: 1e-6,
            tol_dx: 1e-10,
            tol_feas: 1e-10,
            max_iter: 100,
            hybrid_model: false,
        }
    }
}

fn open_unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ConfigError(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        open_unit("theta_aim", self.theta_aim)?;
        open_unit("theta_acc", self.theta_acc)?;
        if !(self.rho_ellbow > 0.0 && self.rho_ellbow <= 1.0) {
            return Err(ConfigError(format!(
                "rho_ellbow = {} must lie in (0, 1]",
                self.rho_ellbow
            )));
        }
        open_unit("eta_lo", self.eta_lo)?;
        if !(self.eta_hat >= self.eta_lo && self.eta_hat < 1.0) {
            return Err(ConfigError(format!(
                "eta_hat = {} must lie in [eta_lo, 1)",
                self.eta_hat
            )));
        }
        if !(self.b_lo > 0.0 && self.b_lo < 1.0 && 1.0 < self.b_hat && self.b_hat <= self.b_hi) {
            return Err(ConfigError(format!(
                "safeguards must satisfy 0 < b_lo < 1 < b_hat <= b_hi, got {}, {}, {}",
                self.b_lo, self.b_hat, self.b_hi
            )));
        }
        if !(self.omega_c_init >= 0.0 && self.omega_c_init.is_finite()) {
            return Err(ConfigError(format!(
                "omega_c_init = {} must be >= 0",
                self.omega_c_init
            )));
        }
        if !(self.omega_f_init > 0.0 && self.omega_f_init.is_finite()) {
            return Err(ConfigError(format!(
                "omega_f_init = {} must be > 0",
                self.omega_f_init
            )));
        }
        if !(self.tol_dx > 0.0 && self.tol_feas > 0.0) {
            return Err(ConfigError("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn ranges_are_enforced() {
        let bad = [
            SolverConfig {
                theta_aim: 1.0,
                ..Default::default()
            },
            SolverConfig {
                theta_acc: 0.0,
                ..Default::default()
            },
            SolverConfig {
                rho_ellbow: 1.5,
                ..Default::default()
            },
            SolverConfig {
                eta_hat: 0.1,
                ..Default::default()
            },
            SolverConfig {
                b_lo: 1.0,
                ..Default::default()
            },
            SolverConfig {
                b_hat: 5.0,
                ..Default::default()
            },
            SolverConfig {
                omega_f_init: 0.0,
                ..Default::default()
            },
            SolverConfig {
                omega_c_init: -1.0,
                ..Default::default()
            },
            SolverConfig {
                tol_dx: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        SolverConfig {
            rho_ellbow: 1.0,
            omega_c_init: 0.0,
            ..Default::default()
        }
        .validate()
        .unwrap();
    }
}
