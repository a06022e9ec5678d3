//! Command-line driver for the inextensible rod benchmark.
//!
//! [`parse_run_spec`] merges flags over an optional JSON config file and
//! built-in defaults; [`run_and_emit`] solves the rod, writes the history and
//! solution CSVs and reports an exit status.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use manifold_sqp::manifold::{ProductPoint, RetractionKind, Vec3};
use manifold_sqp::rod::{
    full_curve, helix_initial, inextensibility_residual, RodConfig, RodProblem,
};
use manifold_sqp::sqp::{
    composite_step_solve, local_sqp_solve, IterationRecord, ProblemOracle, SolveResult,
    SolverConfig, SqpError,
};
use nalgebra::DVector;
use serde::Deserialize;
use thiserror::Error;

pub const HISTORY_HEADER: &str =
    "iter,nu,tau,norm_dn,norm_dt,norm_dx,norm_ds,omega_c,omega_f,f,feasibility,eta,accepted";
pub const SOLUTION_HEADER: &str = "s,y1,y2,y3,v1,v2,v3";

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Composite,
    Local,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "composite" => Ok(Mode::Composite),
            "local" => Ok(Mode::Local),
            other => Err(format!(
                "unknown mode '{other}' (expected 'composite' or 'local')"
            )),
        }
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub nodes: usize,
    pub sigma: f64,
    pub force: Vec3,
    pub radius: f64,
    pub pitch_a: f64,
    pub model_retraction: RetractionKind,
    pub update_retraction: RetractionKind,
    pub mode: Mode,
    pub solver: SolverConfig,
    pub history: Option<PathBuf>,
    pub solution: Option<PathBuf>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            nodes: 240,
            sigma: 1.0,
            force: Vec3::zeros(),
            radius: 0.6,
            pitch_a: 0.5,
            model_retraction: RetractionKind::Exponential,
            update_retraction: RetractionKind::Exponential,
            mode: Mode::Composite,
            solver: SolverConfig::default(),
            history: None,
            solution: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Parse failures, but also `--help` and `--version` requests.
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("config file {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(e) if !e.use_stderr() => EXIT_CONVERGED,
            _ => EXIT_USAGE,
        }
    }
}

fn parse_force(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected 3 comma-separated components, got {}",
            parts.len()
        ));
    }
    let mut out = Vec3::zeros();
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("'{part}' is not a number"))?;
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(
    name = "rod-sqp",
    version,
    about = "Equilibrium of an inextensible elastic rod by composite-step SQP"
)]
struct Args {
    /// Number of intervals.
    #[arg(long)]
    nodes: Option<usize>,
    /// Bending stiffness.
    #[arg(long)]
    sigma: Option<f64>,
    /// Constant load per unit length, as `f1,f2,f3`.
    #[arg(long, value_parser = parse_force, allow_hyphen_values = true)]
    force: Option<Vec3>,
    /// Radius of the initial helix.
    #[arg(long)]
    radius: Option<f64>,
    /// Pitch of the initial helix.
    #[arg(long = "pitch-a")]
    pitch_a: Option<f64>,
    /// `projection` or `exponential`.
    #[arg(long)]
    model_retraction: Option<RetractionKind>,
    /// `projection` or `exponential`.
    #[arg(long)]
    update_retraction: Option<RetractionKind>,
    /// `composite` or `local`.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_dx: Option<f64>,
    #[arg(long)]
    tol_feas: Option<f64>,
    #[arg(long)]
    theta_aim: Option<f64>,
    #[arg(long)]
    theta_acc: Option<f64>,
    #[arg(long)]
    rho_ellbow: Option<f64>,
    #[arg(long)]
    eta_lo: Option<f64>,
    #[arg(long)]
    eta_hat: Option<f64>,
    #[arg(long)]
    omega_c_init: Option<f64>,
    #[arg(long)]
    omega_f_init: Option<f64>,
    /// Use the hybrid model for the tangential step (0 or 1).
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    hybrid_model: Option<u8>,
    /// Where to write the iteration history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Where to write the solution CSV.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// JSON file with defaults for any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ForceValue {
    Components([f64; 3]),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    nodes: Option<usize>,
    sigma: Option<f64>,
    force: Option<ForceValue>,
    radius: Option<f64>,
    pitch_a: Option<f64>,
    model_retraction: Option<String>,
    update_retraction: Option<String>,
    mode: Option<String>,
    max_iter: Option<usize>,
    tol_dx: Option<f64>,
    tol_feas: Option<f64>,
    theta_aim: Option<f64>,
    theta_acc: Option<f64>,
    rho_ellbow: Option<f64>,
    eta_lo: Option<f64>,
    eta_hat: Option<f64>,
    omega_c_init: Option<f64>,
    omega_f_init: Option<f64>,
    hybrid_model: Option<u8>,
    history: Option<PathBuf>,
    solution: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<FileConfig, CliError> {
    let bad = |reason: String| CliError::Config {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
}

fn parse_tag<T: std::str::FromStr<Err = String>>(
    value: Option<String>,
) -> Result<Option<T>, String> {
    value.map(|s| s.parse()).transpose()
}

/// Builds a [`RunSpec`] from `argv` (program name first). Flags win over the
/// `--config` file, which wins over the defaults.
pub fn parse_run_spec<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    let file = match &args.config {
        Some(path) => read_config(path)?,
        None => FileConfig::default(),
    };
    let config_err = |reason: String| CliError::Config {
        path: args.config.clone().unwrap_or_default(),
        reason,
    };

    let file_force = match file.force {
        Some(ForceValue::Components(c)) => Some(Vec3::from(c)),
        Some(ForceValue::Text(s)) => Some(parse_force(&s).map_err(config_err)?),
        None => None,
    };
    let file_model = parse_tag(file.model_retraction).map_err(config_err)?;
    let file_update = parse_tag(file.update_retraction).map_err(config_err)?;
    let file_mode = parse_tag(file.mode).map_err(config_err)?;

    let d = RunSpec::default();
    let s = SolverConfig::default();
    let hybrid = args.hybrid_model.or(file.hybrid_model);
    if hybrid.is_some_and(|h| h > 1) {
        return Err(config_err("hybrid_model must be 0 or 1".into()));
    }
    let spec = RunSpec {
        nodes: args.nodes.or(file.nodes).unwrap_or(d.nodes),
        sigma: args.sigma.or(file.sigma).unwrap_or(d.sigma),
        force: args.force.or(file_force).unwrap_or(d.force),
        radius: args.radius.or(file.radius).unwrap_or(d.radius),
        pitch_a: args.pitch_a.or(file.pitch_a).unwrap_or(d.pitch_a),
        model_retraction: args
            .model_retraction
            .or(file_model)
            .unwrap_or(d.model_retraction),
        update_retraction: args
            .update_retraction
            .or(file_update)
            .unwrap_or(d.update_retraction),
        mode: args.mode.or(file_mode).unwrap_or(d.mode),
        solver: SolverConfig {
            theta_aim: args.theta_aim.or(file.theta_aim).unwrap_or(s.theta_aim),
            theta_acc: args.theta_acc.or(file.theta_acc).unwrap_or(s.theta_acc),
            rho_ellbow: args.rho_ellbow.or(file.rho_ellbow).unwrap_or(s.rho_ellbow),
            eta_lo: args.eta_lo.or(file.eta_lo).unwrap_or(s.eta_lo),
            eta_hat: args.eta_hat.or(file.eta_hat).unwrap_or(s.eta_hat),
            omega_c_init: args
                .omega_c_init
                .or(file.omega_c_init)
                .unwrap_or(s.omega_c_init),
            omega_f_init: args
                .omega_f_init
                .or(file.omega_f_init)
                .unwrap_or(s.omega_f_init),
            tol_dx: args.tol_dx.or(file.tol_dx).unwrap_or(s.tol_dx),
            tol_feas: args.tol_feas.or(file.tol_feas).unwrap_or(s.tol_feas),
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(s.max_iter),
            hybrid_model: hybrid.map_or(s.hybrid_model, |h| h == 1),
            ..s
        },
        history: args.history.or(file.history),
        solution: args.solution.or(file.solution),
    };
    spec.solver
        .validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(spec)
}

/// Exit status and the line to print.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub message: String,
}

impl RunOutcome {
    fn usage(message: String) -> Self {
        Self {
            exit_code: EXIT_USAGE,
            message,
        }
    }
}

pub fn write_history(path: &Path, history: &[IterationRecord]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.iter,
            r.nu,
            r.tau,
            r.norm_dn,
            r.norm_dt,
            r.norm_dx,
            r.norm_ds,
            r.omega_c,
            r.omega_f,
            r.f_value,
            r.feasibility_inf_norm,
            r.eta,
            u8::from(r.accepted)
        )?;
    }
    w.flush()
}

pub fn write_solution(path: &Path, cfg: &RodConfig, x: &ProductPoint) -> std::io::Result<()> {
    let (ys, vs) = full_curve(cfg, x);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SOLUTION_HEADER}")?;
    for (i, (y, v)) in ys.iter().zip(&vs).enumerate() {
        let s = i as f64 / cfg.n as f64;
        writeln!(
            w,
            "{s:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            y[0], y[1], y[2], v[0], v[1], v[2]
        )?;
    }
    w.flush()
}

/// Runs the solver described by `spec` and writes the requested files. The
/// files are written even when the solver stops without converging.
pub fn run_and_emit(spec: &RunSpec) -> RunOutcome {
    let cfg = match RodConfig::helix(
        spec.nodes,
        spec.sigma,
        spec.force,
        spec.radius,
        spec.pitch_a,
    ) {
        Ok(cfg) => cfg,
        Err(e) => return RunOutcome::usage(e.to_string()),
    };
    let problem = match RodProblem::new(cfg, spec.model_retraction, spec.update_retraction) {
        Ok(p) => p,
        Err(e) => return RunOutcome::usage(e.to_string()),
    };
    let x0 = helix_initial(&problem.cfg);
    let result: SolveResult<ProductPoint> = match spec.mode {
        Mode::Composite => composite_step_solve(&problem, x0, &spec.solver),
        Mode::Local => local_sqp_solve(&problem, x0, spec.solver.tol_dx, spec.solver.max_iter),
    };
    let (state, error) = match result {
        Ok(state) => (state, None),
        Err(failure) => (failure.state, Some(failure.error)),
    };

    if let Some(path) = &spec.history {
        if let Err(e) = write_history(path, &state.history) {
            return RunOutcome::usage(format!("cannot write {}: {e}", path.display()));
        }
    }
    if let Some(path) = &spec.solution {
        if let Err(e) = write_solution(path, &problem.cfg, &state.x) {
            return RunOutcome::usage(format!("cannot write {}: {e}", path.display()));
        }
    }

    let zero = DVector::zeros(problem.tangent_dim(&state.x));
    let f = problem.objective(&state.x, &zero).unwrap_or(f64::NAN);
    let feas = inextensibility_residual(&problem.cfg, &state.x);
    let k = state.iterations();
    match error {
        None => RunOutcome {
            exit_code: EXIT_CONVERGED,
            message: format!("converged in {k} iterations, f={f:.12e}, feas={feas:.3e}"),
        },
        Some(e @ (SqpError::MaxIterExceeded(_) | SqpError::StallDetected(_))) => RunOutcome {
            exit_code: EXIT_NOT_CONVERGED,
            message: format!(
                "not converged after {k} iterations ({e}), f={f:.12e}, feas={feas:.3e}"
            ),
        },
        Some(e) => RunOutcome::usage(format!("solver failed after {k} iterations: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunSpec, CliError> {
        parse_run_spec(std::iter::once("rod-sqp").chain(args.iter().copied()))
    }

    #[test]
    fn defaults() {
        assert_eq!(parse(&[]).unwrap(), RunSpec::default());
    }

    #[test]
    fn loaded_rod_flags() {
        let spec = parse(&[
            "--nodes",
            "240",
            "--force",
            "0,0,1000",
            "--model-retraction",
            "exponential",
            "--update-retraction",
            "exponential",
        ])
        .unwrap();
        assert_eq!(spec.nodes, 240);
        assert_eq!(spec.force, Vec3::new(0.0, 0.0, 1000.0));
        assert_eq!(spec.model_retraction, RetractionKind::Exponential);
    }

    #[test]
    fn force_needs_three_components() {
        let err = parse(&["--force", "0,0"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn negative_force_components() {
        let spec = parse(&["--force", "-1,0,-2.5"]).unwrap();
        assert_eq!(spec.force, Vec3::new(-1.0, 0.0, -2.5));
    }

    #[test]
    fn help_is_not_an_error() {
        assert_eq!(parse(&["--help"]).unwrap_err().exit_code(), EXIT_CONVERGED);
    }

    #[test]
    fn bad_tags_and_ranges() {
        assert!(parse(&["--mode", "global"]).is_err());
        assert!(parse(&["--model-retraction", "cayley"]).is_err());
        assert!(parse(&["--hybrid-model", "2"]).is_err());
        assert!(parse(&["--theta-aim", "1.5"]).is_err());
        assert!(parse(&["--eta-hat", "0.1"]).is_err());
        assert!(parse(&["--bogus"]).is_err());
    }
}
