#![allow(dead_code)]

use manifold_sqp::manifold::{ProductPoint, RetractionKind, SpherePoint, Vec3};
use manifold_sqp::rod::{helix_initial, RodConfig, RodProblem};
use manifold_sqp::sqp::{composite_step_solve, SolverConfig, SolverState};
use rand::Rng;

pub const KINDS: [RetractionKind; 2] = [RetractionKind::Projection, RetractionKind::Exponential];

pub fn rod(n: usize, load: f64, model: RetractionKind, update: RetractionKind) -> RodProblem {
    let cfg = RodConfig::helix(n, 1.0, Vec3::new(0.0, 0.0, load), 0.6, 0.5).unwrap();
    RodProblem::new(cfg, model, update).unwrap()
}

pub fn solve(problem: &RodProblem, cfg: &SolverConfig) -> SolverState<ProductPoint> {
    composite_step_solve(problem, helix_initial(&problem.cfg), cfg)
        .unwrap_or_else(|f| panic!("solver failed: {}", f.error))
}

/// Iterate reached after at most `steps` accepted composite steps.
pub fn iterate_after(problem: &RodProblem, steps: usize) -> ProductPoint {
    let cfg = SolverConfig {
        max_iter: steps,
        ..Default::default()
    };
    match composite_step_solve(problem, helix_initial(&problem.cfg), &cfg) {
        Ok(state) => state.x,
        Err(f) => f.state.x,
    }
}

pub fn random_unit(rng: &mut impl Rng) -> SpherePoint {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 0.1 {
            return SpherePoint::normalize(v).unwrap();
        }
    }
}

/// Rod with random stiffness and loads at a random state.
pub fn random_rod_state(
    rng: &mut impl Rng,
    n: usize,
    model: RetractionKind,
    update: RetractionKind,
) -> (RodProblem, ProductPoint) {
    let mut cfg = RodConfig::helix(n, 1.0, Vec3::zeros(), 0.6, 0.5).unwrap();
    cfg.sigma = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    cfg.loads = (0..=n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            )
        })
        .collect();
    let ys = (1..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let vs = (1..n).map(|_| random_unit(rng)).collect();
    (
        RodProblem::new(cfg, model, update).unwrap(),
        ProductPoint::new(ys, vs).unwrap(),
    )
}

/// Writes to the process's stdout descriptor, bypassing the test harness's
/// output capture, so the summary lines appear in every run.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion:>2} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    #[cfg(unix)]
    {
        use std::io::Write;
        use std::os::fd::FromRawFd;
        // fd 1 stays owned by the process; never close it
        let mut raw = std::mem::ManuallyDrop::new(unsafe { std::fs::File::from_raw_fd(1) });
        if raw.write_all(line.as_bytes()).is_ok() {
            return;
        }
    }
    print!("{line}");
}
