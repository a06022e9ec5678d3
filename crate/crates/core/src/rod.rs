//! Discretized inextensible elastic rod.
//!
//! A rod of unit length is sampled at `s_i = i·h`, `h = 1/n`. Node `i`
//! carries a position `y_i ∈ ℝ³` and a unit tangent `v_i ∈ 𝕊²`. Both ends
//! are clamped: `y_0, v_0, y_n, v_n` are fixed, the unknowns are the interior
//! nodes `1..n-1`. The energy is
//!
//! ```text
//! f = Σ_{i=0}^{n-1} σ_i/(2h) |v_{i+1} − v_i|² − Σ_{i=1}^{n-1} h⟨g_i, y_i⟩
//! ```
//!
//! subject to the discrete inextensibility constraints
//! `c_i = (y_{i+1} − y_i)/h − v_i = 0`, `i = 0..n-1`.
//!
//! Tangent coordinates are laid out per interior node as `[δy (3), δu (2)]`.

use nalgebra::{DVector, Vector2};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use thiserror::Error;

use crate::kkt::KktPartition;
use crate::manifold::{
    product_retract, sphere_param_second_derivative, ProductPoint, RetractionKind, SpherePoint,
    Vec3, NODE_DIM,
};
use crate::sqp::{ProblemOracle, SqpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RodError {
    #[error("invalid rod configuration: {0}")]
    InvalidConfig(String),
}

/// Rod data: discretization, material, loads and clamped boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct RodConfig {
    /// Number of grid intervals.
    pub n: usize,
    /// Flexural stiffness on each interval, length `n`.
    pub sigma: Vec<f64>,
    /// Load density at each node, length `n + 1`; boundary entries are unused.
    pub loads: Vec<Vec3>,
    /// Helix radius of the initial guess.
    pub radius: f64,
    /// Helix pitch parameter of the initial guess.
    pub pitch: f64,
    pub y_a: Vec3,
    pub y_b: Vec3,
    pub v_a: SpherePoint,
    pub v_b: SpherePoint,
}

/// Angular frequency `1/√(r² + a²)` of the initial helix.
pub fn helix_frequency(radius: f64, pitch: f64) -> f64 {
    1.0 / (radius * radius + pitch * pitch).sqrt()
}

/// `y₀(s) = [r cos ωs, r sin ωs, a²ωs]`.
pub fn helix_point(radius: f64, pitch: f64, s: f64) -> Vec3 {
    let w = helix_frequency(radius, pitch);
    Vec3::new(
        radius * (w * s).cos(),
        radius * (w * s).sin(),
        pitch * pitch * w * s,
    )
}

/// `y₀′(s)`, not normalized.
pub fn helix_derivative(radius: f64, pitch: f64, s: f64) -> Vec3 {
    let w = helix_frequency(radius, pitch);
    Vec3::new(
        -radius * w * (w * s).sin(),
        radius * w * (w * s).cos(),
        pitch * pitch * w,
    )
}

impl RodConfig {
    /// Constant stiffness and load, clamped at the ends of the helix
    /// `y₀` with tangents `y₀′/|y₀′|`.
    pub fn helix(
        n: usize,
        sigma: f64,
        load: Vec3,
        radius: f64,
        pitch: f64,
    ) -> Result<Self, RodError> {
        if n < 2 {
            return Err(RodError::InvalidConfig(format!(
                "need at least 2 intervals, got {n}"
            )));
        }
        let tangent = |s| {
            SpherePoint::normalize(helix_derivative(radius, pitch, s))
                .map_err(|e| RodError::InvalidConfig(e.to_string()))
        };
        let cfg = Self {
            n,
            sigma: vec![sigma; n],
            loads: vec![load; n + 1],
            radius,
            pitch,
            y_a: helix_point(radius, pitch, 0.0),
            y_b: helix_point(radius, pitch, 1.0),
            v_a: tangent(0.0)?,
            v_b: tangent(1.0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RodError> {
        let bad = |msg: String| Err(RodError::InvalidConfig(msg));
        if self.n < 2 {
            return bad(format!("need at least 2 intervals, got {}", self.n));
        }
        if self.sigma.len() != self.n || self.loads.len() != self.n + 1 {
            return bad(format!(
                "expected {} stiffness values and {} loads, got {} and {}",
                self.n,
                self.n + 1,
                self.sigma.len(),
                self.loads.len()
            ));
        }
        if let Some(s) = self.sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("stiffness must be positive, got {s}"));
        }
        if !(self.radius.is_finite() && self.pitch.is_finite())
            || self.radius == 0.0 && self.pitch == 0.0
        {
            return bad("helix radius and pitch must be finite and not both zero".into());
        }
        for v in [&self.v_a, &self.v_b] {
            if (v.vector().norm() - 1.0).abs() > 1e-12 {
                return bad("boundary tangents must be unit vectors".into());
            }
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn interior_nodes(&self) -> usize {
        self.n - 1
    }

    pub fn tangent_dim(&self) -> usize {
        NODE_DIM * self.interior_nodes()
    }

    pub fn constraint_dim(&self) -> usize {
        3 * self.n
    }
}

/// Samples the helix at the interior nodes.
pub fn helix_initial(cfg: &RodConfig) -> ProductPoint {
    let h = cfg.h();
    let (ys, vs) = (1..cfg.n)
        .map(|i| {
            let s = i as f64 * h;
            let v = SpherePoint::normalize(helix_derivative(cfg.radius, cfg.pitch, s))
                .expect("helix derivative never vanishes");
            (helix_point(cfg.radius, cfg.pitch, s), v)
        })
        .unzip();
    ProductPoint::new(ys, vs).expect("matching lengths")
}

/// Positions and tangents of all nodes `0..=n`, boundaries included.
pub fn full_curve(cfg: &RodConfig, state: &ProductPoint) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut ys = Vec::with_capacity(cfg.n + 1);
    let mut vs = Vec::with_capacity(cfg.n + 1);
    ys.push(cfg.y_a);
    vs.push(*cfg.v_a.vector());
    ys.extend_from_slice(state.euclidean());
    vs.extend(state.spheres().iter().map(|v| *v.vector()));
    ys.push(cfg.y_b);
    vs.push(*cfg.v_b.vector());
    (ys, vs)
}

fn energy_direct(cfg: &RodConfig, state: &ProductPoint) -> f64 {
    let (ys, vs) = full_curve(cfg, state);
    let h = cfg.h();
    let bending: f64 = (0..cfg.n)
        .map(|i| cfg.sigma[i] / (2.0 * h) * (vs[i + 1] - vs[i]).norm_squared())
        .sum();
    let load: f64 = (1..cfg.n).map(|i| h * cfg.loads[i].dot(&ys[i])).sum();
    bending - load
}

fn constraint_direct(cfg: &RodConfig, state: &ProductPoint) -> DVector<f64> {
    let (ys, vs) = full_curve(cfg, state);
    let h = cfg.h();
    let mut c = DVector::zeros(cfg.constraint_dim());
    for i in 0..cfg.n {
        let block = (ys[i + 1] - ys[i]) / h - vs[i];
        c.fixed_rows_mut::<3>(3 * i).copy_from(&block);
    }
    c
}

/// Energy at `R_x(u)`.
pub fn energy_eval(
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
    u: &DVector<f64>,
) -> Result<f64, SqpError> {
    Ok(energy_direct(cfg, &product_retract(state, kind, u)?))
}

/// All `n` constraint blocks at `R_x(u)`.
pub fn constraint_eval(
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
    u: &DVector<f64>,
) -> Result<DVector<f64>, SqpError> {
    Ok(constraint_direct(cfg, &product_retract(state, kind, u)?))
}

/// `max_i |(y_{i+1} − y_i)/h − v_i|_∞`.
pub fn inextensibility_residual(cfg: &RodConfig, state: &ProductPoint) -> f64 {
    constraint_direct(cfg, state).amax()
}

/// Offset of interior node `i ∈ 1..n` in tangent coordinates.
fn offset(i: usize) -> usize {
    NODE_DIM * (i - 1)
}

const UNIT: [Vector2<f64>; 2] = [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];

/// `f′(0)`, the same for both parametrizations.
pub fn energy_gradient(cfg: &RodConfig, state: &ProductPoint) -> DVector<f64> {
    let (_, vs) = full_curve(cfg, state);
    let h = cfg.h();
    let mut g = DVector::zeros(cfg.tangent_dim());
    for i in 1..cfg.n {
        let o = offset(i);
        let load = -cfg.loads[i] * h;
        g.fixed_rows_mut::<3>(o).copy_from(&load);
        let basis = &state.bases()[i - 1];
        let w = cfg.sigma[i - 1] * (vs[i] - vs[i - 1]) - cfg.sigma[i] * (vs[i + 1] - vs[i]);
        g[o + 3] = basis.zeta1.dot(&w) / h;
        g[o + 4] = basis.zeta2.dot(&w) / h;
    }
    g
}

fn push_sphere_block(coo: &mut CooMatrix<f64>, row: usize, col: usize, block: &[[f64; 2]; 2]) {
    for (a, r) in block.iter().enumerate() {
        for (b, v) in r.iter().enumerate() {
            if *v != 0.0 {
                coo.push(row + a, col + b, *v);
            }
        }
    }
}

/// Adds `f″(0)` for the parametrization `kind` to `coo`. The `y` blocks vanish.
fn add_energy_hessian(
    coo: &mut CooMatrix<f64>,
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
) {
    let (_, vs) = full_curve(cfg, state);
    let h = cfg.h();
    for i in 1..cfg.n {
        let o = offset(i) + 3;
        let v = &state.spheres()[i - 1];
        let basis = &state.bases()[i - 1];
        let w = cfg.sigma[i - 1] * (vs[i] - vs[i - 1]) - cfg.sigma[i] * (vs[i + 1] - vs[i]);
        let mut block = [[0.0; 2]; 2];
        for (a, ea) in UNIT.iter().enumerate() {
            for (b, eb) in UNIT.iter().enumerate() {
                let curvature = sphere_param_second_derivative(kind, v, basis, ea, eb).dot(&w);
                let diag = if a == b {
                    cfg.sigma[i - 1] + cfg.sigma[i]
                } else {
                    0.0
                };
                block[a][b] = (diag + curvature) / h;
            }
        }
        push_sphere_block(coo, o, o, &block);
        if i + 1 < cfg.n {
            let next = &state.bases()[i];
            let z = [basis.zeta1, basis.zeta2];
            let zn = [next.zeta1, next.zeta2];
            let mut coupling = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    coupling[a][b] = -cfg.sigma[i] / h * z[a].dot(&zn[b]);
                }
            }
            let transposed = [
                [coupling[0][0], coupling[1][0]],
                [coupling[0][1], coupling[1][1]],
            ];
            push_sphere_block(coo, o, offset(i + 1) + 3, &coupling);
            push_sphere_block(coo, offset(i + 1) + 3, o, &transposed);
        }
    }
}

/// Adds `p·c″(0)` for the parametrization `kind`; only `u_i` blocks are nonzero.
fn add_constraint_hessian(
    coo: &mut CooMatrix<f64>,
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
    p: &DVector<f64>,
) {
    for i in 1..cfg.n {
        let o = offset(i) + 3;
        let v = &state.spheres()[i - 1];
        let basis = &state.bases()[i - 1];
        let pi = Vec3::new(p[3 * i], p[3 * i + 1], p[3 * i + 2]);
        let mut block = [[0.0; 2]; 2];
        for (a, ea) in UNIT.iter().enumerate() {
            for (b, eb) in UNIT.iter().enumerate() {
                block[a][b] = -pi.dot(&sphere_param_second_derivative(kind, v, basis, ea, eb));
            }
        }
        push_sphere_block(coo, o, o, &block);
    }
}

/// `f″(0)` for the parametrization `kind`.
pub fn energy_hessian(
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
) -> CsrMatrix<f64> {
    let d = cfg.tangent_dim();
    let mut coo = CooMatrix::new(d, d);
    add_energy_hessian(&mut coo, cfg, state, kind);
    CsrMatrix::from(&coo)
}

/// `p·c″(0)` for the parametrization `kind`.
pub fn constraint_hessian(
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
    p: &DVector<f64>,
) -> CsrMatrix<f64> {
    let d = cfg.tangent_dim();
    let mut coo = CooMatrix::new(d, d);
    add_constraint_hessian(&mut coo, cfg, state, kind, p);
    CsrMatrix::from(&coo)
}

/// `L″(0, p) = f″(0) + p·c″(0)` for the parametrization `kind`.
pub fn lagrangian_hessian(
    cfg: &RodConfig,
    state: &ProductPoint,
    kind: RetractionKind,
    p: &DVector<f64>,
) -> CsrMatrix<f64> {
    let d = cfg.tangent_dim();
    let mut coo = CooMatrix::new(d, d);
    add_energy_hessian(&mut coo, cfg, state, kind);
    add_constraint_hessian(&mut coo, cfg, state, kind, p);
    CsrMatrix::from(&coo)
}

/// `c′(0)`: block bidiagonal in `y`, block diagonal in `u`.
pub fn constraint_jacobian(cfg: &RodConfig, state: &ProductPoint) -> CsrMatrix<f64> {
    let h = cfg.h();
    let mut coo = CooMatrix::new(cfg.constraint_dim(), cfg.tangent_dim());
    for i in 0..cfg.n {
        let row = 3 * i;
        if i >= 1 {
            let o = offset(i);
            let basis = &state.bases()[i - 1];
            for r in 0..3 {
                coo.push(row + r, o + r, -1.0 / h);
                coo.push(row + r, o + 3, -basis.zeta1[r]);
                coo.push(row + r, o + 4, -basis.zeta2[r]);
            }
        }
        if i + 1 < cfg.n {
            let o = offset(i + 1);
            for r in 0..3 {
                coo.push(row + r, o + r, 1.0 / h);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Pivot blocks `[y_k, u_k, λ_{k-1}]`, `k = 1..n-1`, with `λ_{n-1}` joining
/// the last block. The saddle-point matrix is block tridiagonal in it.
pub fn rod_kkt_partition(cfg: &RodConfig) -> KktPartition {
    let d = cfg.tangent_dim();
    let mut blocks: Vec<Vec<usize>> = (1..cfg.n)
        .map(|k| {
            let mut b: Vec<usize> = (offset(k)..offset(k) + NODE_DIM).collect();
            b.extend(d + 3 * (k - 1)..d + 3 * k);
            b
        })
        .collect();
    let last = blocks.last_mut().expect("n >= 2");
    last.extend(d + 3 * (cfg.n - 1)..d + 3 * cfg.n);
    KktPartition::new(blocks, d + cfg.constraint_dim())
}

/// The rod as an SQP problem, with derivatives in the `model` parametrization
/// and evaluations and updates in the `update` parametrization.
#[derive(Debug, Clone)]
pub struct RodProblem {
    pub cfg: RodConfig,
    pub model: RetractionKind,
    pub update: RetractionKind,
}

impl RodProblem {
    pub fn new(
        cfg: RodConfig,
        model: RetractionKind,
        update: RetractionKind,
    ) -> Result<Self, RodError> {
        cfg.validate()?;
        Ok(Self { cfg, model, update })
    }
}

impl ProblemOracle for RodProblem {
    type Point = ProductPoint;

    fn tangent_dim(&self, _x: &ProductPoint) -> usize {
        self.cfg.tangent_dim()
    }

    fn constraint_dim(&self, _x: &ProductPoint) -> usize {
        self.cfg.constraint_dim()
    }

    fn objective(&self, x: &ProductPoint, u: &DVector<f64>) -> Result<f64, SqpError> {
        energy_eval(&self.cfg, x, self.update, u)
    }

    fn constraint(&self, x: &ProductPoint, u: &DVector<f64>) -> Result<DVector<f64>, SqpError> {
        constraint_eval(&self.cfg, x, self.update, u)
    }

    fn objective_gradient(&self, x: &ProductPoint) -> DVector<f64> {
        energy_gradient(&self.cfg, x)
    }

    fn constraint_jacobian(&self, x: &ProductPoint) -> CsrMatrix<f64> {
        constraint_jacobian(&self.cfg, x)
    }

    fn lagrangian_hessian(&self, x: &ProductPoint, p: &DVector<f64>) -> CsrMatrix<f64> {
        lagrangian_hessian(&self.cfg, x, self.model, p)
    }

    fn retract(&self, x: &ProductPoint, u: &DVector<f64>) -> Result<ProductPoint, SqpError> {
        Ok(product_retract(x, self.update, u)?)
    }

    fn kkt_partition(&self, _x: &ProductPoint) -> Option<KktPartition> {
        Some(rod_kkt_partition(&self.cfg))
    }

    /// Both sphere parametrizations have the same second derivative at the
    /// origin and the constraint target is linear.
    fn second_order_consistent(&self) -> bool {
        true
    }
}
