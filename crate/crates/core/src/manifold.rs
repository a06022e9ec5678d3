//! Product-manifold geometry for `(ℝ³ × 𝕊²)^N`.
//!
//! Points carry their ambient coordinates (a position in ℝ³ and a unit vector
//! in ℝ³ per node). Tangent vectors are handled as coefficient vectors in a
//! per-node orthonormal basis, laid out node by node as
//! `[δy₁ δy₂ δy₃ u₁ u₂]`.
//!
//! Two local parametrizations of the sphere are provided:
//!
//! ```text
//! projection:   μ_p(u) = (v + u₁ζ₁ + u₂ζ₂) / ‖v + u₁ζ₁ + u₂ζ₂‖
//! exponential:  μ_e(u) = exp(u₁C₁ + u₂C₂) v,   C_j = ζ_j vᵀ − v ζ_jᵀ
//! ```
//!
//! Both share the first derivative `δu ↦ δu₁ζ₁ + δu₂ζ₂` at the origin.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix3, Vector2, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Coefficient vector of a tangent vector in the per-node bases.
pub type TangentCoords = DVector<f64>;

/// Number of tangent coordinates per `(ℝ³ × 𝕊²)` node.
pub const NODE_DIM: usize = 5;

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("point is outside the invertibility hemisphere (<w, v> = {dot:e})")]
    OutsideHemisphere { dot: f64 },
    #[error("vector of norm {norm:e} is not a unit vector")]
    NotUnit { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A point on the unit sphere, stored as its embedding in ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Wraps a vector that is already unit length (to within `1e-10`).
    pub fn from_unit(v: Vec3) -> Result<Self, ManifoldError> {
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOL || !norm.is_finite() {
            return Err(ManifoldError::NotUnit { norm });
        }
        Ok(Self(v))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalize(v: Vec3) -> Result<Self, ManifoldError> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ManifoldError::NotUnit { norm });
        }
        Ok(Self(v / norm))
    }

    pub fn vector(&self) -> &Vec3 {
        &self.0
    }
}

/// Orthonormal basis `{ζ₁, ζ₂}` of `T_v𝕊²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentBasis {
    pub zeta1: Vec3,
    pub zeta2: Vec3,
}

impl TangentBasis {
    /// `u₁ζ₁ + u₂ζ₂`, i.e. `μ′(0)u` for both parametrizations.
    pub fn embed(&self, u: &Vector2<f64>) -> Vec3 {
        self.zeta1 * u[0] + self.zeta2 * u[1]
    }

    /// Coefficients of the orthogonal projection of `w` onto the basis.
    pub fn coords(&self, w: &Vec3) -> Vector2<f64> {
        Vector2::new(w.dot(&self.zeta1), w.dot(&self.zeta2))
    }

    /// The pair of skew generators `C_j = ζ_j vᵀ − v ζ_jᵀ`, so that `C_j v = ζ_j`.
    pub fn generators(&self, v: &SpherePoint) -> [Matrix3<f64>; 2] {
        let v = v.vector();
        [
            self.zeta1 * v.transpose() - v * self.zeta1.transpose(),
            self.zeta2 * v.transpose() - v * self.zeta2.transpose(),
        ]
    }
}

/// Deterministic tangent basis: the standard axis least aligned with `v`
/// (lowest index on ties), orthogonalized against `v`, then `ζ₂ = v × ζ₁`.
pub fn sphere_tangent_basis(v: &SpherePoint) -> TangentBasis {
    let v = v.vector();
    let mut axis = 0;
    for k in 1..3 {
        if v[k].abs() < v[axis].abs() {
            axis = k;
        }
    }
    let e = Vec3::ith(axis, 1.0);
    let zeta1 = (e - v * v[axis]).normalize();
    let zeta2 = v.cross(&zeta1);
    TangentBasis { zeta1, zeta2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RetractionKind {
    Projection,
    Exponential,
}

impl RetractionKind {
    pub const ALL: [RetractionKind; 2] = [RetractionKind::Projection, RetractionKind::Exponential];

    pub fn name(&self) -> &'static str {
        match self {
            RetractionKind::Projection => "projection",
            RetractionKind::Exponential => "exponential",
        }
    }
}

impl fmt::Display for RetractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RetractionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projection" => Ok(RetractionKind::Projection),
            "exponential" => Ok(RetractionKind::Exponential),
            other => Err(format!(
                "unknown retraction '{other}' (expected 'projection' or 'exponential')"
            )),
        }
    }
}

/// Evaluates the local parametrization `μ_v(u)` of the chosen kind.
pub fn sphere_retract(
    kind: RetractionKind,
    v: &SpherePoint,
    basis: &TangentBasis,
    u: &Vector2<f64>,
) -> SpherePoint {
    let tangent = basis.embed(u);
    let v = v.vector();
    match kind {
        RetractionKind::Projection => SpherePoint((v + tangent).normalize()),
        RetractionKind::Exponential => {
            // exp(u₁C₁ + u₂C₂) is the rotation about v × ζ by the angle |u|.
            let angle = u.norm();
            if angle == 0.0 {
                return SpherePoint(*v);
            }
            let w = v * angle.cos() + tangent * (angle.sin() / angle);
            SpherePoint(w.normalize())
        }
    }
}

/// `μ′_v(0)δu`, identical for both parametrizations.
pub fn sphere_param_first_derivative(basis: &TangentBasis, du: &Vector2<f64>) -> Vec3 {
    basis.embed(du)
}

/// `μ″_v(0)(δu, δw)` embedded in ℝ³.
pub fn sphere_param_second_derivative(
    kind: RetractionKind,
    v: &SpherePoint,
    basis: &TangentBasis,
    du: &Vector2<f64>,
    dw: &Vector2<f64>,
) -> Vec3 {
    match kind {
        RetractionKind::Projection => -v.vector() * du.dot(dw),
        RetractionKind::Exponential => {
            let [c1, c2] = basis.generators(v);
            let a = c1 * du[0] + c2 * du[1];
            let b = c1 * dw[0] + c2 * dw[1];
            // symmetric part of A·B; for these generators A·B·v is already symmetric
            (a * b + b * a) * v.vector() * 0.5
        }
    }
}

/// Inverse of the projection parametrization on the hemisphere `<w, v> > 0`.
pub fn sphere_inverse_projection_retraction(
    v: &SpherePoint,
    w: &SpherePoint,
    basis: &TangentBasis,
) -> Result<Vector2<f64>, ManifoldError> {
    let dot = w.vector().dot(v.vector());
    if dot <= 0.0 {
        return Err(ManifoldError::OutsideHemisphere { dot });
    }
    let dv = w.vector() / dot - v.vector();
    Ok(basis.coords(&dv))
}

/// A point of `(ℝ³ × 𝕊²)^N` together with the tangent basis of every sphere
/// factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    euclidean: Vec<Vec3>,
    spheres: Vec<SpherePoint>,
    bases: Vec<TangentBasis>,
}

impl ProductPoint {
    pub fn new(euclidean: Vec<Vec3>, spheres: Vec<SpherePoint>) -> Result<Self, ManifoldError> {
        if euclidean.len() != spheres.len() {
            return Err(ManifoldError::DimensionMismatch {
                expected: euclidean.len(),
                actual: spheres.len(),
            });
        }
        let bases = spheres.iter().map(sphere_tangent_basis).collect();
        Ok(Self {
            euclidean,
            spheres,
            bases,
        })
    }

    pub fn nodes(&self) -> usize {
        self.euclidean.len()
    }

    pub fn tangent_dim(&self) -> usize {
        NODE_DIM * self.nodes()
    }

    pub fn euclidean(&self) -> &[Vec3] {
        &self.euclidean
    }

    pub fn spheres(&self) -> &[SpherePoint] {
        &self.spheres
    }

    pub fn bases(&self) -> &[TangentBasis] {
        &self.bases
    }

    fn check_coords(&self, u: &TangentCoords) -> Result<(), ManifoldError> {
        if u.len() != self.tangent_dim() {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.tangent_dim(),
                actual: u.len(),
            });
        }
        Ok(())
    }
}

/// Euclidean part of node `i` in a coefficient vector.
pub fn node_translation(u: &TangentCoords, i: usize) -> Vec3 {
    Vec3::new(u[NODE_DIM * i], u[NODE_DIM * i + 1], u[NODE_DIM * i + 2])
}

/// Sphere coefficients `(u₁, u₂)` of node `i` in a coefficient vector.
pub fn node_sphere_coords(u: &TangentCoords, i: usize) -> Vector2<f64> {
    Vector2::new(u[NODE_DIM * i + 3], u[NODE_DIM * i + 4])
}

/// Componentwise retraction: translation on ℝ³ blocks, `sphere_retract` on 𝕊² blocks.
pub fn product_retract(
    x: &ProductPoint,
    kind: RetractionKind,
    u: &TangentCoords,
) -> Result<ProductPoint, ManifoldError> {
    x.check_coords(u)?;
    let euclidean = x
        .euclidean
        .iter()
        .enumerate()
        .map(|(i, y)| y + node_translation(u, i))
        .collect();
    let spheres = x
        .spheres
        .iter()
        .zip(&x.bases)
        .enumerate()
        .map(|(i, (v, basis))| sphere_retract(kind, v, basis, &node_sphere_coords(u, i)))
        .collect();
    ProductPoint::new(euclidean, spheres)
}

/// The transport `Θ_{x₁→x₂} = R_{x₂}⁻¹ ∘ R_{x₁}` built from the projection
/// parametrization.
pub fn transport(
    x1: &ProductPoint,
    x2: &ProductPoint,
    u: &TangentCoords,
) -> Result<TangentCoords, ManifoldError> {
    x1.check_coords(u)?;
    if x1.nodes() != x2.nodes() {
        return Err(ManifoldError::DimensionMismatch {
            expected: x1.nodes(),
            actual: x2.nodes(),
        });
    }
    let mut out = TangentCoords::zeros(x2.tangent_dim());
    for i in 0..x1.nodes() {
        let shift = x1.euclidean[i] + node_translation(u, i) - x2.euclidean[i];
        let w = sphere_retract(
            RetractionKind::Projection,
            &x1.spheres[i],
            &x1.bases[i],
            &node_sphere_coords(u, i),
        );
        let coords = sphere_inverse_projection_retraction(&x2.spheres[i], &w, &x2.bases[i])?;
        out.fixed_rows_mut::<3>(NODE_DIM * i).copy_from(&shift);
        out.fixed_rows_mut::<2>(NODE_DIM * i + 3).copy_from(&coords);
    }
    Ok(out)
}

/// Coordinates of `x` in the chart of `base`, i.e. `R_base⁻¹(x)`.
pub fn chart_coords(base: &ProductPoint, x: &ProductPoint) -> Result<TangentCoords, ManifoldError> {
    transport(x, base, &TangentCoords::zeros(x.tangent_dim()))
}
