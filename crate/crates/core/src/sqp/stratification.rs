use nalgebra::DVector;

use crate::manifold::{sphere_tangent_basis, ManifoldError, SpherePoint, TangentBasis, Vec3};

/// Maps the constraint target near a base point `y` into coordinates of `T_yY`,
/// sending `y` to zero with identity derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum Stratification {
    /// `w ↦ w − y` on a linear target.
    IdentityLinear { base: DVector<f64> },
    /// Inverse of the projection parametrization of `𝕊²`, extended to the
    /// half-space `<w, y> > 0` by `w ↦ w/<w, y> − y`.
    SphereProjectionInverse { base: SpherePoint },
}

fn as_vec3(w: &DVector<f64>) -> Result<Vec3, ManifoldError> {
    if w.len() != 3 {
        return Err(ManifoldError::DimensionMismatch {
            expected: 3,
            actual: w.len(),
        });
    }
    Ok(Vec3::new(w[0], w[1], w[2]))
}

fn coords(basis: &TangentBasis, w: &Vec3) -> DVector<f64> {
    let c = basis.coords(w);
    DVector::from_column_slice(c.as_slice())
}

impl Stratification {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IdentityLinear { .. } => "identity-linear",
            Self::SphereProjectionInverse { .. } => "sphere-projection-inverse",
        }
    }

    pub fn apply(&self, w: &DVector<f64>) -> Result<DVector<f64>, ManifoldError> {
        match self {
            Self::IdentityLinear { base } => {
                if w.len() != base.len() {
                    return Err(ManifoldError::DimensionMismatch {
                        expected: base.len(),
                        actual: w.len(),
                    });
                }
                Ok(w - base)
            }
            Self::SphereProjectionInverse { base } => {
                let w = as_vec3(w)?;
                let y = base.vector();
                let dot = w.dot(y);
                if dot <= 0.0 {
                    return Err(ManifoldError::OutsideHemisphere { dot });
                }
                Ok(coords(&sphere_tangent_basis(base), &(w / dot - y)))
            }
        }
    }

    /// `S′(y)a`.
    pub fn derivative(&self, a: &DVector<f64>) -> Result<DVector<f64>, ManifoldError> {
        match self {
            Self::IdentityLinear { .. } => Ok(a.clone()),
            Self::SphereProjectionInverse { base } => {
                let a = as_vec3(a)?;
                let y = base.vector();
                Ok(coords(&sphere_tangent_basis(base), &(a - y * a.dot(y))))
            }
        }
    }

    /// `S″(y)(a, b)`.
    pub fn second_derivative(
        &self,
        a: &DVector<f64>,
        b: &DVector<f64>,
    ) -> Result<DVector<f64>, ManifoldError> {
        match self {
            Self::IdentityLinear { base } => Ok(DVector::zeros(base.len())),
            Self::SphereProjectionInverse { base } => {
                let (a, b) = (as_vec3(a)?, as_vec3(b)?);
                let y = base.vector();
                let w = -a * b.dot(y) - b * a.dot(y) + y * (2.0 * a.dot(y) * b.dot(y));
                Ok(coords(&sphere_tangent_basis(base), &w))
            }
        }
    }
}
