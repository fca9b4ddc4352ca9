//! Hard-magnetic neo-Hookean solid.
//!
//! The free energy per reference volume is
//! `Ψ(F) = μ/2 (tr FᵀF − 3) − μ ln J + λ/2 (ln J)² − (F M_r)·B`,
//! so the first Piola–Kirchhoff stress splits into an elastic part and a
//! field-dependent part that does not depend on `F`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix3, Vector3};
use crate::num::Real;

/// Lamé parameters of the elastomer matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material<T> {
    pub mu: T,
    pub lambda: T,
}

impl<T: Real> Material<T> {
    pub fn from_shear_poisson(mu: T, nu: T) -> Self {
        let two = T::lit(2.0);
        Self {
            mu,
            lambda: two * mu * nu / (T::one() - two * nu),
        }
    }
}

/// `P_e = μ (F − F⁻ᵀ) + λ ln(J) F⁻ᵀ`.
///
/// `particle` is only used to label the inversion error.
#[inline]
pub fn elastic_stress<T: Real>(
    f: &Matrix3<T>,
    material: &Material<T>,
    particle: usize,
) -> Result<Matrix3<T>> {
    let j = f.determinant();
    if !(j > T::zero()) {
        return Err(Error::Inversion {
            particle,
            det: j.as_f64(),
        });
    }
    let f_inv_t = f.cofactor() * j.recip();
    Ok((*f - f_inv_t) * material.mu + f_inv_t * (material.lambda * j.ln()))
}

/// `P_m = −B ⊗ M_r` from the potential `−(F M_r)·B`.
#[inline]
pub fn magnetic_stress<T: Real>(b: &Vector3<T>, m_r: &Vector3<T>) -> Matrix3<T> {
    b.outer(m_r) * -T::one()
}

/// Body couple density `(F M_r) × B` exerted by the field on the material.
pub fn magnetic_couple<T: Real>(f: &Matrix3<T>, m_r: &Vector3<T>, b: &Vector3<T>) -> Vector3<T> {
    (*f * *m_r).cross(b)
}
