//! Fixed-size 3D vectors, 3×3 matrices and rigid transforms.
//!
//! The simulation touches 27 grid nodes per particle per transfer, so these
//! are plain `Copy` arrays with everything inlined.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vector3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vector3<T> {
    #[inline(always)]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline(always)]
    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline(always)]
    pub fn repeat(v: T) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.as_f64(), self.y.as_f64(), self.z.as_f64()]
    }

    #[inline(always)]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline(always)]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline(always)]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline(always)]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline(always)]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; the zero vector is returned unchanged.
    pub fn normalize(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            *self * n.recip()
        } else {
            *self
        }
    }

    /// Outer product `self ⊗ o` (rows indexed by `self`).
    #[inline(always)]
    pub fn outer(&self, o: &Self) -> Matrix3<T> {
        let a = self.to_array();
        let b = o.to_array();
        let mut m = Matrix3::zeros();
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                m.0[i][j] = *ai * *bj;
            }
        }
        m
    }

    pub fn component_min(&self, o: &Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(&self, o: &Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(&self) -> Vector3<U> {
        Vector3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Index<usize> for Vector3<T> {
    type Output = T;
    #[inline(always)]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vector3 index {i} out of range"),
        }
    }
}

impl<T: Real> IndexMut<usize> for Vector3<T> {
    #[inline(always)]
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vector3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vector3<T> {
    type Output = Self;
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vector3<T> {
    #[inline(always)]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Real> Sub for Vector3<T> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vector3<T> {
    #[inline(always)]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl<T: Real> Mul<T> for Vector3<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vector3<T> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Matrix3<T>(pub [[T; 3]; 3]);

impl<T: Real> Matrix3<T> {
    #[inline(always)]
    pub fn zeros() -> Self {
        Self([[T::zero(); 3]; 3])
    }

    #[inline(always)]
    pub fn identity() -> Self {
        Self::from_diagonal(T::one(), T::one(), T::one())
    }

    pub fn from_diagonal(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Self([[a, z, z], [z, b, z], [z, z, c]])
    }

    pub fn from_rows(r: [[T; 3]; 3]) -> Self {
        Self(r)
    }

    /// Matrix whose columns are `a`, `b`, `c`.
    pub fn from_columns(a: Vector3<T>, b: Vector3<T>, c: Vector3<T>) -> Self {
        Self([[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]])
    }

    pub fn from_f64(r: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for (row, src) in m.0.iter_mut().zip(&r) {
            for (v, &x) in row.iter_mut().zip(src) {
                *v = T::lit(x);
            }
        }
        m
    }

    #[inline(always)]
    pub fn column(&self, j: usize) -> Vector3<T> {
        Vector3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    #[inline(always)]
    pub fn transpose(&self) -> Self {
        let a = &self.0;
        Self([
            [a[0][0], a[1][0], a[2][0]],
            [a[0][1], a[1][1], a[2][1]],
            [a[0][2], a[1][2], a[2][2]],
        ])
    }

    #[inline(always)]
    pub fn determinant(&self) -> T {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Cofactor matrix; `cof(A) = det(A) A⁻ᵀ`.
    #[inline(always)]
    pub fn cofactor(&self) -> Self {
        let a = &self.0;
        Self([
            [
                a[1][1] * a[2][2] - a[1][2] * a[2][1],
                a[1][2] * a[2][0] - a[1][0] * a[2][2],
                a[1][0] * a[2][1] - a[1][1] * a[2][0],
            ],
            [
                a[0][2] * a[2][1] - a[0][1] * a[2][2],
                a[0][0] * a[2][2] - a[0][2] * a[2][0],
                a[0][1] * a[2][0] - a[0][0] * a[2][1],
            ],
            [
                a[0][1] * a[1][2] - a[0][2] * a[1][1],
                a[0][2] * a[1][0] - a[0][0] * a[1][2],
                a[0][0] * a[1][1] - a[0][1] * a[1][0],
            ],
        ])
    }

    /// `A⁻ᵀ`, or `None` for a singular matrix.
    pub fn inverse_transpose(&self) -> Option<Self> {
        let det = self.determinant();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        Some(self.cofactor() * det.recip())
    }

    pub fn try_inverse(&self) -> Option<Self> {
        self.inverse_transpose().map(|m| m.transpose())
    }

    #[inline(always)]
    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn frobenius_norm(&self) -> T {
        self.0.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Rotation by `angle` radians about `axis` (Rodrigues).
    pub fn rotation(axis: Vector3<T>, angle: T) -> Self {
        let k = axis.normalize();
        let (s, c) = angle.sin_cos();
        let skew = Self([
            [T::zero(), -k.z, k.y],
            [k.z, T::zero(), -k.x],
            [-k.y, k.x, T::zero()],
        ]);
        Self::identity() + skew * s + (skew * skew) * (T::one() - c)
    }

    pub fn cast<U: Real>(&self) -> Matrix3<U> {
        let mut m = Matrix3::<U>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = U::lit(self.0[i][j].as_f64());
            }
        }
        m
    }
}

impl<T: Real> Add for Matrix3<T> {
    type Output = Self;
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        let mut m = self;
        m += o;
        m
    }
}

impl<T: Real> AddAssign for Matrix3<T> {
    #[inline(always)]
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl<T: Real> Sub for Matrix3<T> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] -= o.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Mul<T> for Matrix3<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, s: T) -> Self {
        let mut m = self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }
}

impl<T: Real> Mul<Vector3<T>> for Matrix3<T> {
    type Output = Vector3<T>;
    #[inline(always)]
    fn mul(self, v: Vector3<T>) -> Vector3<T> {
        let a = &self.0;
        Vector3::new(
            a[0][0] * v.x + a[0][1] * v.y + a[0][2] * v.z,
            a[1][0] * v.x + a[1][1] * v.y + a[1][2] * v.z,
            a[2][0] * v.x + a[2][1] * v.y + a[2][2] * v.z,
        )
    }
}

impl<T: Real> Mul for Matrix3<T> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] =
                    self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        m
    }
}

/// Proper rigid motion `x ↦ R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    #[inline]
    pub fn apply_point(&self, p: Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    /// True when the rotation block is orthonormal with determinant +1.
    pub fn is_proper(&self, tol: T) -> bool {
        let r = self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).frobenius_norm();
        err <= tol && (r.determinant() - T::one()).abs() <= tol
    }

    pub fn cast<U: Real>(&self) -> RigidTransform<U> {
        RigidTransform::new(self.rotation.cast(), self.translation.cast())
    }
}
