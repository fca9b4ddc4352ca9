//! Quadratic B-spline interpolation stencil.

use crate::linalg::Vector3;
use crate::num::Real;

/// The 3×3×3 block of grid nodes a particle interacts with.
#[derive(Clone, Copy, Debug)]
pub struct Stencil<T> {
    /// Grid index of the lowest-corner node.
    pub base: [i64; 3],
    /// Per-axis weights for nodes `base + 0..3`.
    pub weights: [[T; 3]; 3],
    /// Particle position minus the base node position, in cell units.
    pub frac: [T; 3],
}

impl<T: Real> Stencil<T> {
    /// Stencil for a particle at `local`, expressed in grid-local cell units
    /// (`(x - origin) / h`).
    #[inline(always)]
    pub fn new(local: Vector3<T>) -> Self {
        let half = T::lit(0.5);
        let three_quarters = T::lit(0.75);
        let one_and_half = T::lit(1.5);
        let mut base = [0i64; 3];
        let mut weights = [[T::zero(); 3]; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let g = local[a];
            // Floor via truncation; cheaper than the libm call.
            let shifted = g - half;
            let mut bi = shifted.to_i64().unwrap_or(i64::MIN / 2);
            let mut b = T::lit(bi as f64);
            if b > shifted {
                bi -= 1;
                b -= T::one();
            }
            let fx = g - b;
            base[a] = bi;
            frac[a] = fx;
            let d0 = one_and_half - fx;
            let d1 = fx - T::one();
            let d2 = fx - half;
            weights[a] = [half * d0 * d0, three_quarters - d1 * d1, half * d2 * d2];
        }
        Self {
            base,
            weights,
            frac,
        }
    }

    #[inline(always)]
    pub fn weight(&self, i: usize, j: usize, k: usize) -> T {
        self.weights[0][i] * self.weights[1][j] * self.weights[2][k]
    }

    /// Offset from the particle to node `base + (i, j, k)`, in cell units.
    #[inline(always)]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> Vector3<T> {
        Vector3::new(
            T::from_usize_lossy(i) - self.frac[0],
            T::from_usize_lossy(j) - self.frac[1],
            T::from_usize_lossy(k) - self.frac[2],
        )
    }
}

/// Quadratic B-spline N(x) for a node-to-particle distance `x` in cell units.
/// Reference form used by tests.
pub fn quadratic_bspline<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::lit(0.5) {
        T::lit(0.75) - ax * ax
    } else if ax < T::lit(1.5) {
        let d = T::lit(1.5) - ax;
        T::lit(0.5) * d * d
    } else {
        T::zero()
    }
}
