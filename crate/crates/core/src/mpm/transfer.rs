//! MLS-MPM particle-to-grid and grid-to-particle transfers.

use rayon::prelude::*;

use super::constitutive::{elastic_stress, magnetic_stress, Material};
use super::grid::{BackgroundGrid, NodeFlag};
use super::kernel::Stencil;
use crate::catheter::Particle;
use crate::error::{Error, Result};
use crate::linalg::{Matrix3, Vector3};
use crate::num::Real;

/// Nodes lighter than this are treated as empty. Stencil-edge nodes of real
/// particles weigh far more, so the cut loses no momentum above round-off.
pub const MASS_EPSILON: f64 = 1e-20;

/// Execution mode of the per-particle loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Reference mode; bit-reproducible.
    #[default]
    Serial,
    /// Per-particle stress and gather work on the rayon pool. Nodal
    /// accumulation stays ordered, so results are identical to `Serial`.
    Parallel,
}

/// Homogeneous loads acting on the body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Loads<T> {
    pub b_tesla: Vector3<T>,
    pub gravity: Vector3<T>,
}

impl<T: Real> Loads<T> {
    pub fn field(b_tesla: Vector3<T>) -> Self {
        Self {
            b_tesla,
            gravity: Vector3::zeros(),
        }
    }
}

/// Fused MLS-MPM affine term `−(4/h²) dt V0 P Fᵀ + m C` with
/// `P = P_e(F) + P_m`.
#[inline]
fn fused_affine<T: Real>(
    p: &Particle<T>,
    idx: usize,
    dt: T,
    inv_d: T,
    material: &Material<T>,
    b: &Vector3<T>,
) -> Result<Matrix3<T>> {
    let stress = elastic_stress(&p.f, material, idx)? + magnetic_stress(b, &p.m_r);
    Ok(stress * p.f.transpose() * (-dt * p.volume0 * inv_d) + p.c * p.mass)
}

/// Scatters particle mass, APIC momentum and internal forces to a cleared
/// grid, then adds gravity as a nodal force.
pub fn p2g<T: Real>(
    particles: &[Particle<T>],
    grid: &mut BackgroundGrid<T>,
    dt: T,
    material: &Material<T>,
    loads: &Loads<T>,
    mode: Parallelism,
) -> Result<()> {
    let h = grid.spacing;
    let inv_d = T::lit(4.0) / (h * h);

    let affine: Vec<Matrix3<T>> = match mode {
        Parallelism::Serial => particles
            .iter()
            .enumerate()
            .map(|(i, p)| fused_affine(p, i, dt, inv_d, material, &loads.b_tesla))
            .collect::<Result<_>>()?,
        Parallelism::Parallel => particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| fused_affine(p, i, dt, inv_d, material, &loads.b_tesla))
            .collect::<Result<_>>()?,
    };

    for (idx, (p, q)) in particles.iter().zip(&affine).enumerate() {
        let st = Stencil::new(grid.to_local(p.x));
        let [bi, bj, bk] = grid.stencil_origin(st.base, idx)?;
        // Offsets are in cell units, so scale Q by h. Node (i, j, k) receives
        // w (m v + Qh ((i, j, k) − frac)), assembled incrementally.
        let qh = *q * h;
        let (c0, c1, c2) = (qh.column(0), qh.column(1), qh.column(2));
        let frac = Vector3::new(st.frac[0], st.frac[1], st.frac[2]);
        let base_term = p.v * p.mass - qh * frac;
        let [wx, wy, wz] = st.weights;
        let mut term_i = base_term;
        for (i, wxi) in wx.into_iter().enumerate() {
            let mut term_ij = term_i;
            for (j, wyj) in wy.into_iter().enumerate() {
                let wij = wxi * wyj;
                let row = grid.linear_index(bi + i, bj + j, bk);
                let mut term = term_ij;
                for (k, wzk) in wz.into_iter().enumerate() {
                    let w = wij * wzk;
                    let node = &mut grid.nodes[row + k];
                    let was_empty = node.mass == T::zero();
                    node.mass += w * p.mass;
                    node.momentum += term * w;
                    if was_empty && node.mass > T::zero() {
                        grid.mark_active(row + k);
                    }
                    term += c2;
                }
                term_ij += c1;
            }
            term_i += c0;
        }
    }

    if loads.gravity != Vector3::zeros() {
        let BackgroundGrid { nodes, active, .. } = grid;
        for &i in active.iter() {
            let node = &mut nodes[i];
            node.momentum += loads.gravity * (dt * node.mass);
        }
    }
    Ok(())
}

/// Momentum to velocity, linear damping and Dirichlet clamps.
pub fn grid_update<T: Real>(grid: &mut BackgroundGrid<T>, dt: T, damping_coefficient: T) {
    let eps = T::lit(MASS_EPSILON);
    let factor = (T::one() - damping_coefficient * dt).max(T::zero());
    let BackgroundGrid {
        nodes,
        flags,
        active,
        ..
    } = grid;
    for &i in active.iter() {
        let node = &mut nodes[i];
        if node.mass > eps {
            node.velocity = match flags[i] {
                NodeFlag::Clamped => Vector3::zeros(),
                NodeFlag::Free => node.momentum * (factor / node.mass),
            };
        }
    }
}

#[inline]
fn gather<T: Real>(
    grid: &BackgroundGrid<T>,
    p: &mut Particle<T>,
    idx: usize,
    dt: T,
) -> Result<()> {
    let h = grid.spacing;
    let st = Stencil::new(grid.to_local(p.x));
    let [bi, bj, bk] = grid.stencil_origin(st.base, idx)?;
    // B = Σ w v ⊗ ((i, j, k) − frac) is built from the partial moments
    // Σ w v, Σ w v i, Σ w v j and Σ w v k, summed one axis at a time.
    let [wx, wy, wz] = st.weights;
    let zero = Vector3::zeros();
    let (mut v, mut mi, mut mj, mut mk) = (zero, zero, zero, zero);
    for (i, wxi) in wx.into_iter().enumerate() {
        let (mut vi, mut ji, mut ki) = (zero, zero, zero);
        for (j, wyj) in wy.into_iter().enumerate() {
            let row = grid.linear_index(bi + i, bj + j, bk);
            let n = &grid.nodes[row..row + 3];
            let t1 = n[1].velocity * wz[1];
            let t2 = n[2].velocity * wz[2];
            let vij = n[0].velocity * wz[0] + t1 + t2;
            let kij = t1 + t2 * T::lit(2.0);
            let wv = vij * wyj;
            vi += wv;
            ji += wv * T::from_usize_lossy(j);
            ki += kij * wyj;
        }
        v += vi * wxi;
        mi += vi * (wxi * T::from_usize_lossy(i));
        mj += ji * wxi;
        mk += ki * wxi;
    }
    let [fx, fy, fz] = st.frac;
    let b = Matrix3::from_columns(mi - v * fx, mj - v * fy, mk - v * fz);
    // Offsets were in cell units: (4/h²)·h = 4/h.
    let c = b * (T::lit(4.0) / h);
    p.v = v;
    p.c = c;
    p.x += v * dt;
    p.f = (Matrix3::identity() + c * dt) * p.f;
    let det = p.f.determinant();
    if !(det > T::zero()) || !p.f.is_finite() {
        return Err(Error::Inversion {
            particle: idx,
            det: det.as_f64(),
        });
    }
    Ok(())
}

/// Gathers velocity and affine velocity, advects particles and updates `F`.
pub fn g2p<T: Real>(
    grid: &BackgroundGrid<T>,
    particles: &mut [Particle<T>],
    dt: T,
    mode: Parallelism,
) -> Result<()> {
    match mode {
        Parallelism::Serial => particles
            .iter_mut()
            .enumerate()
            .try_for_each(|(i, p)| gather(grid, p, i, dt)),
        Parallelism::Parallel => particles
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(i, p)| gather(grid, p, i, dt)),
    }
}

/// APIC momentum of the particle set, `Σ m v`. The affine part carries no
/// net momentum because the stencil's first moment vanishes.
pub fn particle_momentum<T: Real>(particles: &[Particle<T>]) -> Vector3<T> {
    let mut m = Vector3::zeros();
    for p in particles {
        m += p.v * p.mass;
    }
    m
}
