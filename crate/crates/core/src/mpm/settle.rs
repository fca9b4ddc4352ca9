//! Damped explicit stepping to a quasi-static equilibrium.

use super::constitutive::Material;
use super::grid::BackgroundGrid;
use super::transfer::{g2p, grid_update, p2g, Loads, Parallelism};
use crate::catheter::{AppliedField, CatheterSpec, Particle, ParticleCloud};
use crate::error::{Error, Result};
use crate::linalg::{RigidTransform, Vector3};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep<T> {
    /// CFL step with the given safety factor.
    Auto { safety: T },
    Fixed(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig<T> {
    pub dt: TimeStep<T>,
    /// Linear grid-velocity damping rate, 1/s.
    pub damping_coefficient: T,
    /// Maximum particle speed accepted as "at rest", m/s.
    pub settle_tolerance: T,
    /// Consecutive steps below tolerance required to stop.
    pub settle_window: usize,
    pub max_settle_steps: usize,
    pub gravity: Vector3<T>,
    pub parallelism: Parallelism,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: TimeStep::Auto {
                safety: T::lit(0.3),
            },
            damping_coefficient: T::lit(60.0),
            settle_tolerance: T::lit(1e-3),
            settle_window: 10,
            max_settle_steps: 200_000,
            gravity: Vector3::zeros(),
            parallelism: Parallelism::Serial,
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        match self.dt {
            TimeStep::Fixed(dt) if !(dt > T::zero()) => {
                return Err(Error::config("simulation.dt must be positive"))
            }
            TimeStep::Auto { safety } if !(safety > T::zero() && safety <= T::one()) => {
                return Err(Error::config("simulation.cfl_safety must lie in (0, 1]"))
            }
            _ => {}
        }
        if !(self.damping_coefficient >= T::zero()) {
            return Err(Error::config("simulation.damping must be non-negative"));
        }
        if !(self.settle_tolerance > T::zero()) {
            return Err(Error::config("simulation.settle_tolerance must be positive"));
        }
        if self.settle_window == 0 {
            return Err(Error::config("simulation.settle_window must be at least 1"));
        }
        Ok(())
    }

    pub fn time_step(&self, grid_spacing: T, spec: &CatheterSpec<T>) -> T {
        match self.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto { safety } => stable_dt(grid_spacing, spec, safety),
        }
    }
}

/// CFL step `safety · h / c` with the dilatational wave speed
/// `c = sqrt((λ + 2μ)/ρ)`.
pub fn stable_dt<T: Real>(grid_spacing: T, spec: &CatheterSpec<T>, safety: T) -> T {
    let modulus = spec.lame_lambda() + T::lit(2.0) * spec.shear_modulus_pa;
    let c = (modulus / spec.density_kg_m3).sqrt();
    safety * grid_spacing / c
}

/// Grid nodes held fixed at the catheter root, described in the base frame
/// (base centre at the origin, axis along +z).
///
/// A node is clamped when it lies within `radial_semi_axis` of the axis and
/// either behind the base plane (down to one stencil width) or inside the
/// half-ellipsoid of depth `axial_depth` in front of it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampRegion<T> {
    pub radial_semi_axis: T,
    pub axial_depth: T,
    pub rear_depth: T,
}

impl<T: Real> ClampRegion<T> {
    /// Base cross-section plus one cell of margin, one cell deep.
    pub fn at_base(spec: &CatheterSpec<T>, grid_spacing: T) -> Self {
        Self {
            radial_semi_axis: spec.radius() + grid_spacing,
            axial_depth: grid_spacing,
            rear_depth: T::lit(2.0) * grid_spacing,
        }
    }

    pub fn contains(&self, p: Vector3<T>) -> bool {
        let rr = (p.x * p.x + p.y * p.y) / (self.radial_semi_axis * self.radial_semi_axis);
        if rr > T::one() {
            return false;
        }
        if p.z <= T::zero() {
            return p.z >= -self.rear_depth;
        }
        let zz = p.z / self.axial_depth;
        rr + zz * zz <= T::one()
    }

    /// Axis-aligned box enclosing the region.
    pub fn bounds(&self) -> (Vector3<T>, Vector3<T>) {
        let r = self.radial_semi_axis;
        (Vector3::new(-r, -r, -self.rear_depth), Vector3::new(r, r, self.axial_depth))
    }

    /// Whether the region covers the base cross-section.
    pub fn covers_base(&self, spec: &CatheterSpec<T>) -> bool {
        self.radial_semi_axis >= spec.radius() && self.axial_depth > T::zero()
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumState<T> {
    /// Final particle state in the world frame.
    pub cloud: ParticleCloud<T>,
    pub steps: usize,
    pub dt: T,
    pub residual_speed: T,
    pub kinetic_energy: Vec<T>,
    pub converged: bool,
}

/// A failed settle, with the state reached so far.
#[derive(Debug)]
pub struct SettleFailure<T> {
    pub error: Error,
    pub state: Option<Box<EquilibriumState<T>>>,
}

impl<T> From<Error> for SettleFailure<T> {
    fn from(error: Error) -> Self {
        Self { error, state: None }
    }
}

impl<T> std::fmt::Display for SettleFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

/// Settles `cloud` under the homogeneous field `field`.
///
/// Stepping happens in the base frame of the catheter: positions, `F`, `C`,
/// magnetization, field and gravity are rotated into it, so the background
/// grid is aligned with the clamp and the result is exactly equivariant under
/// rigid motions of the set-up. The returned state is mapped back to world.
pub fn settle<T: Real>(
    cloud: &ParticleCloud<T>,
    field: &AppliedField<T>,
    config: &SimConfig<T>,
    clamp: &ClampRegion<T>,
) -> Result<EquilibriumState<T>, SettleFailure<T>> {
    config.validate()?;
    let spec = &cloud.spec;
    if !clamp.covers_base(spec) {
        return Err(Error::config("clamp region does not cover the catheter base").into());
    }
    let h = cloud.grid_spacing_m;
    let dt = config.time_step(h, spec);
    let material = Material::from_shear_poisson(spec.shear_modulus_pa, spec.poisson_ratio);
    let to_body = spec.base_pose.inverse();
    let loads = Loads {
        b_tesla: to_body.apply_vector(field.b_tesla),
        gravity: to_body.apply_vector(config.gravity),
    };

    let mut particles: Vec<Particle<T>> =
        cloud.particles.iter().map(|p| transform_particle(p, &to_body)).collect();
    let mut grid = BackgroundGrid::new(h, [0; 3], [0; 3]);
    let mut kinetic_energy = Vec::new();
    let mut calm_steps = 0usize;
    let mut residual = T::zero();
    let mut steps = 0usize;
    let mut converged = false;

    let finish = |particles: &[Particle<T>], steps, residual, ke: Vec<T>, converged| {
        let world = spec.base_pose;
        EquilibriumState {
            cloud: ParticleCloud {
                particles: particles.iter().map(|p| transform_particle(p, &world)).collect(),
                spec: spec.clone(),
                grid_spacing_m: h,
            },
            steps,
            dt,
            residual_speed: residual,
            kinetic_energy: ke,
            converged,
        }
    };

    while steps < config.max_settle_steps {
        let step_result = (|| -> Result<()> {
            grid.refit(&particles)?;
            let (lo, hi) = clamp.bounds();
            grid.clamp_within(lo, hi, |x| clamp.contains(x));
            p2g(&particles, &mut grid, dt, &material, &loads, config.parallelism)?;
            grid_update(&mut grid, dt, config.damping_coefficient);
            g2p(&grid, &mut particles, dt, config.parallelism)
        })();
        steps += 1;
        if let Err(e) = step_result {
            let reason = e.to_string();
            let state = finish(&particles, steps, residual, kinetic_energy, false);
            return Err(SettleFailure {
                error: Error::BlowUp {
                    step: steps,
                    reason,
                },
                state: Some(Box::new(state)),
            });
        }

        let mut vmax2 = T::zero();
        let mut ke = T::zero();
        for p in &particles {
            let v2 = p.v.norm_squared();
            vmax2 = vmax2.max(v2);
            ke += T::lit(0.5) * p.mass * v2;
        }
        if !ke.is_finite() {
            let state = finish(&particles, steps, residual, kinetic_energy, false);
            return Err(SettleFailure {
                error: Error::BlowUp {
                    step: steps,
                    reason: "non-finite particle velocity".into(),
                },
                state: Some(Box::new(state)),
            });
        }
        kinetic_energy.push(ke);
        residual = vmax2.sqrt();
        if residual < config.settle_tolerance {
            calm_steps += 1;
            if calm_steps >= config.settle_window {
                converged = true;
                break;
            }
        } else {
            calm_steps = 0;
        }
    }

    let state = finish(&particles, steps, residual, kinetic_energy, converged);
    if converged {
        Ok(state)
    } else {
        Err(SettleFailure {
            error: Error::NonConvergence {
                steps,
                residual: residual.as_f64(),
            },
            state: Some(Box::new(state)),
        })
    }
}

fn transform_particle<T: Real>(p: &Particle<T>, t: &RigidTransform<T>) -> Particle<T> {
    let r = t.rotation;
    let rt = r.transpose();
    Particle {
        x: t.apply_point(p.x),
        v: r * p.v,
        f: r * p.f * rt,
        c: r * p.c * rt,
        m_r: r * p.m_r,
        ..*p
    }
}
