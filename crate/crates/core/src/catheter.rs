//! Catheter geometry, material, magnetization and particle discretization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix3, RigidTransform, Vector3};
use crate::num::Real;

/// A segmented magnetic catheter: a cylinder of `length_m` along the body z
/// axis with its clamped base at the origin of `base_pose`.
///
/// `proximal_offset_m` is the length of catheter hidden behind the base. It is
/// zero for a whole catheter and positive for the exposed part of a partially
/// inserted one, so that segment indices keep referring to the parent
/// catheter's segments.
#[derive(Clone, Debug, PartialEq)]
pub struct CatheterSpec<T> {
    pub length_m: T,
    pub diameter_m: T,
    pub segment_count: usize,
    pub remanent_magnitude_a_per_m: T,
    pub density_kg_m3: T,
    pub shear_modulus_pa: T,
    pub poisson_ratio: T,
    pub base_pose: RigidTransform<T>,
    pub proximal_offset_m: T,
}

/// One stretch of the exposed catheter carrying a single segment's
/// magnetization, in body-frame axial coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExposedSegment<T> {
    pub segment: usize,
    pub start_m: T,
    pub end_m: T,
}

impl<T: Real> CatheterSpec<T> {
    /// Catheter with the default elastomer: μ = 100 kPa, ν = 0.45,
    /// ρ = 1100 kg/m³, |M_r| = 1e5 A/m.
    pub fn with_defaults(length_m: T, diameter_m: T, segment_count: usize) -> Self {
        Self {
            length_m,
            diameter_m,
            segment_count,
            remanent_magnitude_a_per_m: T::lit(1.0e5),
            density_kg_m3: T::lit(1100.0),
            shear_modulus_pa: T::lit(100.0e3),
            poisson_ratio: T::lit(0.45),
            base_pose: RigidTransform::identity(),
            proximal_offset_m: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T, name: &str| -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("catheter.{name} must be positive, got {v}")))
            }
        };
        pos(self.length_m, "length")?;
        pos(self.diameter_m, "diameter")?;
        if !(self.remanent_magnitude_a_per_m >= T::zero()) {
            return Err(Error::config("catheter.remanent_magnetization must be non-negative"));
        }
        pos(self.density_kg_m3, "density")?;
        pos(self.shear_modulus_pa, "shear_modulus")?;
        // A partially inserted stub may be shorter than it is wide.
        if self.proximal_offset_m == T::zero() && self.length_m <= self.diameter_m {
            return Err(Error::config(format!(
                "catheter length {} must exceed its diameter {}",
                self.length_m, self.diameter_m
            )));
        }
        if self.segment_count == 0 {
            return Err(Error::config("catheter.segments must be at least 1"));
        }
        if !(self.poisson_ratio >= T::zero() && self.poisson_ratio < T::lit(0.5)) {
            return Err(Error::config(format!(
                "catheter.poisson_ratio must lie in [0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        if self.proximal_offset_m < T::zero() {
            return Err(Error::config("proximal offset must be non-negative"));
        }
        if !self.base_pose.is_proper(T::lit(1e-6)) {
            return Err(Error::config("base pose rotation is not a proper rotation"));
        }
        Ok(())
    }

    /// Lamé's first parameter λ = 2μν/(1 − 2ν).
    pub fn lame_lambda(&self) -> T {
        let two = T::lit(2.0);
        two * self.shear_modulus_pa * self.poisson_ratio / (T::one() - two * self.poisson_ratio)
    }

    pub fn youngs_modulus(&self) -> T {
        T::lit(2.0) * self.shear_modulus_pa * (T::one() + self.poisson_ratio)
    }

    pub fn radius(&self) -> T {
        self.diameter_m * T::lit(0.5)
    }

    pub fn cross_section_area(&self) -> T {
        T::PI() * self.radius() * self.radius()
    }

    /// Second moment of area of the circular cross-section, πD⁴/64.
    pub fn area_moment(&self) -> T {
        T::PI() * self.diameter_m.powi(4) / T::lit(64.0)
    }

    pub fn volume(&self) -> T {
        self.cross_section_area() * self.length_m
    }

    /// Length of the whole (parent) catheter.
    pub fn parent_length(&self) -> T {
        self.length_m + self.proximal_offset_m
    }

    pub fn segment_length(&self) -> T {
        self.parent_length() / T::from_usize_lossy(self.segment_count)
    }

    /// Segment index of body-frame axial coordinate `s`, clamped to the valid
    /// range.
    pub fn segment_of(&self, s: T) -> usize {
        let n = self.segment_count;
        let global = s + self.proximal_offset_m;
        let idx = (T::from_usize_lossy(n) * global / self.parent_length()).floor();
        if idx <= T::zero() {
            0
        } else {
            idx.to_usize().unwrap_or(n - 1).min(n - 1)
        }
    }

    /// Segments present on the exposed length, with their local extents.
    pub fn exposed_segments(&self) -> Vec<ExposedSegment<T>> {
        let seg_len = self.segment_length();
        let mut out = Vec::new();
        for k in 0..self.segment_count {
            let lo = T::from_usize_lossy(k) * seg_len - self.proximal_offset_m;
            let hi = T::from_usize_lossy(k + 1) * seg_len - self.proximal_offset_m;
            let start = lo.max(T::zero());
            let end = hi.min(self.length_m);
            if end > start {
                out.push(ExposedSegment {
                    segment: k,
                    start_m: start,
                    end_m: end,
                });
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> CatheterSpec<U> {
        let c = |v: T| U::lit(v.as_f64());
        CatheterSpec {
            length_m: c(self.length_m),
            diameter_m: c(self.diameter_m),
            segment_count: self.segment_count,
            remanent_magnitude_a_per_m: c(self.remanent_magnitude_a_per_m),
            density_kg_m3: c(self.density_kg_m3),
            shear_modulus_pa: c(self.shear_modulus_pa),
            poisson_ratio: c(self.poisson_ratio),
            base_pose: self.base_pose.cast(),
            proximal_offset_m: c(self.proximal_offset_m),
        }
    }
}

/// Per-segment unit magnetization directions in the catheter body frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnetizationProfile<T> {
    directions: Vec<Vector3<T>>,
}

impl<T: Real> MagnetizationProfile<T> {
    pub fn new(directions: Vec<Vector3<T>>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::config("magnetization profile is empty"));
        }
        // 1e-9 for f64; a few ulps for f32.
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        for (i, d) in directions.iter().enumerate() {
            if (d.norm() - T::one()).abs() > tol {
                return Err(Error::config(format!(
                    "magnetization direction {i} is not a unit vector (norm {})",
                    d.norm()
                )));
            }
        }
        Ok(Self { directions })
    }

    /// Normalizes each direction; zero vectors are rejected.
    pub fn normalized(directions: Vec<Vector3<T>>) -> Result<Self> {
        let dirs = directions
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d.norm() > T::zero() {
                    Ok(d.normalize())
                } else {
                    Err(Error::config(format!("magnetization direction {i} is zero")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dirs)
    }

    pub fn uniform(direction: Vector3<T>, segments: usize) -> Result<Self> {
        Self::normalized(vec![direction; segments])
    }

    pub fn directions(&self) -> &[Vector3<T>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Homogeneous applied field in Tesla, optionally bounded in norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppliedField<T> {
    pub b_tesla: Vector3<T>,
    pub max_norm_tesla: Option<T>,
}

impl<T: Real> AppliedField<T> {
    pub fn new(b_tesla: Vector3<T>) -> Self {
        Self {
            b_tesla,
            max_norm_tesla: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros())
    }

    /// Field bounded by `max_norm`; rejects a field that violates the bound.
    pub fn bounded(b_tesla: Vector3<T>, max_norm: T) -> Result<Self> {
        if b_tesla.norm() > max_norm + T::lit(1e-12) {
            return Err(Error::config(format!(
                "field norm {} T exceeds bound {} T",
                b_tesla.norm(),
                max_norm
            )));
        }
        Ok(Self {
            b_tesla,
            max_norm_tesla: Some(max_norm),
        })
    }

    /// Radially scales `b_tesla` onto the ball of radius `max_norm` if needed.
    pub fn projected(b_tesla: Vector3<T>, max_norm: T) -> Self {
        let n = b_tesla.norm();
        let b = if n > max_norm && n > T::zero() {
            b_tesla * (max_norm / n)
        } else {
            b_tesla
        };
        Self {
            b_tesla: b,
            max_norm_tesla: Some(max_norm),
        }
    }
}

/// Material point state. Positions and vectors are in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle<T> {
    pub x: Vector3<T>,
    pub v: Vector3<T>,
    /// Deformation gradient.
    pub f: Matrix3<T>,
    /// APIC affine velocity matrix.
    pub c: Matrix3<T>,
    pub volume0: T,
    pub mass: T,
    /// Reference (remanent) magnetization, A/m.
    pub m_r: Vector3<T>,
    pub segment: usize,
    /// Body-frame axial coordinate in the reference configuration.
    pub s_ref: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud<T> {
    pub particles: Vec<Particle<T>>,
    pub spec: CatheterSpec<T>,
    pub grid_spacing_m: T,
}

impl<T: Real> ParticleCloud<T> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn segment_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.spec.segment_count];
        for p in &self.particles {
            counts[p.segment] += 1;
        }
        counts
    }
}

/// Fills the catheter cylinder with material points on a jittered lattice.
///
/// The lattice holds `particles_per_cell` points per grid cell volume; each
/// point is displaced by up to a quarter lattice spacing per axis using a
/// ChaCha8 stream seeded with `seed`.
pub fn discretize<T: Real>(
    spec: &CatheterSpec<T>,
    particles_per_cell: usize,
    grid_spacing_m: T,
    seed: u64,
) -> Result<ParticleCloud<T>> {
    spec.validate()?;
    if particles_per_cell < 4 {
        return Err(Error::config(format!(
            "particles_per_cell must be >= 4, got {particles_per_cell}"
        )));
    }
    if !(grid_spacing_m > T::zero()) || grid_spacing_m > spec.diameter_m / T::lit(3.0) {
        return Err(Error::config(format!(
            "grid spacing {} m must be positive and at most diameter/3 = {} m",
            grid_spacing_m,
            spec.diameter_m / T::lit(3.0)
        )));
    }

    let spacing = grid_spacing_m / T::from_usize_lossy(particles_per_cell).cbrt();
    let radius = spec.radius();
    let nz = (spec.length_m / spacing).round().to_usize().unwrap_or(1).max(1);
    let dz = spec.length_m / T::from_usize_lossy(nz);
    let nr = (spec.diameter_m / spacing).ceil().to_usize().unwrap_or(1).max(1);
    // Centre the transverse lattice on the axis.
    let half_span = T::from_usize_lossy(nr) * spacing * T::lit(0.5);
    let quarter = T::lit(0.25);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body_points = Vec::with_capacity(nz * nr * nr);
    for k in 0..nz {
        for i in 0..nr {
            for j in 0..nr {
                let jx: f64 = rng.gen_range(-1.0..=1.0);
                let jy: f64 = rng.gen_range(-1.0..=1.0);
                let jz: f64 = rng.gen_range(-1.0..=1.0);
                let x = (T::from_usize_lossy(i) + T::lit(0.5)) * spacing - half_span
                    + T::lit(jx) * quarter * spacing;
                let y = (T::from_usize_lossy(j) + T::lit(0.5)) * spacing - half_span
                    + T::lit(jy) * quarter * spacing;
                let z = (T::from_usize_lossy(k) + T::lit(0.5)) * dz + T::lit(jz) * quarter * dz;
                if x * x + y * y <= radius * radius {
                    body_points.push(Vector3::new(x, y, z));
                }
            }
        }
    }
    if body_points.is_empty() {
        return Err(Error::config("catheter geometry produced no particles"));
    }

    let volume0 = spec.volume() / T::from_usize_lossy(body_points.len());
    let mass = volume0 * spec.density_kg_m3;
    let particles = body_points
        .into_iter()
        .map(|b| Particle {
            x: spec.base_pose.apply_point(b),
            v: Vector3::zeros(),
            f: Matrix3::identity(),
            c: Matrix3::zeros(),
            volume0,
            mass,
            m_r: Vector3::zeros(),
            segment: spec.segment_of(b.z),
            s_ref: b.z,
        })
        .collect();
    Ok(ParticleCloud {
        particles,
        spec: spec.clone(),
        grid_spacing_m,
    })
}

/// Sets each particle's remanent magnetization to `|M_r| · R m_segment`,
/// where `R` is the base pose rotation.
pub fn assign_magnetization<T: Real>(
    mut cloud: ParticleCloud<T>,
    profile: &MagnetizationProfile<T>,
    spec: &CatheterSpec<T>,
) -> Result<ParticleCloud<T>> {
    if profile.len() != spec.segment_count {
        return Err(Error::config(format!(
            "magnetization profile has {} directions but the catheter has {} segments",
            profile.len(),
            spec.segment_count
        )));
    }
    let world: Vec<Vector3<T>> = profile
        .directions()
        .iter()
        .map(|d| spec.base_pose.apply_vector(*d) * spec.remanent_magnitude_a_per_m)
        .collect();
    for p in &mut cloud.particles {
        p.m_r = world[p.segment];
    }
    Ok(cloud)
}
