//! Centerlines, shape error and staged follow-the-leader insertion.

use rayon::prelude::*;

use crate::catheter::{
    assign_magnetization, discretize, AppliedField, CatheterSpec, MagnetizationProfile,
    ParticleCloud,
};
use crate::error::{Error, Result};
use crate::linalg::{RigidTransform, Vector3};
use crate::mpm::{settle, ClampRegion, EquilibriumState, Parallelism, SimConfig};
use crate::num::Real;
use crate::polyline::Polyline3;

/// Samples compared by [`rms_error`] unless told otherwise.
pub const DEFAULT_RMS_SAMPLES: usize = 50;

/// Score given to candidates whose simulation fails, in mm.
pub const DEFAULT_PENALTY_MM: f64 = 1e3;

/// Deformed catheter axis sampled at increasing reference coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Centerline<T> {
    pub points: Vec<Vector3<T>>,
    /// Reference (undeformed) axial coordinate of each sample, m.
    pub s_ref: Vec<T>,
    /// Reference length of the sampled body.
    pub length_m: T,
}

impl<T: Real> Centerline<T> {
    pub fn polyline(&self) -> Result<Polyline3<T>> {
        Polyline3::new(self.points.clone())
    }

    /// The samples plus both ends, extrapolated linearly from the nearest two
    /// samples, so the curve spans reference coordinates `0..=length`.
    pub fn extended(&self) -> Result<Polyline3<T>> {
        let n = self.points.len();
        if n < 2 {
            return Err(Error::Degenerate("centerline needs at least 2 samples".into()));
        }
        let extrapolate = |a: usize, b: usize, s: T| {
            let t = (s - self.s_ref[a]) / (self.s_ref[b] - self.s_ref[a]);
            self.points[a] + (self.points[b] - self.points[a]) * t
        };
        let mut pts = Vec::with_capacity(n + 2);
        if self.s_ref[0] > T::zero() {
            pts.push(extrapolate(0, 1, T::zero()));
        }
        pts.extend_from_slice(&self.points);
        if self.s_ref[n - 1] < self.length_m {
            pts.push(extrapolate(n - 2, n - 1, self.length_m));
        }
        Polyline3::new(pts)
    }

    pub fn transformed(&self, t: &RigidTransform<T>) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply_point(*p)).collect(),
            ..self.clone()
        }
    }
}

/// Bins particles into `sample_count` equal intervals of reference axial
/// coordinate and takes the mass-weighted mean deformed position of each.
pub fn extract_centerline<T: Real>(
    cloud: &ParticleCloud<T>,
    sample_count: usize,
) -> Result<Centerline<T>> {
    if sample_count < 2 {
        return Err(Error::config(format!(
            "centerline sample count must be >= 2, got {sample_count}"
        )));
    }
    let length = cloud.spec.length_m;
    let n = T::from_usize_lossy(sample_count);
    let mut sums = vec![(T::zero(), Vector3::zeros()); sample_count];
    for p in &cloud.particles {
        let b = (p.s_ref / length * n)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(sample_count - 1);
        sums[b].0 += p.mass;
        sums[b].1 += p.x * p.mass;
    }
    let mut points = Vec::with_capacity(sample_count);
    let mut s_ref = Vec::with_capacity(sample_count);
    for (bin, (m, mx)) in sums.into_iter().enumerate() {
        if !(m > T::zero()) {
            return Err(Error::Resolution { bin });
        }
        points.push(mx * m.recip());
        s_ref.push((T::from_usize_lossy(bin) + T::lit(0.5)) * length / n);
    }
    Ok(Centerline {
        points,
        s_ref,
        length_m: length,
    })
}

/// Default bin count: one per grid cell of length, between 2 and 40.
pub fn auto_sample_count<T: Real>(length_m: T, grid_spacing_m: T) -> usize {
    (length_m / grid_spacing_m)
        .floor()
        .to_usize()
        .unwrap_or(2)
        .clamp(2, 40)
}

/// RMS distance in mm between two curves paired by normalized arc length
/// after resampling both to `samples` points.
pub fn rms_between<T: Real>(a: &Polyline3<T>, b: &Polyline3<T>, samples: usize) -> Result<T> {
    let ra = a.resample(samples)?;
    let rb = b.resample(samples)?;
    let sum: T = ra
        .points()
        .iter()
        .zip(rb.points())
        .map(|(p, q)| (*p - *q).norm_squared())
        .sum();
    Ok((sum / T::from_usize_lossy(samples)).sqrt() * T::lit(1e3))
}

/// Shape error of a simulated centerline against a target, in mm. The
/// centerline is extended to the catheter ends before pairing.
pub fn rms_error<T: Real>(sim: &Centerline<T>, target: &Polyline3<T>, samples: usize) -> Result<T> {
    rms_between(&sim.extended()?, target, samples)
}

/// Exposed lengths and target path of a follow-the-leader insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertionSchedule<T> {
    /// Introducer exit; the exposed catheter is clamped here.
    pub entry_pose: RigidTransform<T>,
    pub depths_m: Vec<T>,
    pub target_path: Polyline3<T>,
}

impl<T: Real> InsertionSchedule<T> {
    pub fn new(
        entry_pose: RigidTransform<T>,
        depths_m: Vec<T>,
        target_path: Polyline3<T>,
    ) -> Result<Self> {
        if depths_m.is_empty() {
            return Err(Error::config("insertion schedule needs at least one depth"));
        }
        if !(depths_m[0] > T::zero()) || depths_m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config(
                "insertion depths must be positive and strictly increasing",
            ));
        }
        Ok(Self {
            entry_pose,
            depths_m,
            target_path,
        })
    }

    /// `stages` depths `L k / stages`, k = 1..=stages.
    pub fn equally_spaced(
        entry_pose: RigidTransform<T>,
        length_m: T,
        stages: usize,
        target_path: Polyline3<T>,
    ) -> Result<Self> {
        let n = T::from_usize_lossy(stages);
        let depths = (1..=stages)
            .map(|k| length_m * T::from_usize_lossy(k) / n)
            .collect();
        Self::new(entry_pose, depths, target_path)
    }

    pub fn len(&self) -> usize {
        self.depths_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths_m.is_empty()
    }
}

/// The exposed sub-catheter and sub-target at depth `depth_index`.
///
/// The sub-catheter is the distal `d_k` of the full one, clamped at the entry
/// pose. It keeps the parent's segment layout through its proximal offset, so
/// the full magnetization profile applies to it unchanged.
pub fn stage_insertion<T: Real>(
    spec: &CatheterSpec<T>,
    schedule: &InsertionSchedule<T>,
    depth_index: usize,
) -> Result<(CatheterSpec<T>, Polyline3<T>)> {
    let depth = *schedule.depths_m.get(depth_index).ok_or_else(|| {
        Error::config(format!(
            "depth index {depth_index} out of range for {} stages",
            schedule.len()
        ))
    })?;
    let tol = spec.length_m * T::lit(1e-12);
    if depth > spec.length_m + tol {
        return Err(Error::config(format!(
            "insertion depth {depth} m exceeds catheter length {} m",
            spec.length_m
        )));
    }
    let depth = depth.min(spec.length_m);
    let sub = CatheterSpec {
        length_m: depth,
        proximal_offset_m: spec.length_m - depth,
        base_pose: schedule.entry_pose,
        ..spec.clone()
    };
    let target = schedule.target_path.truncate(depth)?;
    Ok((sub, target))
}

/// How particles are laid out for every simulation of a problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization<T> {
    pub grid_spacing_m: T,
    pub particles_per_cell: usize,
    pub seed: u64,
}

/// How per-stage errors are combined into one insertion score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

/// Outcome of scoring one design.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation<T> {
    /// The aggregate score in mm (the penalty when `penalized`).
    pub score_mm: T,
    pub stage_errors_mm: Vec<T>,
    pub mean_mm: T,
    pub max_mm: T,
    /// Some stage failed to simulate and the penalty was applied.
    pub penalized: bool,
    /// Some stage hit the settle step limit; its last state was scored.
    pub unconverged: bool,
    pub diagnostic: Option<String>,
}

/// One simulated stage, kept for export.
#[derive(Clone, Debug)]
pub struct StageResult<T> {
    pub centerline: Centerline<T>,
    pub state: EquilibriumState<T>,
    pub error_mm: T,
}

/// Scoring settings shared by static and insertion problems.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings<T> {
    pub sim: SimConfig<T>,
    pub discretization: Discretization<T>,
    /// Centerline bins; `None` picks [`auto_sample_count`].
    pub centerline_samples: Option<usize>,
    pub rms_samples: usize,
    pub penalty_mm: T,
    pub aggregate: Aggregate,
}

impl<T: Real> EvalSettings<T> {
    pub fn new(sim: SimConfig<T>, discretization: Discretization<T>) -> Self {
        Self {
            sim,
            discretization,
            centerline_samples: None,
            rms_samples: DEFAULT_RMS_SAMPLES,
            penalty_mm: T::lit(DEFAULT_PENALTY_MM),
            aggregate: Aggregate::Max,
        }
    }
}

/// A clamped catheter and the curve it should settle onto.
#[derive(Clone, Debug)]
struct Stage<T> {
    cloud: ParticleCloud<T>,
    target: Polyline3<T>,
    samples: usize,
}

/// Scores designs against one or more staged targets. Particle clouds are
/// discretized once at construction; each evaluation only re-magnetizes and
/// settles them.
#[derive(Clone, Debug)]
pub struct ShapeEvaluator<T> {
    spec: CatheterSpec<T>,
    stages: Vec<Stage<T>>,
    settings: EvalSettings<T>,
}

impl<T: Real> ShapeEvaluator<T> {
    /// Single settle of the whole catheter against `target`.
    pub fn new_static(
        spec: &CatheterSpec<T>,
        target: Polyline3<T>,
        settings: EvalSettings<T>,
    ) -> Result<Self> {
        settings.sim.validate()?;
        let stage = Self::build_stage(spec.clone(), target, &settings)?;
        Ok(Self {
            spec: spec.clone(),
            stages: vec![stage],
            settings,
        })
    }

    /// One settle per insertion depth.
    pub fn new_insertion(
        spec: &CatheterSpec<T>,
        schedule: &InsertionSchedule<T>,
        settings: EvalSettings<T>,
    ) -> Result<Self> {
        settings.sim.validate()?;
        let stages = (0..schedule.len())
            .map(|k| {
                let (sub, target) = stage_insertion(spec, schedule, k)?;
                Self::build_stage(sub, target, &settings)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            spec: spec.clone(),
            stages,
            settings,
        })
    }

    fn build_stage(
        spec: CatheterSpec<T>,
        target: Polyline3<T>,
        settings: &EvalSettings<T>,
    ) -> Result<Stage<T>> {
        let d = &settings.discretization;
        let cloud = discretize(&spec, d.particles_per_cell, d.grid_spacing_m, d.seed)?;
        let samples = settings
            .centerline_samples
            .unwrap_or_else(|| auto_sample_count(spec.length_m, d.grid_spacing_m));
        // Fail early if the resolution cannot support the bins.
        extract_centerline(&cloud, samples)?;
        Ok(Stage {
            cloud,
            target,
            samples,
        })
    }

    pub fn spec(&self) -> &CatheterSpec<T> {
        &self.spec
    }

    pub fn settings(&self) -> &EvalSettings<T> {
        &self.settings
    }

    pub fn set_parallelism(&mut self, mode: Parallelism) {
        self.settings.sim.parallelism = mode;
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn stage_spec(&self, k: usize) -> &CatheterSpec<T> {
        &self.stages[k].cloud.spec
    }

    pub fn stage_target(&self, k: usize) -> &Polyline3<T> {
        &self.stages[k].target
    }

    pub fn particle_count(&self) -> usize {
        self.stages.iter().map(|s| s.cloud.len()).sum()
    }

    /// Settles stage `k` under `field` and scores it.
    pub fn run_stage(
        &self,
        k: usize,
        profile: &MagnetizationProfile<T>,
        field: &AppliedField<T>,
    ) -> Result<StageResult<T>> {
        let stage = &self.stages[k];
        let spec = &stage.cloud.spec;
        let cloud = assign_magnetization(stage.cloud.clone(), profile, spec)?;
        let clamp = ClampRegion::at_base(spec, cloud.grid_spacing_m);
        let state = match settle(&cloud, field, &self.settings.sim, &clamp) {
            Ok(s) => s,
            Err(f) => match (f.error, f.state) {
                (Error::NonConvergence { .. }, Some(s)) => *s,
                (e, _) => return Err(e),
            },
        };
        let centerline = extract_centerline(&state.cloud, stage.samples)?;
        let error_mm = rms_error(&centerline, &stage.target, self.settings.rms_samples)?;
        Ok(StageResult {
            centerline,
            state,
            error_mm,
        })
    }

    /// Scores a design with one field per stage. Failed simulations yield
    /// the penalty score instead of an error; only invalid input is an error.
    pub fn evaluate(
        &self,
        profile: &MagnetizationProfile<T>,
        fields: &[AppliedField<T>],
    ) -> Result<Evaluation<T>> {
        if fields.len() != self.stages.len() {
            return Err(Error::config(format!(
                "{} fields supplied for {} stages",
                fields.len(),
                self.stages.len()
            )));
        }
        if profile.len() != self.spec.segment_count {
            return Err(Error::config(format!(
                "magnetization profile has {} directions but the catheter has {} segments",
                profile.len(),
                self.spec.segment_count
            )));
        }
        let run = |k: usize| self.run_stage(k, profile, &fields[k]);
        let results: Vec<Result<StageResult<T>>> = match self.settings.sim.parallelism {
            Parallelism::Serial => (0..self.stages.len()).map(run).collect(),
            Parallelism::Parallel => (0..self.stages.len()).into_par_iter().map(run).collect(),
        };

        let mut errors = Vec::with_capacity(results.len());
        let mut unconverged = false;
        let mut diagnostic = None;
        for (k, r) in results.into_iter().enumerate() {
            match r {
                Ok(s) => {
                    unconverged |= !s.state.converged;
                    errors.push(s.error_mm);
                }
                Err(e @ Error::Config(_)) => return Err(e),
                Err(e) => {
                    diagnostic.get_or_insert_with(|| format!("stage {k}: {e}"));
                    errors.push(self.settings.penalty_mm);
                }
            }
        }
        let penalized = diagnostic.is_some();
        let max = errors.iter().copied().fold(T::zero(), T::max);
        let mean = errors.iter().copied().sum::<T>() / T::from_usize_lossy(errors.len());
        let score = if penalized {
            self.settings.penalty_mm
        } else {
            match self.settings.aggregate {
                Aggregate::Max => max,
                Aggregate::Mean => mean,
            }
        };
        Ok(Evaluation {
            score_mm: score,
            stage_errors_mm: errors,
            mean_mm: mean,
            max_mm: max,
            penalized,
            unconverged,
            diagnostic,
        })
    }
}

/// Static score of `profile` under one field.
pub fn evaluate_static<T: Real>(
    evaluator: &ShapeEvaluator<T>,
    profile: &MagnetizationProfile<T>,
    field: &AppliedField<T>,
) -> Result<Evaluation<T>> {
    evaluator.evaluate(profile, std::slice::from_ref(field))
}

/// Insertion score of `profile` with one field per stage.
pub fn evaluate_insertion<T: Real>(
    evaluator: &ShapeEvaluator<T>,
    profile: &MagnetizationProfile<T>,
    field_schedule: &[AppliedField<T>],
) -> Result<Evaluation<T>> {
    evaluator.evaluate(profile, field_schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix3;

    type V = Vector3<f64>;

    fn straight(len: f64) -> Polyline3<f64> {
        Polyline3::segment(V::zeros(), V::new(0.0, 0.0, len)).unwrap()
    }

    #[test]
    fn identical_curves_score_zero() {
        let a = straight(0.04);
        assert_eq!(rms_between(&a, &a, 50).unwrap(), 0.0);
    }

    #[test]
    fn uniform_offset_scores_the_offset() {
        let a = straight(0.04);
        let b = a.transformed(&RigidTransform::from_translation(V::new(1e-3, 0.0, 0.0)));
        assert!((rms_between(&a, &b, 50).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_about_the_base_matches_direct_sum() {
        let l = 0.04;
        let a = straight(l);
        let b = Polyline3::segment(V::zeros(), V::new(l, 0.0, 0.0)).unwrap();
        // Point k sits at s_k = L k/(K−1) on both legs; the pair distance is
        // s_k √2.
        let k = 50;
        let mut sum = 0.0;
        for i in 0..k {
            let s = l * i as f64 / (k - 1) as f64;
            sum += 2.0 * s * s;
        }
        let expected = (sum / k as f64).sqrt() * 1e3;
        assert!((rms_between(&a, &b, k).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 32.83).abs() < 0.01);
    }

    #[test]
    fn extension_reaches_both_ends() {
        let c = Centerline {
            points: vec![V::new(0.0, 0.0, 0.01), V::new(0.0, 0.0, 0.03)],
            s_ref: vec![0.01, 0.03],
            length_m: 0.04,
        };
        let e = c.extended().unwrap();
        assert!((e.first() - V::zeros()).norm() < 1e-15);
        assert!((e.last() - V::new(0.0, 0.0, 0.04)).norm() < 1e-15);
        assert!(rms_error(&c, &straight(0.04), 50).unwrap() < 1e-9);
    }

    fn cloud(seed: u64) -> ParticleCloud<f64> {
        let spec = CatheterSpec::with_defaults(0.04, 0.004, 5);
        discretize(&spec, 8, 0.001, seed).unwrap()
    }

    #[test]
    fn undeformed_centerline_lies_on_the_axis() {
        let spacing = 0.001 / 2.0;
        let mut mean_dev = 0.0;
        for seed in 0..4 {
            let c = extract_centerline(&cloud(seed), 20).unwrap();
            let dev = c
                .points
                .iter()
                .map(|p| (p.x * p.x + p.y * p.y).sqrt())
                .fold(0.0, f64::max);
            mean_dev += dev / 4.0;
        }
        assert!(mean_dev < 0.5 * spacing, "deviation {mean_dev}");
    }

    #[test]
    fn centerline_follows_rigid_translation_exactly() {
        let base = cloud(3);
        let t = V::new(0.25, -1.5, 3.0);
        let mut moved = base.clone();
        for p in &mut moved.particles {
            p.x += t;
        }
        let a = extract_centerline(&base, 10).unwrap();
        let b = extract_centerline(&moved, 10).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((*q - *p - t).norm() < 1e-12);
        }
    }

    #[test]
    fn bent_cloud_centerline_follows_the_arc() {
        // Wrap the straight cloud onto an arc of radius ρ bending toward +x;
        // the axis point at s lands on (ρ(1 − cos s/ρ), 0, ρ sin s/ρ).
        let rho = 0.03;
        let mut c = cloud(5);
        for p in &mut c.particles {
            let (x, y, z) = (p.x.x, p.x.y, p.x.z);
            let a = z / rho;
            p.x = V::new(rho - (rho - x) * a.cos(), y, (rho - x) * a.sin());
        }
        let line = extract_centerline(&c, 20).unwrap();
        let spacing = 0.001 / 8f64.cbrt();
        for (p, s) in line.points.iter().zip(&line.s_ref) {
            let a = s / rho;
            let arc = V::new(rho * (1.0 - a.cos()), 0.0, rho * a.sin());
            assert!((*p - arc).norm() < 0.5 * spacing, "s={s}: {p:?} vs {arc:?}");
        }
    }

    #[test]
    fn too_many_bins_is_a_resolution_error() {
        let c = cloud(0);
        assert!(matches!(extract_centerline(&c, 10_000), Err(Error::Resolution { .. })));
    }

    fn schedule(depths: Vec<f64>) -> InsertionSchedule<f64> {
        InsertionSchedule::new(RigidTransform::identity(), depths, straight(0.04)).unwrap()
    }

    #[test]
    fn full_depth_staging_is_the_identity() {
        let spec = CatheterSpec::with_defaults(0.04, 0.004, 5);
        let (sub, target) = stage_insertion(&spec, &schedule(vec![0.04]), 0).unwrap();
        assert_eq!(sub, spec);
        assert_eq!(target, straight(0.04));
    }

    #[test]
    fn one_segment_depth_exposes_only_the_last_segment() {
        let spec = CatheterSpec::with_defaults(0.04, 0.004, 5);
        let (sub, target) = stage_insertion(&spec, &schedule(vec![0.008]), 0).unwrap();
        let segs = sub.exposed_segments();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].segment, 4);
        assert!((target.arc_length() - 0.008).abs() < 1e-15);
    }

    /// Overlap of [a0, a1] and [b0, b1], computed without the catheter's
    /// segment bookkeeping.
    fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
        (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
    }

    #[test]
    fn twelve_mm_depth_spans_two_segments() {
        let spec = CatheterSpec::with_defaults(0.04, 0.004, 5);
        let (sub, _) = stage_insertion(&spec, &schedule(vec![0.012]), 0).unwrap();
        let exposed = (0.028, 0.040);
        let segs = sub.exposed_segments();
        let mut expected = Vec::new();
        for k in 0..5 {
            let len = overlap(exposed, (k as f64 * 0.008, (k + 1) as f64 * 0.008));
            if len > 0.0 {
                expected.push((k, len));
            }
        }
        assert_eq!(expected.len(), segs.len());
        for ((k, len), s) in expected.iter().zip(&segs) {
            assert_eq!(*k, s.segment);
            assert!((len - (s.end_m - s.start_m)).abs() < 1e-12);
        }
        assert!((expected[0].1 - 0.004).abs() < 1e-12);
    }

    #[test]
    fn depth_beyond_length_is_rejected() {
        let spec = CatheterSpec::with_defaults(0.04, 0.004, 5);
        assert!(stage_insertion(&spec, &schedule(vec![0.05]), 0).is_err());
        assert!(stage_insertion(&spec, &schedule(vec![0.01]), 1).is_err());
        assert!(InsertionSchedule::new(RigidTransform::identity(), vec![0.02, 0.01], straight(0.04))
            .is_err());
    }

    proptest::proptest! {
        #[test]
        fn rms_is_symmetric_and_rigidly_invariant(
            pts in proptest::collection::vec((-0.02..0.02f64, -0.02..0.02f64, -0.02..0.02f64), 3..8),
            ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in 0.1..1.0f64, angle in -3.0..3.0f64,
            t in (-0.1..0.1f64, -0.1..0.1f64, -0.1..0.1f64),
        ) {
            let pts: Vec<V> = pts.into_iter().map(|(x, y, z)| V::new(x, y, z)).collect();
            let Ok(a) = Polyline3::new(pts.clone()) else { return Ok(()) };
            let b = straight(0.03);
            let ab = rms_between(&a, &b, 50).unwrap();
            let ba = rms_between(&b, &a, 50).unwrap();
            proptest::prop_assert!(ab >= 0.0);
            proptest::prop_assert!((ab - ba).abs() <= 1e-15 * ab.max(1.0));
            let r = Matrix3::rotation(V::new(ax, ay, az).normalize(), angle);
            let m = RigidTransform::new(r, V::new(t.0, t.1, t.2));
            let moved = rms_between(&a.transformed(&m), &b.transformed(&m), 50).unwrap();
            proptest::prop_assert!((moved - ab).abs() <= 1e-12 * ab.max(1e-3));
        }
    }
}
