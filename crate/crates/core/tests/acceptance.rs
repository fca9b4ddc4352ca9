//! Acceptance run. Prints one PASS/FAIL line per criterion, then a count.
//! The exit status only reports crashes, so read the lines.
//!
//! `MAGCATH_ACCEPTANCE=full` runs the static design problems at desk
//! resolution (h = 1 mm, 12 particles per cell, about 6k particles) and
//! runs the insertion problem, which takes on the order of ten minutes per
//! iteration on one core. The default uses the coarsest grid the
//! discretizer accepts (h = D/3) for the static problems and reports the
//! insertion criterion as not run. All runs use 8 particles per cell.
//!
//! Positional arguments select criteria by number, e.g.
//! `cargo test --test acceptance -- 4 5`.

use std::f64::consts::PI;
use std::time::Instant;

use magcath::catheter::{assign_magnetization, discretize, AppliedField, CatheterSpec, MagnetizationProfile, Particle};
use magcath::design::{
    optimize, optimize_insertion, optimize_static, AngleMode, DesignSpace, DesignVector, FieldMode, OptimizerConfig,
    StaticField,
};
use magcath::linalg::{Matrix3, RigidTransform, Vector3};
use magcath::mpm::*;
use magcath::oracles::{beam_cantilever_deflection, brute_force_angle_search, magnetic_couple_density, AngleGrid};
use magcath::polyline::Polyline3;
use magcath::shape::{
    extract_centerline, rms_between, Discretization, EvalSettings, Evaluation, InsertionSchedule, ShapeEvaluator,
};
use magcath::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type V = Vector3<f64>;
type M = Matrix3<f64>;

// Thresholds of the acceptance criteria.
const STATIC_RMS_MM: f64 = 2.0;
const STATIC_ITERATIONS: usize = 200;
const STATIC_MINUTES: f64 = 30.0;
const INSERTION_ERROR_MM: f64 = 3.0;
const INSERTION_ITERATIONS: usize = 300;
const INSERTION_STAGES: usize = 8;
const B_MAX_T: f64 = 0.010;
const INVERSE_MM: f64 = 0.5;
const INVERSE_ITERATIONS: usize = 100;
const ORACLE_ANGLE_DEG: f64 = 5.0;
const BEAM_REL: f64 = 0.10;
const DRIFT_OF_DIAMETER: f64 = 0.01;
const STRAIGHT_OF_LENGTH: f64 = 0.02;
const EQUIVARIANCE_MM: f64 = 0.2;

const PPC: usize = 8;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

#[derive(Clone, Copy)]
struct Scale {
    full: bool,
}

impl Scale {
    /// Grid spacing and particles per cell of a static design run.
    fn static_grid(&self, diameter: f64) -> (f64, usize) {
        if self.full {
            (1e-3, 12)
        } else {
            (diameter / 3.0, PPC)
        }
    }
}

fn sim(damping: f64, tolerance: f64, max_steps: usize) -> SimConfig<f64> {
    SimConfig {
        dt: TimeStep::Auto { safety: 0.7 },
        damping_coefficient: damping,
        settle_tolerance: tolerance,
        max_settle_steps: max_steps,
        ..SimConfig::default()
    }
}

fn settings(sim: SimConfig<f64>, h: f64, ppc: usize) -> EvalSettings<f64> {
    EvalSettings::new(
        sim,
        Discretization {
            grid_spacing_m: h,
            particles_per_cell: ppc,
            seed: 1,
        },
    )
}

fn design(angles: &[(f64, f64)], fields_mt: &[[f64; 3]]) -> DesignVector {
    DesignVector {
        angles: angles.to_vec(),
        fields_tesla: fields_mt.iter().map(|b| V::from_f64(*b) * 1e-3).collect(),
    }
}

fn straight(spec: &CatheterSpec<f64>) -> Polyline3<f64> {
    let p = spec.base_pose;
    Polyline3::segment(p.apply_point(V::zeros()), p.apply_point(V::new(0.0, 0.0, spec.length_m))).unwrap()
}

/// Settles `d` on `spec` against a placeholder target and returns the
/// extended centerline.
fn settled_shape(spec: &CatheterSpec<f64>, d: &DesignVector, s: EvalSettings<f64>) -> Result<(Polyline3<f64>, bool)> {
    let ev = ShapeEvaluator::new_static(spec, straight(spec), s)?;
    let r = ev.run_stage(0, &d.profile()?, &d.applied_fields(None)[0])?;
    Ok((r.centerline.extended()?, r.state.converged))
}

/// Adds a quadratic offset along `dir`, zero with zero slope at the base and
/// `amp` at the tip.
fn perturbed(line: &Polyline3<f64>, amp: f64, dir: V) -> Polyline3<f64> {
    let l = line.arc_length();
    let s = line.cumulative_lengths();
    let pts = line
        .points()
        .iter()
        .zip(&s)
        .map(|(p, si)| {
            let u = si / l;
            *p + dir * (amp * u * u)
        })
        .collect();
    Polyline3::new(pts).unwrap()
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn c1_static_design(scale: Scale) -> Result<Outcome> {
    let spec = CatheterSpec::with_defaults(0.040, 0.004, 5);
    let (h, ppc) = scale.static_grid(spec.diameter_m);
    let field = [7.0, 5.0, 4.0];
    let hidden = [
        design(&[(2.5, 5.8), (1.3, 4.7), (2.5, 1.5), (0.7, 3.9), (2.8, 5.7)], &[field]),
        design(&[(2.0, 0.7), (2.2, 1.7), (2.5, 1.3), (0.7, 3.7), (2.4, 5.9)], &[field]),
    ];
    let bumps = [V::new(0.0, 1.0, 0.0), V::new(-0.6, 0.0, 0.8).normalize()];
    let gen = settings(sim(60.0, 5e-4, 400_000), h, ppc);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (d, bump)) in hidden.iter().zip(bumps).enumerate() {
        let (shape, _) = settled_shape(&spec, d, gen.clone())?;
        let target = perturbed(&shape, 1e-3, bump);
        let straight_mm = rms_between(&straight(&spec), &target, 100)?;
        let ev = ShapeEvaluator::new_static(&spec, target, settings(sim(60.0, 3e-3, 40_000), h, ppc))?;
        let cfg = OptimizerConfig {
            target_error_mm: STATIC_RMS_MM,
            max_iterations: STATIC_ITERATIONS,
            seed: 100 + i as u64,
            ..OptimizerConfig::default()
        };
        let t = Instant::now();
        let r = optimize_static(&ev, AngleMode::Sphere, StaticField::Fixed(V::from_f64(field) * 1e-3), &cfg)?;
        let minutes = t.elapsed().as_secs_f64() / 60.0;
        let best = r.best_evaluation.score_mm;
        let ok = best < STATIC_RMS_MM && r.iterations() <= STATIC_ITERATIONS && minutes <= STATIC_MINUTES;
        pass &= ok;
        parts.push(format!(
            "target {}: {best:.2} mm after {} it in {minutes:.1} min (straight rod {straight_mm:.1} mm, {} particles)",
            i + 1,
            r.iterations(),
            ev.particle_count()
        ));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn c2_insertion_design(scale: Scale) -> Result<Outcome> {
    if !scale.full {
        return Ok(Outcome::new(
            false,
            "not run at default scale (8 settles of a 56 mm rod per candidate); set MAGCATH_ACCEPTANCE=full",
        ));
    }
    let spec = CatheterSpec::with_defaults(0.056, 0.003, 5);
    let h = spec.diameter_m / 3.0;
    let hidden = design(
        &[(1.2, 0.3), (2.0, 1.5), (0.7, 2.5), (1.6, 4.0), (2.4, 5.0)],
        &[[4.5, 4.0, 3.0]],
    );
    let (path, _) = settled_shape(&spec, &hidden, settings(sim(30.0, 5e-4, 400_000), h, PPC))?;
    let schedule = InsertionSchedule::equally_spaced(spec.base_pose, spec.length_m, INSERTION_STAGES, path)?;
    let ev = ShapeEvaluator::new_insertion(&spec, &schedule, settings(sim(30.0, 3e-3, 60_000), h, PPC))?;
    let zero = design(&[(0.0, 0.0); 5], &[[0.0; 3]; INSERTION_STAGES]);
    let (p, f) = zero.decode(Some(B_MAX_T))?;
    let baseline = ev.evaluate(&p, &f)?.score_mm;
    let cfg = OptimizerConfig {
        b_max_tesla: B_MAX_T,
        seed: 7,
        ..OptimizerConfig::insertion()
    };
    let t = Instant::now();
    let r = optimize_insertion(&ev, AngleMode::Sphere, false, &cfg)?;
    let minutes = t.elapsed().as_secs_f64() / 60.0;
    let max_b = r
        .trace
        .records
        .iter()
        .flat_map(|rec| rec.design.fields_mt.iter())
        .map(|b| (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt())
        .fold(0.0, f64::max);
    let best = r.best_evaluation.score_mm;
    let bounded = max_b <= B_MAX_T * 1e3 + 1e-9;
    let pass = best <= INSERTION_ERROR_MM && r.iterations() <= INSERTION_ITERATIONS && bounded;
    Ok(Outcome::new(
        pass,
        format!(
            "max stage error {best:.2} mm after {} it in {minutes:.1} min, max |B| {max_b:.3} mT \
             (straight rod {baseline:.2} mm, stages {:.2?})",
            r.iterations(),
            r.best_evaluation.stage_errors_mm
        ),
    ))
}

fn c3_inverse_crime() -> Result<Outcome> {
    // Three segments under a fixed field, target from a known design.
    let spec = CatheterSpec::with_defaults(0.020, 0.003, 3);
    let field = [6.0, 0.0, 4.0];
    let known = design(&[(1.0, 0.5), (2.0, 2.0), (0.6, 4.0)], &[field]);
    let s = settings(sim(120.0, 2e-3, 60_000), 1e-3, PPC);
    let (target, _) = settled_shape(&spec, &known, s.clone())?;
    let straight_mm = rms_between(&straight(&spec), &target, 100)?;
    let ev = ShapeEvaluator::new_static(&spec, target, s)?;
    let cfg = OptimizerConfig {
        target_error_mm: INVERSE_MM,
        max_iterations: INVERSE_ITERATIONS,
        seed: 3,
        ..OptimizerConfig::default()
    };
    let r = optimize_static(&ev, AngleMode::Sphere, StaticField::Fixed(V::from_f64(field) * 1e-3), &cfg)?;
    let inverse = r.best_evaluation.score_mm;
    let inverse_iters = r.iterations();
    let inverse_ok = inverse < INVERSE_MM && inverse_iters <= INVERSE_ITERATIONS;

    // One segment, directions in the x-z plane: optimizer against a 2° sweep.
    // The rod is long enough and the settle tight enough for the error to
    // change by about 0.05 mm per degree.
    let spec = CatheterSpec::with_defaults(0.018, 0.003, 1);
    let field = [8.0, 0.0, 4.0];
    let s = settings(sim(80.0, 3e-4, 100_000), 1e-3, PPC);
    let (target, _) = settled_shape(&spec, &design(&[(2.0, 0.0)], &[field]), s.clone())?;
    let ev = ShapeEvaluator::new_static(&spec, target, s)?;
    let b = AppliedField::new(V::from_f64(field) * 1e-3);
    let brute = brute_force_angle_search(AngleGrid::Plane { phi_rad: 0.0 }, 2.0, |t, p| {
        let profile = design(&[(t, p)], &[]).profile().unwrap();
        ev.evaluate(&profile, &[b]).map(|e| e.score_mm).unwrap_or(f64::INFINITY)
    })?;
    let cfg = OptimizerConfig {
        target_error_mm: 0.02,
        max_iterations: 30,
        population: 6,
        seed: 4,
        ..OptimizerConfig::default()
    };
    let r = optimize_static(
        &ev,
        AngleMode::Plane { phi_rad: 0.0 },
        StaticField::Fixed(V::from_f64(field) * 1e-3),
        &cfg,
    )?;
    let found = r.best.angles[0].0;
    let gap_deg = wrap_angle(found - brute.theta_rad).abs().to_degrees();
    let oracle_ok = gap_deg <= ORACLE_ANGLE_DEG;
    Ok(Outcome::new(
        inverse_ok && oracle_ok,
        format!(
            "N=3 recovered to {inverse:.3} mm in {} it (straight rod {straight_mm:.1} mm); \
             N=1 optimizer θ {:.1}° vs brute force {:.1}° ({gap_deg:.2}° apart)",
            inverse_iters,
            found.to_degrees(),
            brute.theta_rad.to_degrees()
        ),
    ))
}

fn c4_physics() -> Result<Outcome> {
    let spec = CatheterSpec::with_defaults(0.040, 0.004, 5);
    let h = 1e-3;
    let cloud = discretize(&spec, PPC, h, 1)?;
    let clamp = ClampRegion::at_base(&spec, h);
    let axial = MagnetizationProfile::uniform(V::new(0.0, 0.0, 1.0), 5)?;
    let cloud = assign_magnetization(cloud, &axial, &spec)?;
    let samples = 40;

    // Small perpendicular field against the beam oracle.
    let b = V::new(2e-4, 0.0, 0.0);
    let tight = sim(60.0, 2e-5, 400_000);
    let s = settle(&cloud, &AppliedField::new(b), &tight, &clamp).map_err(|f| f.error)?;
    let line = extract_centerline(&s.cloud, samples)?.extended()?;
    let tip = line.last().x;
    let c = magnetic_couple_density(spec.cross_section_area(), V::new(0.0, 0.0, spec.remanent_magnitude_a_per_m), b);
    let beam = beam_cantilever_deflection(spec.length_m, spec.youngs_modulus(), spec.area_moment(), c, 41)?;
    let oracle = beam.last().x;
    let rel = (tip - oracle).abs() / oracle;
    let beam_ok = rel <= BEAM_REL && oracle < 0.05 * spec.length_m;

    // Zero field: drift of the settled particles.
    let s = settle(&cloud, &AppliedField::zero(), &sim(60.0, 1e-3, 100_000), &clamp).map_err(|f| f.error)?;
    let sq: f64 = cloud
        .particles
        .iter()
        .zip(&s.cloud.particles)
        .map(|(a, b)| (a.x - b.x).norm_squared())
        .sum();
    let drift = (sq / cloud.len() as f64).sqrt();
    let drift_ok = drift < DRIFT_OF_DIAMETER * spec.diameter_m;

    // Axial field on axial magnetization.
    let s = settle(&cloud, &AppliedField::new(V::new(0.0, 0.0, 0.01)), &sim(60.0, 1e-3, 100_000), &clamp)
        .map_err(|f| f.error)?;
    let line = extract_centerline(&s.cloud, samples)?;
    let lateral = line.points.iter().map(|p| (p.x * p.x + p.y * p.y).sqrt()).fold(0.0, f64::max);
    let straight_ok = lateral < STRAIGHT_OF_LENGTH * spec.length_m;

    Ok(Outcome::new(
        beam_ok && drift_ok && straight_ok,
        format!(
            "tip {:.4} mm vs beam {:.4} mm ({:.1}%, {:.1}% of L); zero-field drift {:.2e} mm; \
             axial lateral {:.2e} mm",
            tip * 1e3,
            oracle * 1e3,
            rel * 100.0,
            oracle / spec.length_m * 100.0,
            drift * 1e3,
            lateral * 1e3
        ),
    ))
}

fn random_particles(n: usize, rng: &mut ChaCha8Rng) -> Vec<Particle<f64>> {
    let mut r = |s: f64| rng.gen_range(-s..s);
    (0..n)
        .map(|_| Particle {
            x: V::new(r(3e-3), r(3e-3), r(3e-3)),
            v: V::new(r(1.0), r(1.0), r(1.0)),
            f: M::identity(),
            c: M::from_rows([[r(50.0), r(50.0), r(50.0)], [r(50.0), r(50.0), r(50.0)], [r(50.0), r(50.0), r(50.0)]]),
            volume0: 1e-10,
            mass: 1.1e-7 * (1.0 + r(0.5)),
            m_r: V::new(0.0, 0.0, 1e5),
            segment: 0,
            s_ref: 0.0,
        })
        .collect()
}

fn synthetic_objective(d: &DesignVector) -> Result<Evaluation<f64>> {
    let s: f64 = d.angles.iter().map(|(t, p)| (t - 1.0).powi(2) + (p - 2.0).powi(2)).sum();
    Ok(Evaluation {
        score_mm: s,
        stage_errors_mm: vec![s],
        mean_mm: s,
        max_mm: s,
        penalized: false,
        unconverged: false,
        diagnostic: None,
    })
}

fn c5_properties() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();

    let mut pou: f64 = 0.0;
    for _ in 0..1000 {
        let local = V::new(rng.gen_range(2.0..9.0), rng.gen_range(2.0..9.0), rng.gen_range(2.0..9.0));
        let st = Stencil::new(local);
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    sum += st.weight(i, j, k);
                }
            }
        }
        pou = pou.max((sum - 1.0).abs());
    }
    checks.push(("partition of unity", pou, 1e-12));

    let h = 1e-3;
    let stress_free = Material { mu: 0.0, lambda: 0.0 };
    let none = Loads::field(V::zeros());
    let mut particles = random_particles(500, &mut rng);
    let mass: f64 = particles.iter().map(|p| p.mass).sum();
    let mut grid = BackgroundGrid::covering(&particles, h)?;
    let (mut mass_err, mut mom_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let before = particle_momentum(&particles);
        grid.refit(&particles)?;
        p2g(&particles, &mut grid, 1e-6, &stress_free, &none, Parallelism::Serial)?;
        mass_err = mass_err.max((grid.total_mass() - mass).abs() / mass);
        grid_update(&mut grid, 1e-6, 0.0);
        g2p(&grid, &mut particles, 1e-6, Parallelism::Serial)?;
        mom_err = mom_err.max((particle_momentum(&particles) - before).norm() / before.norm());
    }
    checks.push(("p2g mass conservation", mass_err, 1e-12));
    checks.push(("zero-stress momentum per step", mom_err, 1e-10));

    // An affine velocity field carried with its gradient as C.
    let a = V::new(0.3, -0.2, 0.5);
    let g = M::from_rows([[2.0, -1.0, 0.5], [0.3, 1.5, -2.0], [1.0, 0.2, -0.7]]);
    for (label, grad) in [("g2p constant field", M::zeros()), ("g2p linear field", g)] {
        let mut ps = random_particles(300, &mut rng);
        for p in &mut ps {
            p.v = a + grad * p.x;
            p.c = grad;
        }
        let mut grid = BackgroundGrid::covering(&ps, h)?;
        p2g(&ps, &mut grid, 1e-9, &stress_free, &none, Parallelism::Serial)?;
        grid_update(&mut grid, 1e-9, 0.0);
        let before: Vec<V> = ps.iter().map(|p| p.x).collect();
        g2p(&grid, &mut ps, 1e-9, Parallelism::Serial)?;
        let err = ps
            .iter()
            .zip(&before)
            .map(|(p, x)| {
                let expect = a + grad * *x;
                (p.v - expect).norm() / expect.norm()
            })
            .fold(0.0, f64::max);
        checks.push((label, err, 1e-10));
    }

    let line = |pts: &[[f64; 3]]| Polyline3::new(pts.iter().map(|p| V::from_f64(*p)).collect()).unwrap();
    let p = line(&[[0.0, 0.0, 0.0], [1e-3, 2e-3, 1e-2], [4e-3, 1e-3, 2e-2], [3e-3, -2e-3, 3e-2]]);
    let q = line(&[[0.0, 0.0, 0.0], [2e-3, 1e-3, 1.1e-2], [2e-3, 3e-3, 2.1e-2]]);
    let base = rms_between(&p, &q, 200)?;
    let pose = RigidTransform::new(M::rotation(V::new(0.2, 0.9, -0.4).normalize(), 1.3), V::new(0.5, -0.1, 0.2));
    let moved = rms_between(&p.transformed(&pose), &q.transformed(&pose), 200)?;
    checks.push(("rms rigid-motion invariance", (moved - base).abs() / base, 1e-12));

    let layout = DesignSpace {
        segments: 3,
        angles: AngleMode::Sphere,
        fields: FieldMode::Fixed(vec![V::zeros()]),
        b_max_tesla: B_MAX_T,
    };
    let cfg = OptimizerConfig {
        target_error_mm: 1e-12,
        max_iterations: 40,
        seed: 9,
        ..OptimizerConfig::default()
    };
    let r = optimize(&layout, synthetic_objective, &cfg)?;
    checks.push(("trace monotone", if r.trace.best_is_monotone() { 0.0 } else { 1.0 }, 0.0));

    let spec = CatheterSpec::with_defaults(0.012, 0.003, 2);
    let s = settings(sim(150.0, 2e-3, 60_000), 1e-3, PPC);
    let (target, _) = settled_shape(&spec, &design(&[(1.5, 0.0), (1.5, 1.5)], &[[0.0, 0.0, 10.0]]), s.clone())?;
    let ev = ShapeEvaluator::new_static(&spec, target, s)?;
    let cfg = OptimizerConfig {
        target_error_mm: 1e-6,
        max_iterations: 3,
        population: 6,
        seed: 11,
        ..OptimizerConfig::default()
    };
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let r = optimize_static(&ev, AngleMode::Sphere, StaticField::Free, &cfg)?;
        let mut out = Vec::new();
        r.trace.write_jsonl(&mut out)?;
        bytes.push(out);
    }
    checks.push(("same-seed trace bytes differ", if bytes[0] == bytes[1] { 0.0 } else { 1.0 }, 0.0));

    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, v, tol)| v.is_nan() || v > tol)
        .map(|(n, v, tol)| format!("{n} {v:.2e} > {tol:.0e}"))
        .collect();
    let worst = checks
        .iter()
        .filter(|(_, _, tol)| *tol > 0.0)
        .map(|(n, v, _)| format!("{n} {v:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome::new(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks; {worst}", checks.len())
        } else {
            failed.join("; ")
        },
    ))
}

fn c6_equivariance() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let axis = V::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
    let pose = RigidTransform::new(
        M::rotation(axis, rng.gen_range(0.5..3.0)),
        V::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)),
    );
    let field = V::new(4.0, 2.0, 3.0) * 1e-3;
    let known = design(&[(1.3, 0.4), (0.5, 2.5), (2.0, 4.0)], &[field.to_array().map(|b| b * 1e3)]);
    let s = settings(sim(120.0, 2e-3, 60_000), 1e-3, PPC);
    let cfg = OptimizerConfig {
        target_error_mm: 1e-6,
        max_iterations: 6,
        population: 8,
        seed: 12,
        ..OptimizerConfig::default()
    };
    let run = |pose: RigidTransform<f64>| -> Result<f64> {
        let spec = CatheterSpec {
            base_pose: pose,
            ..CatheterSpec::with_defaults(0.020, 0.003, 3)
        };
        // The target is a perturbed identity-pose shape carried by the pose.
        let plain = CatheterSpec::with_defaults(0.020, 0.003, 3);
        let (shape, _) = settled_shape(&plain, &known, s.clone())?;
        let target = perturbed(&shape, 5e-4, V::new(0.0, 1.0, 0.0)).transformed(&pose);
        let ev = ShapeEvaluator::new_static(&spec, target, s.clone())?;
        let r = optimize_static(&ev, AngleMode::Sphere, StaticField::Fixed(pose.apply_vector(field)), &cfg)?;
        Ok(r.best_evaluation.score_mm)
    };
    let plain = run(RigidTransform::identity())?;
    let rotated = run(pose)?;
    let gap = (plain - rotated).abs();
    Ok(Outcome::new(
        gap <= EQUIVARIANCE_MM,
        format!("final error {plain:.4} mm vs rotated {rotated:.4} mm (gap {gap:.2e} mm)"),
    ))
}

type Criterion = Box<dyn Fn() -> Result<Outcome>>;

fn main() {
    let scale = Scale {
        full: std::env::var("MAGCATH_ACCEPTANCE").is_ok_and(|v| v == "full"),
    };
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: Vec<(usize, &str, Criterion)> = vec![
        (1, "static design reproduction", Box::new(move || c1_static_design(scale))),
        (2, "insertion design reproduction", Box::new(move || c2_insertion_design(scale))),
        (3, "inverse-crime exactness", Box::new(c3_inverse_crime)),
        (4, "physics validation", Box::new(c4_physics)),
        (5, "numerical property suite", Box::new(c5_properties)),
        (6, "frame equivariance", Box::new(c6_equivariance)),
    ];
    println!("acceptance ({} scale)", if scale.full { "full" } else { "default" });
    let (mut passed, mut total) = (0, 0);
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        total += 1;
        if outcome.pass {
            passed += 1;
        }
        println!(
            "{} [{n}] {name}: {} ({:.0} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{passed}/{total} criteria passed");
}
