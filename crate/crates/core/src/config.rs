//! Run configuration files.
//!
//! A run is described by one TOML file. Lengths are in millimeters and
//! fields in millitesla; both are converted to SI on load. Relative paths
//! are resolved against the directory holding the file.
//!
//! ```toml
//! [catheter]
//! length_mm = 40.0            # required
//! diameter_mm = 4.0           # required
//! segments = 5                # required
//! remanent_magnetization_a_per_m = 1e5
//! density_kg_per_m3 = 1100.0
//! shear_modulus_kpa = 100.0
//! poisson_ratio = 0.45
//! base_position_mm = [0.0, 0.0, 0.0]
//! base_rotation_axis = [0.0, 0.0, 1.0]
//! base_rotation_deg = 0.0
//!
//! [simulation]
//! grid_spacing_mm = 1.0       # default min(1 mm, D/3)
//! particles_per_cell = 8
//! seed = 1
//! cfl_safety = 0.3            # ignored when dt_s is set
//! # dt_s = 1e-6
//! damping_per_s = 60.0
//! settle_tolerance_mm_per_s = 1.0
//! settle_window = 10
//! max_settle_steps = 200000
//! gravity_m_per_s2 = [0.0, 0.0, 0.0]
//! rms_samples = 50
//! # centerline_samples = 30
//!
//! [problem]
//! mode = "static"             # or "insertion"
//! target = "target.csv"       # x_mm,y_mm,z_mm columns
//! field = "fixed"             # static optimize: "fixed" or "free"
//! field_mT = [0.0, 5.0, 0.0]
//! magnetization = [[1, 0, 0], [0, 1, 0], ...]   # simulate only
//! # insertion: stages = 8 or depths_mm = [...]; fields_mT = [[...], ...]
//! shared_field = false
//! aggregate = "max"           # or "mean"
//! penalty_mm = 1000.0
//! angles = "sphere"           # or "plane"
//! plane_phi_deg = 0.0
//!
//! [optimizer]
//! seed = 0
//! population = 12
//! # parents = 6
//! max_iterations = 200        # insertion default 300
//! target_error_mm = 2.0       # insertion default 3
//! b_max_mT = 10.0
//! sigma0 = 1.0
//! angle_scale_deg = 34.377
//! field_scale = 0.3
//! penalty_patience = 5
//!
//! [output]
//! dir = "runs/example"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catheter::CatheterSpec;
use crate::design::{AngleMode, OptimizerConfig};
use crate::error::{Error, Result};
use crate::linalg::{Matrix3, RigidTransform, Vector3};
use crate::mpm::{SimConfig, TimeStep};
use crate::shape::{Aggregate, Discretization, EvalSettings, DEFAULT_PENALTY_MM, DEFAULT_RMS_SAMPLES};

/// The file as written, before defaults and unit conversion.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catheter: Option<RawCatheter>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub simulation: RawSimulation,
    #[serde(default, skip_serializing_if = "is_default")]
    pub problem: RawProblem,
    #[serde(default, skip_serializing_if = "is_default")]
    pub optimizer: RawOptimizer,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: RawOutput,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCatheter {
    pub length_mm: Option<f64>,
    pub diameter_mm: Option<f64>,
    pub segments: Option<usize>,
    pub remanent_magnetization_a_per_m: Option<f64>,
    pub density_kg_per_m3: Option<f64>,
    pub shear_modulus_kpa: Option<f64>,
    pub poisson_ratio: Option<f64>,
    pub base_position_mm: Option<[f64; 3]>,
    pub base_rotation_axis: Option<[f64; 3]>,
    pub base_rotation_deg: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    pub grid_spacing_mm: Option<f64>,
    pub particles_per_cell: Option<usize>,
    pub seed: Option<u64>,
    pub cfl_safety: Option<f64>,
    pub dt_s: Option<f64>,
    pub damping_per_s: Option<f64>,
    pub settle_tolerance_mm_per_s: Option<f64>,
    pub settle_window: Option<usize>,
    pub max_settle_steps: Option<usize>,
    pub gravity_m_per_s2: Option<[f64; 3]>,
    pub rms_samples: Option<usize>,
    pub centerline_samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub mode: Option<String>,
    pub target: Option<PathBuf>,
    pub field: Option<String>,
    #[serde(rename = "field_mT")]
    pub field_mt: Option<[f64; 3]>,
    #[serde(rename = "fields_mT")]
    pub fields_mt: Option<Vec<[f64; 3]>>,
    pub magnetization: Option<Vec<[f64; 3]>>,
    pub stages: Option<usize>,
    pub depths_mm: Option<Vec<f64>>,
    pub shared_field: Option<bool>,
    pub aggregate: Option<String>,
    pub penalty_mm: Option<f64>,
    pub angles: Option<String>,
    pub plane_phi_deg: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOptimizer {
    pub seed: Option<u64>,
    pub population: Option<usize>,
    pub parents: Option<usize>,
    pub max_iterations: Option<usize>,
    pub target_error_mm: Option<f64>,
    #[serde(rename = "b_max_mT")]
    pub b_max_mt: Option<f64>,
    pub sigma0: Option<f64>,
    pub angle_scale_deg: Option<f64>,
    pub field_scale: Option<f64>,
    pub penalty_patience: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Static,
    Insertion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldChoice {
    Fixed,
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Stages(usize),
    Depths(Vec<f64>),
}

/// What is simulated or designed.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub mode: Mode,
    /// Absolute path of the target polyline CSV.
    pub target: Option<PathBuf>,
    pub field: FieldChoice,
    /// Static field, Tesla.
    pub field_tesla: Vector3<f64>,
    /// Per-stage fields for insertion simulations, Tesla.
    pub fields_tesla: Option<Vec<Vector3<f64>>>,
    pub magnetization: Option<Vec<Vector3<f64>>>,
    pub schedule: Schedule,
    pub shared_field: bool,
    pub angles: AngleMode,
}

/// A validated configuration in SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub catheter: CatheterSpec<f64>,
    pub eval: EvalSettings<f64>,
    pub problem: Problem,
    pub optimizer: OptimizerConfig,
    pub output_dir: Option<PathBuf>,
    /// The parsed file with paths made absolute; written as the run's
    /// config copy.
    pub raw: RawConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = std::path::absolute(path)?
            .parent()
            .map_or_else(|| PathBuf::from("/"), Path::to_path_buf);
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Parses `text`, resolving relative paths against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        let absolute = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            }
        };
        raw.problem.target = raw.problem.target.as_ref().map(absolute);
        raw.output.dir = raw.output.dir.as_ref().map(absolute);
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let catheter = build_catheter(raw.catheter.as_ref())?;
        let eval = build_eval(&raw.simulation, &raw.problem, &catheter)?;
        let problem = build_problem(&raw.problem)?;
        let optimizer = build_optimizer(&raw.optimizer, problem.mode)?;
        if let Some(t) = &problem.target {
            if !t.is_file() {
                return Err(Error::config(format!(
                    "problem.target: file {} does not exist",
                    t.display()
                )));
            }
        }
        Ok(Self {
            catheter,
            eval,
            problem,
            optimizer,
            output_dir: raw.output.dir.clone(),
            raw,
        })
    }

    /// TOML text of the configuration as run.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.raw).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    /// Replaces the optimizer seed, keeping the stored copy in step.
    pub fn set_seed(&mut self, seed: u64) {
        self.optimizer.seed = seed;
        self.raw.optimizer.seed = Some(seed);
    }
}

fn missing(key: &str) -> Error {
    Error::config(format!("missing required key `{key}`"))
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(format!("`{key}` must be positive, got {v}")))
    }
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn build_catheter(raw: Option<&RawCatheter>) -> Result<CatheterSpec<f64>> {
    let c = raw.ok_or_else(|| missing("catheter"))?;
    let length = c.length_mm.ok_or_else(|| missing("catheter.length_mm"))?;
    let diameter = c.diameter_mm.ok_or_else(|| missing("catheter.diameter_mm"))?;
    let segments = c.segments.ok_or_else(|| missing("catheter.segments"))?;
    let mut spec = CatheterSpec::with_defaults(
        positive(length, "catheter.length_mm")? * 1e-3,
        positive(diameter, "catheter.diameter_mm")? * 1e-3,
        segments,
    );
    if let Some(m) = c.remanent_magnetization_a_per_m {
        spec.remanent_magnitude_a_per_m = m;
    }
    if let Some(rho) = c.density_kg_per_m3 {
        spec.density_kg_m3 = rho;
    }
    if let Some(mu) = c.shear_modulus_kpa {
        spec.shear_modulus_pa = mu * 1e3;
    }
    if let Some(nu) = c.poisson_ratio {
        spec.poisson_ratio = nu;
    }
    let position = vec3(c.base_position_mm.unwrap_or([0.0; 3])) * 1e-3;
    let angle = c.base_rotation_deg.unwrap_or(0.0).to_radians();
    let rotation = if angle == 0.0 {
        Matrix3::identity()
    } else {
        let axis = vec3(c.base_rotation_axis.unwrap_or([0.0, 0.0, 1.0]));
        if !(axis.norm() > 0.0) {
            return Err(Error::config("`catheter.base_rotation_axis` must be non-zero"));
        }
        Matrix3::rotation(axis.normalize(), angle)
    };
    spec.base_pose = RigidTransform::new(rotation, position);
    spec.validate()?;
    Ok(spec)
}

fn build_eval(
    s: &RawSimulation,
    p: &RawProblem,
    spec: &CatheterSpec<f64>,
) -> Result<EvalSettings<f64>> {
    let defaults = SimConfig::<f64>::default();
    let dt = match s.dt_s {
        Some(dt) => TimeStep::Fixed(positive(dt, "simulation.dt_s")?),
        None => TimeStep::Auto {
            safety: s.cfl_safety.unwrap_or(0.3),
        },
    };
    let sim = SimConfig {
        dt,
        damping_coefficient: s.damping_per_s.unwrap_or(defaults.damping_coefficient),
        settle_tolerance: s
            .settle_tolerance_mm_per_s
            .map_or(defaults.settle_tolerance, |v| v * 1e-3),
        settle_window: s.settle_window.unwrap_or(defaults.settle_window),
        max_settle_steps: s.max_settle_steps.unwrap_or(defaults.max_settle_steps),
        gravity: s.gravity_m_per_s2.map_or(defaults.gravity, vec3),
        parallelism: defaults.parallelism,
    };
    sim.validate()?;
    let h = match s.grid_spacing_mm {
        Some(h) => positive(h, "simulation.grid_spacing_mm")? * 1e-3,
        None => (spec.diameter_m / 3.0).min(1e-3),
    };
    let discretization = Discretization {
        grid_spacing_m: h,
        particles_per_cell: s.particles_per_cell.unwrap_or(8),
        seed: s.seed.unwrap_or(1),
    };
    let rms_samples = s.rms_samples.unwrap_or(DEFAULT_RMS_SAMPLES);
    if rms_samples < 2 {
        return Err(Error::config("`simulation.rms_samples` must be at least 2"));
    }
    if matches!(s.centerline_samples, Some(n) if n < 2) {
        return Err(Error::config("`simulation.centerline_samples` must be at least 2"));
    }
    let aggregate = match p.aggregate.as_deref() {
        None | Some("max") => Aggregate::Max,
        Some("mean") => Aggregate::Mean,
        Some(other) => {
            return Err(Error::config(format!(
                "`problem.aggregate` must be \"max\" or \"mean\", got {other:?}"
            )))
        }
    };
    Ok(EvalSettings {
        sim,
        discretization,
        centerline_samples: s.centerline_samples,
        rms_samples,
        penalty_mm: positive(p.penalty_mm.unwrap_or(DEFAULT_PENALTY_MM), "problem.penalty_mm")?,
        aggregate,
    })
}

fn build_problem(p: &RawProblem) -> Result<Problem> {
    let mode = match p.mode.as_deref() {
        None | Some("static") => Mode::Static,
        Some("insertion") => Mode::Insertion,
        Some(other) => {
            return Err(Error::config(format!(
                "`problem.mode` must be \"static\" or \"insertion\", got {other:?}"
            )))
        }
    };
    let field = match p.field.as_deref() {
        None | Some("fixed") => FieldChoice::Fixed,
        Some("free") => FieldChoice::Free,
        Some(other) => {
            return Err(Error::config(format!(
                "`problem.field` must be \"fixed\" or \"free\", got {other:?}"
            )))
        }
    };
    let angles = match p.angles.as_deref() {
        None | Some("sphere") => AngleMode::Sphere,
        Some("plane") => AngleMode::Plane {
            phi_rad: p.plane_phi_deg.unwrap_or(0.0).to_radians(),
        },
        Some(other) => {
            return Err(Error::config(format!(
                "`problem.angles` must be \"sphere\" or \"plane\", got {other:?}"
            )))
        }
    };
    let schedule = match (&p.depths_mm, p.stages) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "give either `problem.stages` or `problem.depths_mm`, not both",
            ))
        }
        (Some(d), None) => Schedule::Depths(d.iter().map(|v| v * 1e-3).collect()),
        (None, Some(0)) => return Err(Error::config("`problem.stages` must be at least 1")),
        (None, k) => Schedule::Stages(k.unwrap_or(8)),
    };
    Ok(Problem {
        mode,
        target: p.target.clone(),
        field,
        field_tesla: vec3(p.field_mt.unwrap_or([0.0; 3])) * 1e-3,
        fields_tesla: p
            .fields_mt
            .as_ref()
            .map(|f| f.iter().map(|b| vec3(*b) * 1e-3).collect()),
        magnetization: p
            .magnetization
            .as_ref()
            .map(|m| m.iter().copied().map(vec3).collect()),
        schedule,
        shared_field: p.shared_field.unwrap_or(false),
        angles,
    })
}

fn build_optimizer(o: &RawOptimizer, mode: Mode) -> Result<OptimizerConfig> {
    let base = match mode {
        Mode::Static => OptimizerConfig::default(),
        Mode::Insertion => OptimizerConfig::insertion(),
    };
    let cfg = OptimizerConfig {
        population: o.population.unwrap_or(base.population),
        parents: o.parents.or(base.parents),
        sigma0: o.sigma0.unwrap_or(base.sigma0),
        angle_scale_rad: o
            .angle_scale_deg
            .map_or(base.angle_scale_rad, f64::to_radians),
        field_scale: o.field_scale.unwrap_or(base.field_scale),
        max_iterations: o.max_iterations.unwrap_or(base.max_iterations),
        target_error_mm: o.target_error_mm.unwrap_or(base.target_error_mm),
        seed: o.seed.unwrap_or(base.seed),
        b_max_tesla: o.b_max_mt.map_or(base.b_max_tesla, |b| b * 1e-3),
        parallel: base.parallel,
        penalty_patience: o.penalty_patience.unwrap_or(base.penalty_patience),
    };
    cfg.validate()?;
    Ok(cfg)
}
