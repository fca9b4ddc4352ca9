//! Derivative-free design of magnetization profiles and applied fields.

pub mod cma;
pub mod vector;

use std::io::{BufRead, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector3;
use crate::shape::{Evaluation, ShapeEvaluator};

pub use cma::Cma;
pub use vector::{direction, AngleMode, DesignRecord, DesignSpace, DesignVector, FieldMode};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Candidates per iteration, λ.
    pub population: usize,
    /// Recombined parents, μ; `None` uses λ/2.
    pub parents: Option<usize>,
    /// Initial step size, multiplying the per-block scales below.
    pub sigma0: f64,
    /// Initial spread of the angle coordinates, rad.
    pub angle_scale_rad: f64,
    /// Initial spread of the field coordinates as a fraction of the bound.
    pub field_scale: f64,
    pub max_iterations: usize,
    pub target_error_mm: f64,
    pub seed: u64,
    pub b_max_tesla: f64,
    /// Evaluate the candidates of an iteration concurrently.
    pub parallel: bool,
    /// Consecutive all-penalized iterations tolerated before giving up.
    pub penalty_patience: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population: 12,
            parents: None,
            sigma0: 1.0,
            angle_scale_rad: 0.6,
            field_scale: 0.3,
            max_iterations: 200,
            target_error_mm: 2.0,
            seed: 0,
            b_max_tesla: 0.01,
            parallel: false,
            penalty_patience: 5,
        }
    }
}

impl OptimizerConfig {
    /// Defaults for insertion design: 3 mm target, 300 iterations.
    pub fn insertion() -> Self {
        Self {
            target_error_mm: 3.0,
            max_iterations: 300,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::config("optimizer.population must be at least 4"));
        }
        if let Some(p) = self.parents {
            if p == 0 || p > self.population {
                return Err(Error::config("optimizer.parents must lie in 1..=population"));
            }
        }
        if !(self.target_error_mm > 0.0) {
            return Err(Error::config("optimizer.target_error_mm must be positive"));
        }
        if !(self.sigma0 > 0.0 && self.angle_scale_rad > 0.0 && self.field_scale > 0.0) {
            return Err(Error::config("optimizer step sizes must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("optimizer.max_iterations must be at least 1"));
        }
        if self.penalty_patience == 0 {
            return Err(Error::config("optimizer.penalty_patience must be at least 1"));
        }
        if !(self.b_max_tesla >= 0.0) {
            return Err(Error::config("optimizer.b_max must be non-negative"));
        }
        Ok(())
    }
}

/// One iteration of the search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Best score seen so far.
    pub best_mm: f64,
    /// Mean score of this iteration's candidates.
    pub mean_mm: f64,
    /// Cumulative objective evaluations.
    pub evals: usize,
    /// Best design so far.
    pub design: DesignRecord,
    /// Seconds since the start. Not persisted, so traces stay reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: format!("trace line {}", i + 1),
                message: e.to_string(),
            })?;
            records.push(r);
        }
        Ok(Self { records })
    }

    pub fn best_is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_mm <= w[0].best_mm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    IterationBudget,
}

#[derive(Clone, Debug)]
pub struct Optimization {
    pub best: DesignVector,
    pub best_evaluation: Evaluation<f64>,
    pub trace: OptimizationTrace,
    pub termination: Termination,
    pub space: DesignSpace,
}

impl Optimization {
    pub fn iterations(&self) -> usize {
        self.trace.records.len()
    }
}

/// Minimizes `objective` over designs in `layout` (its field bound is taken
/// from `config`).
///
/// Each iteration samples `population` candidates, projects their fields into
/// the feasible ball, scores them and updates the search distribution. The
/// best candidate ever seen is kept and reported.
pub fn optimize<F>(layout: &DesignSpace, objective: F, config: &OptimizerConfig) -> Result<Optimization>
where
    F: Fn(&DesignVector) -> Result<Evaluation<f64>> + Sync,
{
    config.validate()?;
    let space = DesignSpace {
        b_max_tesla: config.b_max_tesla,
        ..layout.clone()
    };
    space.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mean = initial_mean(&space, &mut rng);
    let scales = space.coordinate_scales(config.angle_scale_rad, config.field_scale);
    let mut es = Cma::new(mean, config.sigma0, &scales, config.population, config.parents);

    let mut best: Option<(DesignVector, Evaluation<f64>)> = None;
    let mut trace = OptimizationTrace::default();
    let mut evals = 0usize;
    let mut stalled = 0usize;
    let mut termination = Termination::IterationBudget;

    for iter in 1..=config.max_iterations {
        let mut generation = es.sample(&mut rng);
        for x in &mut generation.candidates {
            space.repair(x);
        }
        let designs: Vec<DesignVector> =
            generation.candidates.iter().map(|x| space.decode(x)).collect();
        let results: Vec<Evaluation<f64>> = if config.parallel {
            designs.par_iter().map(&objective).collect::<Result<_>>()?
        } else {
            designs.iter().map(&objective).collect::<Result<_>>()?
        };
        evals += results.len();
        let scores: Vec<f64> = results.iter().map(|e| e.score_mm).collect();

        for (d, e) in designs.iter().zip(&results) {
            if best.as_ref().is_none_or(|(_, b)| e.score_mm < b.score_mm) {
                best = Some((d.clone(), e.clone()));
            }
        }
        if results.iter().all(|e| e.penalized) {
            stalled += 1;
            if stalled >= config.penalty_patience {
                let why = results[0].diagnostic.clone().unwrap_or_default();
                return Err(Error::Optimizer(format!(
                    "every candidate failed for {stalled} consecutive iterations (last: {why})"
                )));
            }
        } else {
            stalled = 0;
        }

        let (best_design, best_eval) = best.as_ref().expect("population is non-empty");
        trace.records.push(TraceRecord {
            iter,
            best_mm: best_eval.score_mm,
            mean_mm: scores.iter().sum::<f64>() / scores.len() as f64,
            evals,
            design: best_design.to_record(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        if best_eval.score_mm < config.target_error_mm {
            termination = Termination::TargetReached;
            break;
        }
        es.tell(&generation, &scores);
    }

    let (best, best_evaluation) = best.expect("at least one iteration ran");
    Ok(Optimization {
        best,
        best_evaluation,
        trace,
        termination,
        space,
    })
}

/// Seeded start: angles uniform over their full ranges, fields at the centre
/// of the feasible ball. A random field of several mT throws the whole rod
/// far from any target, while zero field starts from the straight rod.
fn initial_mean(space: &DesignSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut x = Vec::with_capacity(space.dimension());
    for _ in 0..space.segments {
        match space.angles {
            AngleMode::Sphere => {
                // Uniform on the sphere: cos θ uniform.
                let u: f64 = rng.gen_range(-1.0..=1.0);
                x.push(u.acos());
                x.push(rng.gen_range(0.0..TAU));
            }
            AngleMode::Plane { .. } => x.push(rng.gen_range(-PI..PI)),
        }
    }
    x.resize(space.dimension(), 0.0);
    x
}

/// Field handling of a static design problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StaticField {
    Fixed(Vector3<f64>),
    Free,
}

fn shape_objective<'a>(
    evaluator: &'a ShapeEvaluator<f64>,
    b_max: Option<f64>,
) -> impl Fn(&DesignVector) -> Result<Evaluation<f64>> + Sync + 'a {
    move |d: &DesignVector| {
        let (profile, fields) = d.decode(b_max)?;
        evaluator.evaluate(&profile, &fields)
    }
}

/// Static design against the evaluator's single target.
pub fn optimize_static(
    evaluator: &ShapeEvaluator<f64>,
    angles: AngleMode,
    field: StaticField,
    config: &OptimizerConfig,
) -> Result<Optimization> {
    if evaluator.stage_count() != 1 {
        return Err(Error::config("static design needs a single-stage evaluator"));
    }
    let (fields, bound) = match field {
        StaticField::Fixed(b) => (FieldMode::Fixed(vec![b]), None),
        StaticField::Free => (FieldMode::PerStage { stages: 1 }, Some(config.b_max_tesla)),
    };
    let layout = DesignSpace {
        segments: evaluator.spec().segment_count,
        angles,
        fields,
        b_max_tesla: config.b_max_tesla,
    };
    optimize(&layout, shape_objective(evaluator, bound), config)
}

/// Insertion design: magnetization plus free fields, one per stage unless
/// `shared_field`.
pub fn optimize_insertion(
    evaluator: &ShapeEvaluator<f64>,
    angles: AngleMode,
    shared_field: bool,
    config: &OptimizerConfig,
) -> Result<Optimization> {
    let stages = evaluator.stage_count();
    let layout = DesignSpace {
        segments: evaluator.spec().segment_count,
        angles,
        fields: if shared_field {
            FieldMode::Shared { stages }
        } else {
            FieldMode::PerStage { stages }
        },
        b_max_tesla: config.b_max_tesla,
    };
    optimize(&layout, shape_objective(evaluator, Some(config.b_max_tesla)), config)
}
