//! Design vectors: per-segment magnetization angles plus optional fields.

use serde::{Deserialize, Serialize};

use crate::catheter::{AppliedField, MagnetizationProfile};
use crate::error::{Error, Result};
use crate::linalg::Vector3;

/// How magnetization directions are parameterized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleMode {
    /// Free spherical angles (θ, φ) per segment.
    Sphere,
    /// Directions confined to the body-frame plane of azimuth `phi_rad`;
    /// only θ is searched.
    Plane { phi_rad: f64 },
}

/// Which applied fields are searched.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldMode {
    /// Fields given, one per stage, Tesla. Not optimized.
    Fixed(Vec<Vector3<f64>>),
    /// One free field per stage.
    PerStage { stages: usize },
    /// One free field applied at every stage.
    Shared { stages: usize },
}

impl FieldMode {
    pub fn stages(&self) -> usize {
        match self {
            FieldMode::Fixed(f) => f.len(),
            FieldMode::PerStage { stages } | FieldMode::Shared { stages } => *stages,
        }
    }

    fn free_blocks(&self) -> usize {
        match self {
            FieldMode::Fixed(_) => 0,
            FieldMode::PerStage { stages } => *stages,
            FieldMode::Shared { .. } => 1,
        }
    }
}

/// Layout of the flat search vector.
///
/// Coordinates are the angles in radians (two per segment, or one in planar
/// mode) followed by the free field components divided by `b_max_tesla`, so
/// that every block is of order one.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpace {
    pub segments: usize,
    pub angles: AngleMode,
    pub fields: FieldMode,
    pub b_max_tesla: f64,
}

impl DesignSpace {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::config("design needs at least one segment"));
        }
        if self.fields.stages() == 0 {
            return Err(Error::config("design needs at least one stage"));
        }
        if self.fields.free_blocks() > 0 && !(self.b_max_tesla > 0.0) {
            return Err(Error::config("free fields need a positive field bound"));
        }
        if let FieldMode::Fixed(f) = &self.fields {
            if f.iter().any(|b| !b.is_finite()) {
                return Err(Error::config("fixed fields must be finite"));
            }
        }
        Ok(())
    }

    fn angles_per_segment(&self) -> usize {
        match self.angles {
            AngleMode::Sphere => 2,
            AngleMode::Plane { .. } => 1,
        }
    }

    pub fn angle_dims(&self) -> usize {
        self.segments * self.angles_per_segment()
    }

    pub fn dimension(&self) -> usize {
        self.angle_dims() + 3 * self.fields.free_blocks()
    }

    /// Maps a search vector to a design, projecting every free field onto
    /// the ball of radius `b_max_tesla`.
    pub fn decode(&self, x: &[f64]) -> DesignVector {
        debug_assert_eq!(x.len(), self.dimension());
        let angles = (0..self.segments)
            .map(|i| match self.angles {
                AngleMode::Sphere => (x[2 * i], x[2 * i + 1]),
                AngleMode::Plane { phi_rad } => (x[i], phi_rad),
            })
            .collect();
        let offset = self.angle_dims();
        let block = |k: usize| {
            let b = Vector3::new(x[offset + 3 * k], x[offset + 3 * k + 1], x[offset + 3 * k + 2])
                * self.b_max_tesla;
            project(b, self.b_max_tesla)
        };
        let fields_tesla = match &self.fields {
            FieldMode::Fixed(f) => f.clone(),
            FieldMode::PerStage { stages } => (0..*stages).map(block).collect(),
            FieldMode::Shared { stages } => vec![block(0); *stages],
        };
        DesignVector {
            angles,
            fields_tesla,
        }
    }

    /// Projects the free field blocks of `x` onto the feasible ball in place.
    pub fn repair(&self, x: &mut [f64]) {
        let offset = self.angle_dims();
        for k in 0..self.fields.free_blocks() {
            let s = &mut x[offset + 3 * k..offset + 3 * k + 3];
            let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
            if n > 1.0 {
                s.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    /// Encodes a design, the inverse of [`decode`](Self::decode) for
    /// feasible fields.
    pub fn encode(&self, design: &DesignVector) -> Result<Vec<f64>> {
        if design.angles.len() != self.segments {
            return Err(Error::config(format!(
                "design has {} segments, expected {}",
                design.angles.len(),
                self.segments
            )));
        }
        let mut x = Vec::with_capacity(self.dimension());
        for &(t, p) in &design.angles {
            x.push(t);
            if let AngleMode::Sphere = self.angles {
                x.push(p);
            }
        }
        let blocks = self.fields.free_blocks();
        if blocks > 0 {
            if design.fields_tesla.len() < blocks {
                return Err(Error::config("design carries too few fields"));
            }
            for b in &design.fields_tesla[..blocks] {
                x.extend_from_slice(&(*b * (1.0 / self.b_max_tesla)).to_array());
            }
        }
        Ok(x)
    }

    /// Sample scale per coordinate: `angle_scale` radians for angles and
    /// `field_scale` (a fraction of the bound) for fields.
    pub fn coordinate_scales(&self, angle_scale: f64, field_scale: f64) -> Vec<f64> {
        let mut s = vec![angle_scale; self.angle_dims()];
        s.resize(self.dimension(), field_scale);
        s
    }
}

fn project(b: Vector3<f64>, max_norm: f64) -> Vector3<f64> {
    AppliedField::projected(b, max_norm).b_tesla
}

/// Unit direction of spherical angles `(θ, φ)`.
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Decoded design: per-segment angles and one field per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignVector {
    pub angles: Vec<(f64, f64)>,
    pub fields_tesla: Vec<Vector3<f64>>,
}

impl DesignVector {
    pub fn profile(&self) -> Result<MagnetizationProfile<f64>> {
        MagnetizationProfile::new(self.angles.iter().map(|&(t, p)| direction(t, p)).collect())
    }

    pub fn applied_fields(&self, max_norm: Option<f64>) -> Vec<AppliedField<f64>> {
        self.fields_tesla
            .iter()
            .map(|b| AppliedField {
                b_tesla: *b,
                max_norm_tesla: max_norm,
            })
            .collect()
    }

    /// Decodes into the simulator's inputs.
    pub fn decode(&self, max_norm: Option<f64>) -> Result<(MagnetizationProfile<f64>, Vec<AppliedField<f64>>)> {
        Ok((self.profile()?, self.applied_fields(max_norm)))
    }

    pub fn to_record(&self) -> DesignRecord {
        DesignRecord {
            angles: self.angles.iter().map(|&(t, p)| [t, p]).collect(),
            fields_mt: self
                .fields_tesla
                .iter()
                .map(|b| (*b * 1e3).to_array())
                .collect(),
        }
    }

    pub fn from_record(r: &DesignRecord) -> Self {
        Self {
            angles: r.angles.iter().map(|a| (a[0], a[1])).collect(),
            fields_tesla: r
                .fields_mt
                .iter()
                .map(|b| Vector3::new(b[0], b[1], b[2]) * 1e-3)
                .collect(),
        }
    }
}

/// Serialized design: angles in radians, fields in mT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub angles: Vec<[f64; 2]>,
    #[serde(rename = "fields_mT")]
    pub fields_mt: Vec<[f64; 3]>,
}
