//! World-frame 3D polylines and arc-length resampling.

use crate::error::{Error, Result};
use crate::linalg::{RigidTransform, Vector3};
use crate::num::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline3<T> {
    points: Vec<Vector3<T>>,
}

impl<T: Real> Polyline3<T> {
    /// Builds a polyline of at least two points with no repeated consecutive
    /// vertex.
    pub fn new(points: Vec<Vector3<T>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate(format!(
                "polyline needs at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Degenerate(format!("polyline point {i} is not finite")));
        }
        for (i, w) in points.windows(2).enumerate() {
            if (w[1] - w[0]).norm() == T::zero() {
                return Err(Error::Degenerate(format!(
                    "polyline points {i} and {} coincide",
                    i + 1
                )));
            }
        }
        Ok(Self { points })
    }

    /// Straight segment from `a` to `b`.
    pub fn segment(a: Vector3<T>, b: Vector3<T>) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn points(&self) -> &[Vector3<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vector3<T>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Vector3<T> {
        self.points[0]
    }

    pub fn last(&self) -> Vector3<T> {
        self.points[self.points.len() - 1]
    }

    /// Cumulative arc length at each vertex, starting at zero.
    pub fn cumulative_lengths(&self) -> Vec<T> {
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.points.len());
        out.push(acc);
        for w in self.points.windows(2) {
            acc += (w[1] - w[0]).norm();
            out.push(acc);
        }
        out
    }

    pub fn arc_length(&self) -> T {
        self.points
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }

    /// Point at arc length `s`, clamped to the curve ends.
    pub fn point_at(&self, s: T) -> Vector3<T> {
        let cum = self.cumulative_lengths();
        point_on(&self.points, &cum, s)
    }

    /// `count` points equally spaced in arc length. The end points are copied
    /// exactly.
    pub fn resample(&self, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Degenerate(format!(
                "resample count must be >= 2, got {count}"
            )));
        }
        let cum = self.cumulative_lengths();
        let total = cum[cum.len() - 1];
        if total <= T::zero() {
            return Err(Error::Degenerate("polyline has zero length".into()));
        }
        let last = count - 1;
        let denom = T::from_usize_lossy(last);
        let mut out = Vec::with_capacity(count);
        let mut seg = 0usize;
        for k in 0..count {
            if k == 0 {
                out.push(self.first());
                continue;
            }
            if k == last {
                out.push(self.last());
                continue;
            }
            let s = total * T::from_usize_lossy(k) / denom;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            out.push(lerp_segment(&self.points, &cum, seg, s));
        }
        // Equal spacing guarantees distinct consecutive points.
        Ok(Self { points: out })
    }

    /// The leading part of the curve up to arc length `length`.
    pub fn truncate(&self, length: T) -> Result<Self> {
        let cum = self.cumulative_lengths();
        let total = cum[cum.len() - 1];
        if length <= T::zero() {
            return Err(Error::Degenerate("truncation length must be positive".into()));
        }
        if length >= total {
            return Ok(self.clone());
        }
        let mut pts = vec![self.points[0]];
        for (i, &c) in cum.iter().enumerate().skip(1) {
            if c < length {
                pts.push(self.points[i]);
            } else {
                let end = lerp_segment(&self.points, &cum, i - 1, length);
                if (end - pts[pts.len() - 1]).norm() > T::zero() {
                    pts.push(end);
                }
                break;
            }
        }
        Self::new(pts)
    }

    pub fn transformed(&self, t: &RigidTransform<T>) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply_point(*p)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Polyline3<U> {
        Polyline3 {
            points: self.points.iter().map(|p| p.cast()).collect(),
        }
    }
}

fn lerp_segment<T: Real>(points: &[Vector3<T>], cum: &[T], seg: usize, s: T) -> Vector3<T> {
    let len = cum[seg + 1] - cum[seg];
    let t = ((s - cum[seg]) / len).max(T::zero()).min(T::one());
    points[seg] + (points[seg + 1] - points[seg]) * t
}

fn point_on<T: Real>(points: &[Vector3<T>], cum: &[T], s: T) -> Vector3<T> {
    if s <= T::zero() {
        return points[0];
    }
    let total = cum[cum.len() - 1];
    if s >= total {
        return points[points.len() - 1];
    }
    let seg = match cum.iter().position(|&c| c >= s) {
        Some(i) if i > 0 => i - 1,
        _ => 0,
    };
    lerp_segment(points, cum, seg, s)
}
