//! Uniform background grid.

use crate::catheter::Particle;
use crate::error::{Error, Result};
use crate::linalg::Vector3;
use crate::num::Real;

/// Cells of empty space kept between the particle bounding box and the grid
/// boundary.
pub const GRID_MARGIN_CELLS: i64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NodeFlag {
    #[default]
    Free,
    Clamped,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GridNode<T> {
    pub mass: T,
    pub momentum: Vector3<T>,
    pub velocity: Vector3<T>,
}

/// Axis-aligned node lattice. Node `(i, j, k)` sits at
/// `origin + h (i, j, k)`; the origin is always an integer multiple of `h`
/// so that successive grids built around moving particles share nodes.
///
/// Storage is dense over the bounding box, but the nodes that received mass
/// and the clamped nodes are recorded, so clearing and updating cost scales
/// with the particles rather than with the box volume.
#[derive(Clone, Debug)]
pub struct BackgroundGrid<T> {
    pub spacing: T,
    pub origin: Vector3<T>,
    pub origin_index: [i64; 3],
    pub dims: [usize; 3],
    pub nodes: Vec<GridNode<T>>,
    pub flags: Vec<NodeFlag>,
    pub(crate) active: Vec<usize>,
    clamped: Vec<usize>,
}

impl<T: Real> BackgroundGrid<T> {
    /// Empty grid spanning lattice indices `lo..=hi`.
    pub fn new(spacing: T, lo: [i64; 3], hi: [i64; 3]) -> Self {
        let mut g = Self {
            spacing,
            origin: Vector3::zeros(),
            origin_index: [0; 3],
            dims: [0; 3],
            nodes: Vec::new(),
            flags: Vec::new(),
            active: Vec::new(),
            clamped: Vec::new(),
        };
        g.reshape(lo, hi);
        g
    }

    /// Zeroes the recorded nodes and flags, then re-indexes. Every other
    /// node is already zero, so the dense arrays stay clean without a sweep.
    fn reshape(&mut self, lo: [i64; 3], hi: [i64; 3]) {
        for &i in &self.active {
            self.nodes[i] = GridNode::default();
        }
        for &i in &self.clamped {
            self.flags[i] = NodeFlag::Free;
        }
        self.active.clear();
        self.clamped.clear();
        let dims = [
            (hi[0] - lo[0] + 1).max(1) as usize,
            (hi[1] - lo[1] + 1).max(1) as usize,
            (hi[2] - lo[2] + 1).max(1) as usize,
        ];
        self.origin_index = lo;
        self.origin = Vector3::new(
            T::lit(lo[0] as f64) * self.spacing,
            T::lit(lo[1] as f64) * self.spacing,
            T::lit(lo[2] as f64) * self.spacing,
        );
        self.dims = dims;
        let n = dims[0] * dims[1] * dims[2];
        self.nodes.resize(n, GridNode::default());
        self.flags.resize(n, NodeFlag::Free);
    }

    /// Grid covering every particle with a [`GRID_MARGIN_CELLS`] margin.
    pub fn covering(particles: &[Particle<T>], spacing: T) -> Result<Self> {
        let mut g = Self::new(spacing, [0; 3], [0; 3]);
        g.refit(particles)?;
        Ok(g)
    }

    /// Re-sizes around `particles` and clears the nodes written by
    /// [`p2g`](super::p2g) and the flags set by the clamp methods, reusing the
    /// allocation. Nodes written directly are not tracked; use a new grid
    /// for those.
    pub fn refit(&mut self, particles: &[Particle<T>]) -> Result<()> {
        let (lo, hi) = lattice_bounds(particles, self.spacing)?;
        self.reshape(lo, hi);
        Ok(())
    }

    #[inline(always)]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline(always)]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vector3<T> {
        self.origin
            + Vector3::new(
                T::from_usize_lossy(i),
                T::from_usize_lossy(j),
                T::from_usize_lossy(k),
            ) * self.spacing
    }

    /// Grid-local coordinates in cell units.
    #[inline(always)]
    pub fn to_local(&self, x: Vector3<T>) -> Vector3<T> {
        (x - self.origin) * self.spacing.recip()
    }

    /// Marks nodes for which `pred(position)` holds as clamped.
    pub fn clamp_where(&mut self, pred: impl Fn(Vector3<T>) -> bool) {
        let [nx, ny, nz] = self.dims;
        self.clamp_range([0, 0, 0], [nx, ny, nz], pred);
    }

    /// As [`clamp_where`](Self::clamp_where), visiting only nodes inside the
    /// axis-aligned box `lo..=hi` (rounded outward to whole cells).
    pub fn clamp_within(&mut self, lo: Vector3<T>, hi: Vector3<T>, pred: impl Fn(Vector3<T>) -> bool) {
        let a = self.to_local(lo);
        let b = self.to_local(hi);
        let mut start = [0usize; 3];
        let mut end = [0usize; 3];
        for ax in 0..3 {
            let first = a[ax].floor().to_i64().unwrap_or(0).max(0);
            let last = b[ax].ceil().to_i64().unwrap_or(-1).min(self.dims[ax] as i64 - 1);
            start[ax] = first as usize;
            end[ax] = (last + 1).max(first) as usize;
        }
        self.clamp_range(start, end, pred);
    }

    fn clamp_range(&mut self, start: [usize; 3], end: [usize; 3], pred: impl Fn(Vector3<T>) -> bool) {
        for i in start[0]..end[0] {
            for j in start[1]..end[1] {
                for k in start[2]..end[2] {
                    if pred(self.node_position(i, j, k)) {
                        let idx = self.linear_index(i, j, k);
                        if self.flags[idx] == NodeFlag::Free {
                            self.flags[idx] = NodeFlag::Clamped;
                            self.clamped.push(idx);
                        }
                    }
                }
            }
        }
    }

    /// Nodes that received mass since the last refit, in first-touch order.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub(crate) fn mark_active(&mut self, idx: usize) {
        self.active.push(idx);
    }

    /// Checks that a stencil starting at `base` lies fully inside the grid.
    #[inline(always)]
    pub fn stencil_origin(&self, base: [i64; 3], particle: usize) -> Result<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            if base[a] < 0 || base[a] + 3 > self.dims[a] as i64 {
                return Err(Error::OutOfDomain { particle });
            }
            out[a] = base[a] as usize;
        }
        Ok(out)
    }

    pub fn total_mass(&self) -> T {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    pub fn total_momentum(&self) -> Vector3<T> {
        let mut m = Vector3::zeros();
        for n in &self.nodes {
            m += n.momentum;
        }
        m
    }
}

fn lattice_bounds<T: Real>(particles: &[Particle<T>], h: T) -> Result<([i64; 3], [i64; 3])> {
    let first = particles
        .first()
        .ok_or_else(|| Error::config("cannot build a grid around zero particles"))?;
    let mut lo = first.x;
    let mut hi = first.x;
    for (idx, p) in particles.iter().enumerate() {
        if !p.x.is_finite() {
            return Err(Error::OutOfDomain { particle: idx });
        }
        lo = lo.component_min(&p.x);
        hi = hi.component_max(&p.x);
    }
    let mut ilo = [0i64; 3];
    let mut ihi = [0i64; 3];
    for a in 0..3 {
        ilo[a] = (lo[a] / h).floor().to_i64().unwrap_or(0) - GRID_MARGIN_CELLS;
        ihi[a] = (hi[a] / h).ceil().to_i64().unwrap_or(0) + GRID_MARGIN_CELLS;
    }
    Ok((ilo, ihi))
}
