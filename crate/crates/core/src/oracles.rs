//! Small independent reference solutions for validating the simulator and
//! the optimizer. Nothing here calls into the MPM engine or the optimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Vector3;
use crate::polyline::Polyline3;

/// Quadrature points per output interval in the beam integration.
const QUADRATURE_REFINEMENT: usize = 200;

/// Small-deflection cantilever along +z, clamped at the origin, loaded by a
/// uniform distributed couple `couple_density` (N·m/m) that bends it toward
/// +x. Returns `samples` points of the deflected centerline.
///
/// The deflection comes from integrating `E I w'' = M(x)` twice by the
/// trapezoid rule, where the bending moment `M(x) = c (L − x)` is itself the
/// integral of the couple over the free part of the beam.
pub fn beam_cantilever_deflection(
    length_m: f64,
    youngs_modulus_pa: f64,
    area_moment_m4: f64,
    couple_density: f64,
    samples: usize,
) -> Result<Polyline3<f64>> {
    let w = beam_deflection_profile(
        length_m,
        youngs_modulus_pa,
        area_moment_m4,
        couple_density,
        samples,
    )?;
    let dx = length_m / (samples - 1) as f64;
    let points = w
        .iter()
        .enumerate()
        .map(|(i, wi)| Vector3::new(*wi, 0.0, i as f64 * dx))
        .collect();
    Polyline3::new(points)
}

/// Deflection `w(x_i)` at `samples` equally spaced stations, by quadrature.
pub fn beam_deflection_profile(
    length_m: f64,
    youngs_modulus_pa: f64,
    area_moment_m4: f64,
    couple_density: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    check_beam(length_m, youngs_modulus_pa, area_moment_m4, samples)?;
    let ei = youngs_modulus_pa * area_moment_m4;
    let n = (samples - 1) * QUADRATURE_REFINEMENT;
    let h = length_m / n as f64;
    let moment = |x: f64| couple_density * (length_m - x);

    let mut out = Vec::with_capacity(samples);
    out.push(0.0);
    let (mut slope, mut w) = (0.0, 0.0);
    for i in 0..n {
        let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
        let next_slope = slope + 0.5 * h * (moment(x0) + moment(x1)) / ei;
        w += 0.5 * h * (slope + next_slope);
        slope = next_slope;
        if (i + 1) % QUADRATURE_REFINEMENT == 0 {
            out.push(w);
        }
    }
    Ok(out)
}

/// The same cantilever solved as the fourth-order boundary value problem
/// `E I w'''' = 0` with `w(0) = w'(0) = 0`, `w''(L) = 0` and
/// `E I w'''(L) = −c`, by central finite differences with ghost nodes.
pub fn beam_deflection_fd(
    length_m: f64,
    youngs_modulus_pa: f64,
    area_moment_m4: f64,
    couple_density: f64,
    intervals: usize,
) -> Result<Vec<f64>> {
    check_beam(length_m, youngs_modulus_pa, area_moment_m4, intervals + 1)?;
    if intervals < 4 {
        return Err(Error::config("finite-difference beam needs at least 4 intervals"));
    }
    let ei = youngs_modulus_pa * area_moment_m4;
    let n = intervals;
    let h = length_m / n as f64;
    // Unknowns: w_{-1}, w_0..w_n, w_{n+1}, w_{n+2}, stored at offset +1.
    let size = n + 4;
    let col = |i: i64| (i + 1) as usize;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DVector::<f64>::zeros(size);
    let mut row = 0;
    // w(0) = 0
    a[(row, col(0))] = 1.0;
    row += 1;
    // w'(0) = 0
    a[(row, col(1))] = 1.0;
    a[(row, col(-1))] = -1.0;
    row += 1;
    // Interior stencil w'''' = 0 at nodes 1..=n.
    for i in 1..=n as i64 {
        for (off, coef) in [(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)] {
            let j = i + off;
            if j >= -1 {
                a[(row, col(j))] += coef;
            }
        }
        row += 1;
    }
    let last = n as i64;
    // w''(L) = 0
    a[(row, col(last + 1))] = 1.0;
    a[(row, col(last))] = -2.0;
    a[(row, col(last - 1))] = 1.0;
    row += 1;
    // w'''(L) = −c / EI
    let h3 = h * h * h;
    a[(row, col(last + 2))] = 0.5 / h3;
    a[(row, col(last + 1))] = -1.0 / h3;
    a[(row, col(last - 1))] = 1.0 / h3;
    a[(row, col(last - 2))] = -0.5 / h3;
    b[row] = -couple_density / ei;
    row += 1;
    debug_assert_eq!(row, size);

    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("singular finite-difference system".into()))?;
    Ok((0..=n as i64).map(|i| sol[col(i)]).collect())
}

fn check_beam(length_m: f64, e: f64, i: f64, samples: usize) -> Result<()> {
    if !(e * i > 0.0) || !(e * i).is_finite() {
        return Err(Error::config(format!("beam stiffness E·I must be positive, got {}", e * i)));
    }
    if !(length_m > 0.0) {
        return Err(Error::config("beam length must be positive"));
    }
    if samples < 2 {
        return Err(Error::config("beam needs at least 2 samples"));
    }
    Ok(())
}

/// Magnetic couple per unit length on a uniformly magnetized rod,
/// `A |M_r × B|`.
pub fn magnetic_couple_density(
    cross_section_area_m2: f64,
    magnetization: Vector3<f64>,
    field_tesla: Vector3<f64>,
) -> f64 {
    cross_section_area_m2 * magnetization.cross(&field_tesla).norm()
}

/// Search grid for [`brute_force_angle_search`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleGrid {
    /// θ over [0°, 180°] and φ over [0°, 360°); the poles are visited once.
    Sphere,
    /// Directions in the plane of azimuth `phi_rad`: θ sweeps [0°, 360°).
    Plane { phi_rad: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleSearchResult {
    pub theta_rad: f64,
    pub phi_rad: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Exhaustive search of a one-segment design over an angle grid of
/// `grid_deg` spacing. `objective(θ, φ)` takes radians. Ties keep the first
/// candidate in visiting order (θ outer, φ inner, both ascending).
pub fn brute_force_angle_search(
    grid: AngleGrid,
    grid_deg: f64,
    mut objective: impl FnMut(f64, f64) -> f64,
) -> Result<AngleSearchResult> {
    if !(grid_deg > 0.0 && grid_deg <= 180.0) {
        return Err(Error::config(format!("grid step must lie in (0, 180] degrees, got {grid_deg}")));
    }
    let mut best = AngleSearchResult {
        theta_rad: 0.0,
        phi_rad: 0.0,
        error: f64::INFINITY,
        evaluations: 0,
    };
    let mut visit = |theta_deg: f64, phi_deg: f64, best: &mut AngleSearchResult| {
        let (t, p) = (theta_deg.to_radians(), phi_deg.to_radians());
        let e = objective(t, p);
        best.evaluations += 1;
        if e < best.error {
            best.theta_rad = t;
            best.phi_rad = p;
            best.error = e;
        }
    };
    // Integer step counts keep coarse grids exact subsets of fine ones.
    match grid {
        AngleGrid::Sphere => {
            let nt = (180.0 / grid_deg).floor() as usize;
            let np = (360.0 / grid_deg).ceil() as usize;
            for it in 0..=nt {
                let theta = it as f64 * grid_deg;
                let pole = it == 0 || theta >= 180.0;
                for ip in 0..if pole { 1 } else { np } {
                    visit(theta, ip as f64 * grid_deg, &mut best);
                }
            }
        }
        AngleGrid::Plane { phi_rad } => {
            let nt = (360.0 / grid_deg).ceil() as usize;
            for it in 0..nt {
                visit(it as f64 * grid_deg, phi_rad.to_degrees(), &mut best);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: f64 = 0.04;
    const D: f64 = 0.004;

    fn beam_constants() -> (f64, f64, f64) {
        let (mu, nu) = (100e3, 0.45);
        let e = 2.0 * mu * (1.0 + nu);
        let i = std::f64::consts::PI * D.powi(4) / 64.0;
        let area = std::f64::consts::PI * D * D / 4.0;
        let c = magnetic_couple_density(area, Vector3::new(0.0, 0.0, 1e5), Vector3::new(1e-3, 0.0, 0.0));
        (e, i, c)
    }

    #[test]
    fn unloaded_beam_is_straight() {
        let (e, i, _) = beam_constants();
        let line = beam_cantilever_deflection(L, e, i, 0.0, 11).unwrap();
        assert!(line.points().iter().all(|p| p.x == 0.0));
        assert!((line.last().z - L).abs() < 1e-15);
    }

    #[test]
    fn deflection_is_linear_in_the_couple() {
        let (e, i, c) = beam_constants();
        let a = beam_deflection_profile(L, e, i, c, 21).unwrap();
        let b = beam_deflection_profile(L, e, i, 2.0 * c, 21).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn quadrature_and_finite_differences_agree() {
        let (e, i, c) = beam_constants();
        let q = beam_deflection_profile(L, e, i, c, 41).unwrap();
        let fd = beam_deflection_fd(L, e, i, c, 40).unwrap();
        let tip = q[40];
        assert!(tip > 0.0);
        assert!((tip - fd[40]).abs() <= 1e-3 * tip, "{tip} vs {}", fd[40]);
        for (a, b) in q.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-3 * tip);
        }
        // Closed form c L³ / (3 E I) ≈ 7.356 mm at 1 mT.
        assert!((tip - c * L.powi(3) / (3.0 * e * i)).abs() <= 1e-6 * tip);
        assert!((tip * 1e3 - 7.356).abs() < 1e-3);
    }

    #[test]
    fn non_positive_stiffness_is_rejected() {
        assert!(beam_cantilever_deflection(L, 0.0, 1e-12, 1.0, 5).is_err());
        assert!(beam_deflection_fd(L, 1e5, -1.0, 1.0, 10).is_err());
    }

    #[test]
    fn sphere_search_finds_the_generating_direction() {
        let target = (37f64.to_radians(), 250f64.to_radians());
        let dir = |t: f64, p: f64| Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
        let goal = dir(target.0, target.1);
        let r = brute_force_angle_search(AngleGrid::Sphere, 1.0, |t, p| (dir(t, p) - goal).norm())
            .unwrap();
        assert!((r.theta_rad - target.0).abs() < 1.01f64.to_radians());
        assert!((r.phi_rad - target.1).abs() < 1.01f64.to_radians());
    }

    #[test]
    fn ties_keep_the_first_candidate() {
        // Every direction with m ∥ z ties; the north pole is visited first.
        let r = brute_force_angle_search(AngleGrid::Sphere, 10.0, |t, _| t.sin().abs().round())
            .unwrap();
        assert_eq!((r.theta_rad, r.phi_rad), (0.0, 0.0));
        let flat = brute_force_angle_search(AngleGrid::Plane { phi_rad: 0.0 }, 10.0, |_, _| 1.0)
            .unwrap();
        assert_eq!(flat.theta_rad, 0.0);
        assert_eq!(flat.evaluations, 36);
    }

    #[test]
    fn refining_the_grid_never_worsens_the_optimum() {
        let f = |t: f64, p: f64| (t - 0.713).powi(2) + (p - 2.9).cos().abs();
        let coarse = brute_force_angle_search(AngleGrid::Sphere, 10.0, f).unwrap();
        let fine = brute_force_angle_search(AngleGrid::Sphere, 2.0, f).unwrap();
        assert!(fine.error <= coarse.error);
        let fp = |t: f64, _| (t - 4.0).abs();
        let coarse = brute_force_angle_search(AngleGrid::Plane { phi_rad: 0.3 }, 10.0, fp).unwrap();
        let fine = brute_force_angle_search(AngleGrid::Plane { phi_rad: 0.3 }, 2.0, fp).unwrap();
        assert!(fine.error <= coarse.error);
    }
}
