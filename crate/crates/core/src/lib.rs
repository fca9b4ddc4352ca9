//! Simulation and computational design of magnetic soft catheters.
//!
//! The crate couples an explicit material point method for hard-magnetic
//! elastomers ([`mpm`]) with a derivative-free search over per-segment
//! magnetization directions and applied fields ([`design`]), scored by
//! centerline RMS error against target shapes ([`shape`]).
//!
//! Geometry and simulation types are generic over [`num::Real`]; the aliases
//! below fix the scalar to `f64`, which is what the optimizer and the CLI use.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod catheter;
pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod linalg;
pub mod mpm;
pub mod num;
pub mod oracles;
pub mod polyline;
pub mod shape;

pub use error::{Error, Result};
pub use num::Real;

pub type Vec3 = linalg::Vector3<f64>;
pub type Mat3 = linalg::Matrix3<f64>;
pub type Pose = linalg::RigidTransform<f64>;
pub type Polyline = polyline::Polyline3<f64>;
pub type Catheter = catheter::CatheterSpec<f64>;
pub type Profile = catheter::MagnetizationProfile<f64>;
pub type Field = catheter::AppliedField<f64>;
pub type Cloud = catheter::ParticleCloud<f64>;
pub type Cloud32 = catheter::ParticleCloud<f32>;
pub type Config = mpm::SimConfig<f64>;
pub type Equilibrium = mpm::EquilibriumState<f64>;
