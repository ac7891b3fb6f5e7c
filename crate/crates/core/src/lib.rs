//! Payload inertial parameter (PIP) estimation.
//!
//! Estimates the mass, center of mass and inertia tensor of a tool mounted
//! behind a wrist force/torque sensor from a recording of sensor poses and
//! measured wrenches. The crate is organized bottom-up:
//!
//! - [`model`]: parameter types, the Newton-Euler wrench model and its
//!   linear regressor form.
//! - [`signal`]: pose differentiation, Savitzky-Golay smoothing, trimming
//!   and noise injection.
//! - [`synth`]: Fourier pose trajectories with analytic kinematics, used as
//!   ground-truth scenarios.
//! - [`estimators`]: least squares, total least squares, Levenberg-Marquardt
//!   and brute-force grid search.
//! - [`diagnose`]: relative errors, excitation analysis and comparison tables.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnose;
pub mod estimators;
pub(crate) mod linalg;
pub mod model;
pub mod signal;
pub mod synth;

pub use model::{
    gravity_world, newton_euler_wrench, regressor_block, InertialParams, KinematicSample, PhiVector, RegressorSystem,
    SymmetricInertia, Wrench, STANDARD_GRAVITY,
};
