//! Payload parameters and the Newton-Euler model of a rigid payload seen
//! from a wrist force/torque sensor.
//!
//! All vectors are expressed in the sensor frame. The center of mass is the
//! offset from the sensor origin to the payload's center of mass and the
//! inertia tensor is taken about the sensor origin. With `h = m·c` the
//! measured wrench is
//!
//! ```text
//! f = m·(a + g) + α × h + ω × (ω × h)
//! τ = I·α + ω × (I·ω) + h × (a + g)
//! ```
//!
//! which is linear in `φ = [m, h, vech(I)]`.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, SymmetricEigen, Vector3, Vector6};
use thiserror::Error;

/// Standard gravity [m/s²].
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Gravity acceleration in the world frame, pointing down along world z.
pub fn gravity_world() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -STANDARD_GRAVITY)
}

/// Symmetric 3×3 inertia tensor, stored as `(xx, xy, xz, yy, yz, zz)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymmetricInertia([f64; 6]);

impl SymmetricInertia {
    pub const fn from_vech(vech: [f64; 6]) -> Self {
        Self(vech)
    }

    pub const fn zero() -> Self {
        Self([0.0; 6])
    }

    pub const fn diagonal(xx: f64, yy: f64, zz: f64) -> Self {
        Self([xx, 0.0, 0.0, yy, 0.0, zz])
    }

    /// Takes the upper triangle of `m`; the lower triangle is ignored.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self([m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]])
    }

    pub fn vech(&self) -> [f64; 6] {
        self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn mul_vec(&self, w: &Vector3<f64>) -> Vector3<f64> {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        Vector3::new(xx * w.x + xy * w.y + xz * w.z, xy * w.x + yy * w.y + yz * w.z, xz * w.x + yz * w.y + zz * w.z)
    }

    /// `R · I · Rᵀ`, symmetrized from the upper triangle.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Self::from_matrix(&(rotation * self.matrix() * rotation.transpose()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Mass, center of mass and inertia tensor of the payload.
///
/// No physical plausibility is enforced here; estimators may return
/// negative masses or indefinite tensors and those are reported as-is
/// (see [`physical_consistency`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertialParams {
    /// [kg]
    pub mass: f64,
    /// Sensor origin to center of mass [m].
    pub com: Vector3<f64>,
    /// About the sensor origin [kg·m²].
    pub inertia: SymmetricInertia,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PhiError {
    #[error("mass {0} is not positive, center of mass is undefined")]
    NonPositiveMass(f64),
}

impl InertialParams {
    pub fn new(mass: f64, com: Vector3<f64>, inertia: SymmetricInertia) -> Self {
        Self { mass, com, inertia }
    }

    /// Builds parameters from an inertia tensor given about the center of
    /// mass, shifting it to the sensor origin with the parallel axis theorem.
    pub fn from_com_inertia(mass: f64, com: Vector3<f64>, inertia_at_com: &Matrix3<f64>) -> Self {
        let shift = mass * (com.norm_squared() * Matrix3::identity() - com * com.transpose());
        Self::new(mass, com, SymmetricInertia::from_matrix(&(inertia_at_com + shift)))
    }

    pub fn to_phi(&self) -> PhiVector {
        let h = self.com * self.mass;
        let [xx, xy, xz, yy, yz, zz] = self.inertia.vech();
        PhiVector(SVector::<f64, 10>::from_column_slice(&[self.mass, h.x, h.y, h.z, xx, xy, xz, yy, yz, zz]))
    }

    pub fn from_phi(phi: &PhiVector) -> Result<Self, PhiError> {
        let mass = phi.mass();
        if !(mass > 0.0) {
            return Err(PhiError::NonPositiveMass(mass));
        }
        Ok(Self::new(mass, phi.first_moment() / mass, phi.inertia()))
    }

    /// Expresses the parameters in a frame rotated by `rotation`.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Self::new(self.mass, rotation * self.com, self.inertia.rotated(rotation))
    }

    pub fn is_finite(&self) -> bool {
        self.mass.is_finite() && self.com.iter().all(|v| v.is_finite()) && self.inertia.is_finite()
    }
}

/// The ten parameters in which the wrench model is linear:
/// `[m, m·cx, m·cy, m·cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiVector(pub SVector<f64, 10>);

impl PhiVector {
    pub const LEN: usize = 10;
    pub const MASS: usize = 0;
    pub const FIRST_MOMENT: std::ops::Range<usize> = 1..4;
    pub const INERTIA: std::ops::Range<usize> = 4..10;

    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    pub fn mass(&self) -> f64 {
        self.0[0]
    }

    /// `m·c`.
    pub fn first_moment(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    pub fn inertia(&self) -> SymmetricInertia {
        let p = &self.0;
        SymmetricInertia::from_vech([p[4], p[5], p[6], p[7], p[8], p[9]])
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Kinematic state of the sensor frame at one instant, all in sensor axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicSample {
    /// [s]
    pub t: f64,
    /// [m/s]
    pub lin_vel: Vector3<f64>,
    /// [rad/s]
    pub ang_vel: Vector3<f64>,
    /// Gravity-free acceleration of the sensor origin [m/s²].
    pub lin_acc: Vector3<f64>,
    /// [rad/s²]
    pub ang_acc: Vector3<f64>,
    /// Gravity rotated into the sensor frame [m/s²].
    pub gravity: Vector3<f64>,
}

impl KinematicSample {
    /// A sensor at rest with the given gravity direction.
    pub fn at_rest(t: f64, gravity: Vector3<f64>) -> Self {
        Self {
            t,
            lin_vel: Vector3::zeros(),
            ang_vel: Vector3::zeros(),
            lin_acc: Vector3::zeros(),
            ang_acc: Vector3::zeros(),
            gravity,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && [self.lin_vel, self.ang_vel, self.lin_acc, self.ang_acc, self.gravity]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Rotates every vector quantity by `rotation`.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        Self {
            t: self.t,
            lin_vel: rotation * self.lin_vel,
            ang_vel: rotation * self.ang_vel,
            lin_acc: rotation * self.lin_acc,
            ang_acc: rotation * self.ang_acc,
            gravity: rotation * self.gravity,
        }
    }
}

/// Force [N] and torque [N·m] measured in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    /// `[fx, fy, fz, τx, τy, τz]`
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.force.x, self.force.y, self.force.z, self.torque.x, self.torque.y, self.torque.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }
}

/// Wrench exerted by a payload with parameters `params` moving with `kin`.
pub fn newton_euler_wrench(params: &InertialParams, kin: &KinematicSample) -> Wrench {
    newton_euler_wrench_phi(&params.to_phi(), kin)
}

/// Same model evaluated directly in the linear parameters, so it stays
/// defined for zero or negative mass.
pub fn newton_euler_wrench_phi(phi: &PhiVector, kin: &KinematicSample) -> Wrench {
    let m = phi.mass();
    let h = phi.first_moment();
    let inertia = phi.inertia();
    let w = &kin.ang_vel;
    let dw = &kin.ang_acc;
    let acc = kin.lin_acc + kin.gravity;

    let force = acc * m + dw.cross(&h) + w.cross(&w.cross(&h));
    let torque = inertia.mul_vec(dw) + w.cross(&inertia.mul_vec(w)) + h.cross(&acc);
    Wrench::new(force, torque)
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `L(w)` with `I·w = L(w)·vech(I)`.
fn vech_operator(w: &Vector3<f64>) -> SMatrix<f64, 3, 6> {
    SMatrix::<f64, 3, 6>::new(
        w.x, w.y, w.z, 0.0, 0.0, 0.0, //
        0.0, w.x, 0.0, w.y, w.z, 0.0, //
        0.0, 0.0, w.x, 0.0, w.y, w.z,
    )
}

/// 6×10 regressor with `regressor_block(kin) · φ = [f; τ]`.
pub fn regressor_block(kin: &KinematicSample) -> SMatrix<f64, 6, 10> {
    let w_skew = skew(&kin.ang_vel);
    let acc = kin.lin_acc + kin.gravity;
    let mut block = SMatrix::<f64, 6, 10>::zeros();

    block.fixed_view_mut::<3, 1>(0, 0).copy_from(&acc);
    block.fixed_view_mut::<3, 3>(0, 1).copy_from(&(skew(&kin.ang_acc) + w_skew * w_skew));

    block.fixed_view_mut::<3, 3>(3, 1).copy_from(&(-skew(&acc)));
    block.fixed_view_mut::<3, 6>(3, 4).copy_from(&(vech_operator(&kin.ang_acc) + w_skew * vech_operator(&kin.ang_vel)));
    block
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("recording contains no samples")]
    EmptyRecording,
    #[error("timestamp of sample {index} does not increase")]
    NonMonotonicTime { index: usize },
    #[error("sample {index} contains a non-finite value")]
    NonFiniteValue { index: usize },
}

/// Stacked regressor `A` (6N×10) and wrench vector `b` (6N).
///
/// Each sample contributes three force rows followed by three torque rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    sample_count: usize,
}

impl RegressorSystem {
    pub const ROWS_PER_SAMPLE: usize = 6;

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }
}

/// Stacks per-sample regressor blocks and measured wrenches.
pub fn build_system(samples: &[(KinematicSample, Wrench)]) -> Result<RegressorSystem, SystemError> {
    if samples.is_empty() {
        return Err(SystemError::EmptyRecording);
    }
    let n = samples.len();
    let mut a = DMatrix::zeros(6 * n, PhiVector::LEN);
    let mut b = DVector::zeros(6 * n);
    let mut previous_t = f64::NEG_INFINITY;
    for (index, (kin, wrench)) in samples.iter().enumerate() {
        if !kin.is_finite() || !wrench.is_finite() {
            return Err(SystemError::NonFiniteValue { index });
        }
        if kin.t <= previous_t {
            return Err(SystemError::NonMonotonicTime { index });
        }
        previous_t = kin.t;
        a.fixed_view_mut::<6, 10>(6 * index, 0).copy_from(&regressor_block(kin));
        b.fixed_rows_mut::<6>(6 * index).copy_from(&wrench.to_vector());
    }
    Ok(RegressorSystem { a, b, sample_count: n })
}

/// Plausibility checks on a parameter set. Diagnostic only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub mass_positive: bool,
    pub inertia_psd: bool,
    pub triangle_inequality: bool,
    /// Eigenvalues of the inertia tensor, ascending.
    pub principal_moments: [f64; 3],
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.mass_positive && self.inertia_psd && self.triangle_inequality
    }
}

pub fn physical_consistency(params: &InertialParams) -> ConsistencyReport {
    let mut moments = [f64::NAN; 3];
    let (psd, triangle) = if params.inertia.is_finite() {
        let eig = SymmetricEigen::new(params.inertia.matrix());
        moments.copy_from_slice(eig.eigenvalues.as_slice());
        moments.sort_by(f64::total_cmp);
        let tol = 1e-12 * moments.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        (moments[0] >= -tol, moments[0] + moments[1] >= moments[2] - tol)
    } else {
        (false, false)
    };
    ConsistencyReport {
        mass_positive: params.mass > 0.0,
        inertia_psd: psd,
        triangle_inequality: triangle,
        principal_moments: moments,
    }
}
