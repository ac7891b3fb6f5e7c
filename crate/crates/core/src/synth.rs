//! Synthetic trajectories and ground-truth wrenches.
//!
//! A trajectory is a sum of sinusoids on the sensor position (world frame)
//! and on a rotation vector `r(t)` applied on the right of a base
//! orientation, `R(t) = R_base · Exp(r(t))`. Twists are evaluated in closed
//! form, so the generated kinematics serve as an oracle for the signal
//! pipeline and for the estimators.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{gravity_world, newton_euler_wrench, InertialParams, KinematicSample, Wrench};
use crate::signal::{differentiate_kinematics, inject_noise, NoiseSpec, RawSample, Recording, SavGolSpec, SignalError};

/// Step of the central difference used for angular acceleration [s].
const ANG_ACC_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid trajectory spec: {0}")]
    InvalidSpec(String),
    #[error("sample {index} leaves the workspace at position {position:?}")]
    WorkspaceViolation { index: usize, position: [f64; 3] },
}

/// `amplitude · sin(2π · frequency · t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harmonic {
    pub amplitude: f64,
    /// [Hz]
    pub frequency: f64,
    /// [rad]
    pub phase: f64,
}

impl Harmonic {
    pub const fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self { amplitude, frequency, phase }
    }

    /// Value and first two time derivatives at `t`.
    fn eval(&self, t: f64) -> [f64; 3] {
        let w = TAU * self.frequency;
        let (s, c) = (w * t + self.phase).sin_cos();
        [self.amplitude * s, self.amplitude * w * c, -self.amplitude * w * w * s]
    }
}

fn eval_series(series: &[Vec<Harmonic>; 3], t: f64) -> [Vector3<f64>; 3] {
    let mut out = [Vector3::zeros(); 3];
    for (axis, harmonics) in series.iter().enumerate() {
        for h in harmonics {
            let d = h.eval(t);
            for (o, v) in out.iter_mut().zip(d) {
                o[axis] += v;
            }
        }
    }
    out
}

/// Axis-aligned box the sensor origin must stay in [m].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkspaceBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl WorkspaceBox {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierTrajectorySpec {
    /// [s]
    pub duration: f64,
    /// [Hz]
    pub rate: f64,
    /// Per world axis.
    pub translation: [Vec<Harmonic>; 3],
    /// Per rotation-vector component.
    pub rotation: [Vec<Harmonic>; 3],
    pub base_position: Vector3<f64>,
    pub base_orientation: UnitQuaternion<f64>,
    pub workspace: Option<WorkspaceBox>,
}

impl FourierTrajectorySpec {
    /// A sensor held still at the base pose.
    pub fn stationary(duration: f64, rate: f64, position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            duration,
            rate,
            translation: Default::default(),
            rotation: Default::default(),
            base_position: position,
            base_orientation: orientation,
            workspace: None,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SynthError::InvalidSpec(format!("duration {} must be positive", self.duration)));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(SynthError::InvalidSpec(format!("rate {} must be positive", self.rate)));
        }
        let finite = self
            .translation
            .iter()
            .chain(&self.rotation)
            .flatten()
            .all(|h| h.amplitude.is_finite() && h.frequency.is_finite() && h.phase.is_finite());
        if !finite {
            return Err(SynthError::InvalidSpec("non-finite harmonic".into()));
        }
        if self.sample_count() < 2 {
            return Err(SynthError::InvalidSpec("fewer than two samples".into()));
        }
        Ok(())
    }

    fn orientation(&self, r: &Vector3<f64>) -> UnitQuaternion<f64> {
        self.base_orientation * UnitQuaternion::from_scaled_axis(*r)
    }

    /// Body-frame angular velocity at `t`.
    fn body_rate(&self, t: f64) -> Vector3<f64> {
        let [r, dr, _] = eval_series(&self.rotation, t);
        right_jacobian(&r) * dr
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Right Jacobian of the rotation exponential:
/// `J_r(r) = I − (1 − cos θ)/θ² [r]× + (θ − sin θ)/θ³ [r]×²`.
pub fn right_jacobian(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = r.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        (0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0, 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0)
    } else {
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    let k = skew(r);
    Matrix3::identity() - k * a + k * k * b
}

/// Poses (wrench channels zero) and the matching analytic kinematics.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub recording: Recording,
    pub kinematics: Vec<KinematicSample>,
}

pub fn generate_trajectory(spec: &FourierTrajectorySpec) -> Result<Trajectory, SynthError> {
    spec.validate()?;
    let n = spec.sample_count();
    let g = gravity_world();
    let mut samples = Vec::with_capacity(n);
    let mut kinematics = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / spec.rate;
        let [dp, v_world, a_world] = eval_series(&spec.translation, t);
        let position = spec.base_position + dp;
        if let Some(bounds) = &spec.workspace {
            if !bounds.contains(&position) {
                return Err(SynthError::WorkspaceViolation { index: k, position: position.into() });
            }
        }
        let [r, dr, _] = eval_series(&spec.rotation, t);
        let q = spec.orientation(&r);
        let ang_acc = (spec.body_rate(t + ANG_ACC_STEP) - spec.body_rate(t - ANG_ACC_STEP)) / (2.0 * ANG_ACC_STEP);

        samples.push(RawSample { t, position, orientation: q, wrench: Wrench::default() });
        kinematics.push(KinematicSample {
            t,
            lin_vel: q.inverse_transform_vector(&v_world),
            ang_vel: right_jacobian(&r) * dr,
            lin_acc: q.inverse_transform_vector(&a_world),
            ang_acc,
            gravity: q.inverse_transform_vector(&g),
        });
    }
    let recording = Recording::new(spec.rate, samples).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok(Trajectory { recording, kinematics })
}

/// Wrenches predicted by the Newton-Euler model for every sample.
pub fn synthesize_wrenches(kins: &[KinematicSample], truth: &InertialParams) -> Vec<Wrench> {
    kins.iter().map(|k| newton_euler_wrench(truth, k)).collect()
}

/// Validation data: the recording's wrenches replaced by model wrenches
/// computed from its own differentiated kinematics.
pub fn validation_recording(
    rec: &Recording,
    truth: &InertialParams,
    filter: &SavGolSpec,
) -> Result<Recording, SignalError> {
    let kinematics = differentiate_kinematics(rec, filter)?;
    Ok(rec.with_wrenches(&synthesize_wrenches(&kinematics, truth)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    /// Rich multi-frequency motion, 20 s.
    Predefined,
    /// Mostly translational transfer motion with slow, small rotations, 10 s.
    PickPlaceLike,
    /// Moderate mixed translation and rotation, 10 s.
    FreeMotionLike,
}

impl ScenarioKind {
    pub fn default_duration(&self) -> f64 {
        match self {
            Self::Predefined => 20.0,
            Self::PickPlaceLike | Self::FreeMotionLike => 10.0,
        }
    }

    /// 0.3 kg test payload for the predefined motion, 0.8 kg gripper for
    /// the hand-guiding emulations.
    pub fn default_truth(&self) -> InertialParams {
        match self {
            Self::Predefined => InertialParams::from_com_inertia(
                0.3,
                Vector3::new(0.012, -0.008, 0.045),
                &Matrix3::from_diagonal(&Vector3::new(4.0e-4, 3.5e-4, 2.0e-4)),
            ),
            Self::PickPlaceLike | Self::FreeMotionLike => InertialParams::from_com_inertia(
                0.8,
                Vector3::new(0.002, 0.004, 0.065),
                &Matrix3::from_diagonal(&Vector3::new(2.6e-3, 2.2e-3, 1.3e-3)),
            ),
        }
    }
}

/// Trajectory recipe, payload and sensor noise of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthScenario {
    pub kind: ScenarioKind,
    pub spec: FourierTrajectorySpec,
    pub truth: InertialParams,
    pub noise: NoiseSpec,
    pub seed: u64,
}

const H: fn(f64, f64, f64) -> Harmonic = Harmonic::new;

fn predefined_series() -> ([Vec<Harmonic>; 3], [Vec<Harmonic>; 3]) {
    (
        [
            vec![H(0.08, 0.11, 0.0), H(0.03, 0.37, 1.0), H(0.01, 0.83, 0.4)],
            vec![H(0.07, 0.13, 0.5), H(0.03, 0.29, 2.0), H(0.01, 0.71, 1.3)],
            vec![H(0.05, 0.17, 0.3), H(0.02, 0.41, 1.2), H(0.008, 0.93, 2.6)],
        ],
        [
            vec![H(0.45, 0.09, 0.0), H(0.20, 0.31, 0.7), H(0.06, 0.77, 1.9)],
            vec![H(0.40, 0.12, 1.1), H(0.18, 0.27, 2.2), H(0.05, 0.69, 0.3)],
            vec![H(0.60, 0.07, 0.4), H(0.25, 0.23, 1.7), H(0.08, 0.61, 2.8)],
        ],
    )
}

/// Square-wave-like transfer: first and third harmonic give flattened
/// extremes where the tool dwells.
fn pick_place_series() -> ([Vec<Harmonic>; 3], [Vec<Harmonic>; 3]) {
    let f = 0.2;
    (
        [
            vec![H(0.15, f, 0.0), H(0.15 / 6.0, 3.0 * f, 0.0)],
            vec![H(0.06, f / 2.0, 0.3)],
            vec![H(0.05, 2.0 * f, FRAC_PI_2), H(0.05 / 6.0, 6.0 * f, FRAC_PI_2 * 3.0)],
        ],
        [vec![H(0.04, 0.05, 0.2)], vec![H(0.03, 0.06, 1.4)], vec![H(0.15, 0.04, 0.0)]],
    )
}

fn free_motion_series() -> ([Vec<Harmonic>; 3], [Vec<Harmonic>; 3]) {
    (
        [
            vec![H(0.10, 0.15, 0.0), H(0.03, 0.33, 0.9)],
            vec![H(0.08, 0.12, 1.3), H(0.02, 0.27, 0.2)],
            vec![H(0.06, 0.19, 2.1)],
        ],
        [
            vec![H(0.25, 0.10, 0.5), H(0.08, 0.21, 1.5)],
            vec![H(0.20, 0.13, 2.4)],
            vec![H(0.35, 0.08, 0.9), H(0.10, 0.18, 0.1)],
        ],
    )
}

/// Builds a scenario; the seed shifts every harmonic's phase.
pub fn make_scenario(kind: ScenarioKind, truth: InertialParams, seed: u64) -> GroundTruthScenario {
    let (mut translation, mut rotation) = match kind {
        ScenarioKind::Predefined => predefined_series(),
        ScenarioKind::PickPlaceLike => pick_place_series(),
        ScenarioKind::FreeMotionLike => free_motion_series(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for h in translation.iter_mut().chain(rotation.iter_mut()).flatten() {
        h.phase = (h.phase + rng.random_range(0.0..TAU)) % TAU;
    }
    // Tool pointing down.
    let base_orientation = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI);
    let base_position = Vector3::new(0.45, 0.0, 0.40);
    let half = Vector3::new(0.35, 0.35, 0.30);
    let spec = FourierTrajectorySpec {
        duration: kind.default_duration(),
        rate: 1000.0,
        translation,
        rotation,
        base_position,
        base_orientation,
        workspace: Some(WorkspaceBox { min: base_position - half, max: base_position + half }),
    };
    GroundTruthScenario { kind, spec, truth, noise: NoiseSpec::none(), seed }
}

/// Poses, analytic kinematics, and wrenches of a realized scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedRun {
    /// Poses with measured wrenches (noise applied).
    pub recording: Recording,
    pub kinematics: Vec<KinematicSample>,
    pub clean_wrenches: Vec<Wrench>,
}

impl GroundTruthScenario {
    pub fn with_duration(mut self, duration: f64) -> Self {
        self.spec.duration = duration;
        self
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.spec.rate = rate;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn realize(&self) -> Result<SimulatedRun, SynthError> {
        if !(self.truth.mass > 0.0) {
            return Err(SynthError::InvalidSpec(format!("payload mass {} must be positive", self.truth.mass)));
        }
        let trajectory = generate_trajectory(&self.spec)?;
        let clean_wrenches = synthesize_wrenches(&trajectory.kinematics, &self.truth);
        let recording = inject_noise(&trajectory.recording.with_wrenches(&clean_wrenches), &self.noise, self.seed);
        Ok(SimulatedRun { recording, kinematics: trajectory.kinematics, clean_wrenches })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SymmetricInertia;

    fn spec_with(rotation: [Vec<Harmonic>; 3]) -> FourierTrajectorySpec {
        FourierTrajectorySpec {
            rotation,
            ..FourierTrajectorySpec::stationary(1.0, 1000.0, Vector3::zeros(), UnitQuaternion::identity())
        }
    }

    #[test]
    fn empty_series_is_static() {
        let traj = generate_trajectory(&spec_with(Default::default())).unwrap();
        assert_eq!(traj.kinematics.len(), 1000);
        for k in &traj.kinematics {
            for v in [k.lin_vel, k.ang_vel, k.lin_acc, k.ang_acc] {
                assert_eq!(v, Vector3::zeros());
            }
        }
    }

    #[test]
    fn coaxial_rotation_rate_is_closed_form() {
        let (a, f) = (0.4, 0.3);
        let spec = spec_with([vec![], vec![], vec![Harmonic::new(a, f, 0.0)]]);
        let traj = generate_trajectory(&spec).unwrap();
        for k in &traj.kinematics {
            let expected = a * TAU * f * (TAU * f * k.t).cos();
            assert!((k.ang_vel - Vector3::new(0.0, 0.0, expected)).norm() < 1e-9);
        }
    }

    #[test]
    fn right_jacobian_series_matches_closed_form_near_switch() {
        let r = Vector3::new(0.6e-4, -0.5e-4, 0.5e-4);
        let series = right_jacobian(&r);
        let theta = r.norm();
        let k = skew(&r);
        let closed = Matrix3::identity() - k * ((1.0 - theta.cos()) / (theta * theta))
            + k * k * ((theta - theta.sin()) / theta.powi(3));
        assert!((series - closed).amax() < 1e-8);
    }

    #[test]
    fn body_rate_matches_finite_difference_of_orientation() {
        let spec = spec_with([
            vec![Harmonic::new(0.5, 0.2, 0.1)],
            vec![Harmonic::new(0.3, 0.35, 1.0)],
            vec![Harmonic::new(0.7, 0.15, 2.0)],
        ]);
        let h = 1e-6;
        for t in [0.1, 0.37, 0.81] {
            let q = |t: f64| spec.orientation(&eval_series(&spec.rotation, t)[0]);
            let numeric = (q(t - h).inverse() * q(t + h)).scaled_axis() / (2.0 * h);
            assert!((numeric - spec.body_rate(t)).norm() < 1e-7);
        }
    }

    #[test]
    fn workspace_is_enforced() {
        let mut spec = spec_with(Default::default());
        spec.translation[0] = vec![Harmonic::new(0.5, 1.0, 0.0)];
        spec.workspace = Some(WorkspaceBox { min: Vector3::repeat(-0.2), max: Vector3::repeat(0.2) });
        assert!(matches!(generate_trajectory(&spec), Err(SynthError::WorkspaceViolation { .. })));
    }

    #[test]
    fn scenarios_are_seed_deterministic() {
        for kind in [ScenarioKind::Predefined, ScenarioKind::PickPlaceLike, ScenarioKind::FreeMotionLike] {
            let a = make_scenario(kind, kind.default_truth(), 11);
            assert_eq!(a, make_scenario(kind, kind.default_truth(), 11));
            assert_ne!(a.spec, make_scenario(kind, kind.default_truth(), 12).spec);
        }
        assert_eq!(
            make_scenario(ScenarioKind::Predefined, ScenarioKind::Predefined.default_truth(), 0).spec.sample_count(),
            20000
        );
        assert_eq!(
            make_scenario(ScenarioKind::FreeMotionLike, ScenarioKind::FreeMotionLike.default_truth(), 0)
                .spec
                .sample_count(),
            10000
        );
    }

    #[test]
    fn static_wrench_is_weight() {
        let kins = vec![KinematicSample::at_rest(0.0, Vector3::new(0.0, 3.0, -9.0))];
        let truth = InertialParams::new(1.0, Vector3::zeros(), SymmetricInertia::diagonal(1.0, 2.0, 3.0));
        let w = synthesize_wrenches(&kins, &truth);
        assert_eq!(w[0].force, Vector3::new(0.0, 3.0, -9.0));
        assert_eq!(w[0].torque, Vector3::zeros());
    }
}
