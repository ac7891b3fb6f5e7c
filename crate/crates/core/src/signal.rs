//! From recorded poses and wrenches to kinematic samples.
//!
//! The pipeline differentiates sensor poses into body-frame twists,
//! smooths the six velocity channels with a Savitzky-Golay filter,
//! differentiates the smoothed velocities into accelerations and attaches
//! gravity in sensor axes.

use nalgebra::{DMatrix, Quaternion, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::model::{gravity_world, KinematicSample, Wrench};

/// Allowed deviation of a sample spacing from `1 / rate` [s].
pub const SPACING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },
    #[error("sample {index} breaks the uniform spacing of 1/rate (spacing {spacing} s)")]
    NonUniformRate { index: usize, spacing: f64 },
    #[error("timestamp of sample {index} does not increase")]
    NonMonotonicTime { index: usize },
    #[error("invalid sampling rate {0}")]
    InvalidRate(f64),
    #[error("window {window} must be odd and larger than the polynomial order {order}")]
    InvalidWindow { window: usize, order: usize },
    #[error("trim fraction {0} outside [0, 0.5)")]
    FractionOutOfRange(f64),
}

/// One recorded sample: world-frame sensor pose plus the measured wrench.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawSample {
    pub t: f64,
    /// World frame [m].
    pub position: Vector3<f64>,
    /// Sensor-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Sensor frame.
    pub wrench: Wrench,
}

impl RawSample {
    /// Normalizes the quaternion `(w, x, y, z)`. Quaternions already unit
    /// to rounding are kept bit-for-bit, so reloading a written recording
    /// does not drift.
    pub fn new(t: f64, position: Vector3<f64>, quaternion: Quaternion<f64>, wrench: Wrench) -> Self {
        let orientation = if (quaternion.norm_squared() - 1.0).abs() <= 8.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(quaternion)
        } else {
            UnitQuaternion::from_quaternion(quaternion)
        };
        Self { t, position, orientation, wrench }
    }
}

/// Uniformly sampled recording. Spacing is validated on construction, so
/// every `Recording` has strictly increasing, uniform timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    rate: f64,
    samples: Vec<RawSample>,
}

impl Recording {
    pub fn new(rate: f64, samples: Vec<RawSample>) -> Result<Self, SignalError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SignalError::InvalidRate(rate));
        }
        let period = 1.0 / rate;
        if let Some(index) = samples.windows(2).position(|p| !(p[1].t > p[0].t)) {
            return Err(SignalError::NonMonotonicTime { index: index + 1 });
        }
        for (index, pair) in samples.windows(2).enumerate() {
            let spacing = pair[1].t - pair[0].t;
            if (spacing - period).abs() > SPACING_TOLERANCE {
                return Err(SignalError::NonUniformRate { index: index + 1, spacing });
            }
        }
        Ok(Self { rate, samples })
    }

    /// Infers the rate from the first and last timestamps.
    pub fn from_timestamps(samples: Vec<RawSample>) -> Result<Self, SignalError> {
        if samples.len() < 2 {
            return Err(SignalError::TooFewSamples { required: 2, actual: samples.len() });
        }
        let span = samples[samples.len() - 1].t - samples[0].t;
        if !(span > 0.0) {
            return Err(SignalError::NonMonotonicTime { index: samples.len() - 1 });
        }
        let rate = (samples.len() - 1) as f64 / span;
        Self::new(rate, samples)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn samples(&self) -> &[RawSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same poses, wrench channels replaced.
    pub fn with_wrenches(&self, wrenches: &[Wrench]) -> Self {
        assert_eq!(wrenches.len(), self.samples.len(), "one wrench per sample");
        let samples = self.samples.iter().zip(wrenches).map(|(s, w)| RawSample { wrench: *w, ..*s }).collect();
        Self { rate: self.rate, samples }
    }

    pub fn wrenches(&self) -> Vec<Wrench> {
        self.samples.iter().map(|s| s.wrench).collect()
    }
}

/// Savitzky-Golay settings for the velocity channels.
///
/// `passes` repeats the filter; zero disables smoothing, values above one
/// give stronger smoothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SavGolSpec {
    pub order: usize,
    pub window: usize,
    pub passes: usize,
}

impl Default for SavGolSpec {
    fn default() -> Self {
        Self { order: 3, window: 11, passes: 1 }
    }
}

impl SavGolSpec {
    pub fn disabled() -> Self {
        Self { passes: 0, ..Self::default() }
    }
}

/// Smoothing weights for every output position inside one window.
struct SavGolWeights {
    window: usize,
    /// Row `p` evaluates the local fit at window position `p`.
    rows: DMatrix<f64>,
}

impl SavGolWeights {
    fn new(order: usize, window: usize) -> Result<Self, SignalError> {
        if window.is_multiple_of(2) || window <= order {
            return Err(SignalError::InvalidWindow { window, order });
        }
        let half = (window / 2) as f64;
        let scale = half.max(1.0);
        let x = |j: usize| (j as f64 - half) / scale;
        let vandermonde = DMatrix::from_fn(window, order + 1, |j, k| x(j).powi(k as i32));
        // (VᵀV)⁻¹Vᵀ, with abscissae scaled to [-1, 1] the Gram matrix is benign.
        let gram = vandermonde.tr_mul(&vandermonde);
        let fit = gram
            .cholesky()
            .expect("Vandermonde with distinct nodes has full column rank")
            .solve(&vandermonde.transpose());
        Ok(Self { window, rows: &vandermonde * fit })
    }

    fn apply(&self, signal: &[f64], out: &mut [f64]) {
        let n = signal.len();
        let w = self.window;
        let half = w / 2;
        let dot = |row: usize, start: usize| -> f64 { (0..w).map(|j| self.rows[(row, j)] * signal[start + j]).sum() };
        for (i, o) in out.iter_mut().enumerate() {
            *o = if i < half {
                dot(i, 0)
            } else if i + half >= n {
                dot(i + w - n, n - w)
            } else {
                dot(half, i - half)
            };
        }
    }
}

/// Least-squares polynomial smoothing. Interior samples use the centered
/// window; the first and last `window / 2` samples evaluate the fit of the
/// first/last full window at their own position.
pub fn sav_gol_filter(signal: &[f64], order: usize, window: usize) -> Result<Vec<f64>, SignalError> {
    let weights = SavGolWeights::new(order, window)?;
    if signal.len() < window {
        return Err(SignalError::TooFewSamples { required: window, actual: signal.len() });
    }
    let mut out = vec![0.0; signal.len()];
    weights.apply(signal, &mut out);
    Ok(out)
}

fn smooth_channel(channel: &mut Vec<f64>, weights: &SavGolWeights, passes: usize) {
    let mut scratch = vec![0.0; channel.len()];
    for _ in 0..passes {
        weights.apply(channel, &mut scratch);
        std::mem::swap(channel, &mut scratch);
    }
}

/// Central difference in the interior, one-sided at both ends.
fn differentiate(values: &[Vector3<f64>], rate: f64) -> Vec<Vector3<f64>> {
    let n = values.len();
    (0..n)
        .map(|k| match k {
            0 => (values[1] - values[0]) * rate,
            k if k == n - 1 => (values[k] - values[k - 1]) * rate,
            k => (values[k + 1] - values[k - 1]) * (rate / 2.0),
        })
        .collect()
}

/// Body-frame angular velocity from consecutive orientations.
fn body_rates(orientations: &[UnitQuaternion<f64>], rate: f64) -> Vec<Vector3<f64>> {
    let n = orientations.len();
    let log = |a: usize, b: usize| (orientations[a].inverse() * orientations[b]).scaled_axis();
    (0..n)
        .map(|k| match k {
            0 => log(0, 1) * rate,
            k if k == n - 1 => log(k - 1, k) * rate,
            k => log(k - 1, k + 1) * (rate / 2.0),
        })
        .collect()
}

fn split_channels(values: &[Vector3<f64>]) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|axis| values.iter().map(|v| v[axis]).collect())
}

fn join_channels(channels: &[Vec<f64>; 3]) -> Vec<Vector3<f64>> {
    (0..channels[0].len()).map(|k| Vector3::new(channels[0][k], channels[1][k], channels[2][k])).collect()
}

/// Kinematic samples for every recorded pose.
///
/// Linear velocity is the central difference of the world position rotated
/// into the sensor frame; angular velocity is the body rate from the
/// quaternion logarithm. After smoothing, accelerations are central
/// differences of the smoothed velocities; the linear one gets the
/// transport term `ω × v` so that it equals `Rᵀ·p̈`.
pub fn differentiate_kinematics(rec: &Recording, filter: &SavGolSpec) -> Result<Vec<KinematicSample>, SignalError> {
    let required = 2 * filter.window + 5;
    if rec.len() < required {
        return Err(SignalError::TooFewSamples { required, actual: rec.len() });
    }
    let rate = rec.rate;
    let samples = rec.samples();

    let orientations: Vec<_> = samples.iter().map(|s| s.orientation).collect();
    let positions: Vec<_> = samples.iter().map(|s| s.position).collect();

    let world_vel = differentiate(&positions, rate);
    let lin_vel: Vec<_> = world_vel.iter().zip(&orientations).map(|(v, q)| q.inverse_transform_vector(v)).collect();
    let ang_vel = body_rates(&orientations, rate);

    let (lin_vel, ang_vel) = if filter.passes > 0 {
        let weights = SavGolWeights::new(filter.order, filter.window)?;
        let mut lin = split_channels(&lin_vel);
        let mut ang = split_channels(&ang_vel);
        for channel in lin.iter_mut().chain(ang.iter_mut()) {
            smooth_channel(channel, &weights, filter.passes);
        }
        (join_channels(&lin), join_channels(&ang))
    } else {
        (lin_vel, ang_vel)
    };

    let lin_vel_rate = differentiate(&lin_vel, rate);
    let ang_acc = differentiate(&ang_vel, rate);
    let g = gravity_world();

    Ok(samples
        .iter()
        .enumerate()
        .map(|(k, s)| KinematicSample {
            t: s.t,
            lin_vel: lin_vel[k],
            ang_vel: ang_vel[k],
            lin_acc: lin_vel_rate[k] + ang_vel[k].cross(&lin_vel[k]),
            ang_acc: ang_acc[k],
            gravity: s.orientation.inverse_transform_vector(&g),
        })
        .collect())
}

/// Differentiated kinematics paired with the recorded wrenches, ends
/// trimmed: the input of every estimator.
pub fn prepare_samples(
    rec: &Recording,
    filter: &SavGolSpec,
    trim: f64,
) -> Result<Vec<(KinematicSample, Wrench)>, SignalError> {
    trim_ends::<()>(&[], trim)?;
    let kinematics = differentiate_kinematics(rec, filter)?;
    let pairs: Vec<_> = kinematics.into_iter().zip(rec.samples().iter().map(|s| s.wrench)).collect();
    Ok(trim_ends(&pairs, trim)?.to_vec())
}

/// Drops `floor(fraction · N)` samples from each end.
pub fn trim_ends<T>(samples: &[T], fraction: f64) -> Result<&[T], SignalError> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(SignalError::FractionOutOfRange(fraction));
    }
    let cut = (fraction * samples.len() as f64).floor() as usize;
    Ok(&samples[cut..samples.len() - cut])
}

/// Pose step that emulates a robot controller's discretization: 10 µm and
/// 1e-5 per quaternion component.
pub const CONTROLLER_POSE_STEP: f64 = 1e-5;

/// Sensor noise and controller discretization applied to a recording.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseSpec {
    /// Standard deviation of force noise [N].
    pub force_sigma: f64,
    /// Standard deviation of torque noise [N·m].
    pub torque_sigma: f64,
    /// Quantization step of position components [m], 0 disables.
    pub position_step: f64,
    /// Quantization step of quaternion components, 0 disables.
    pub orientation_step: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn wrench(force_sigma: f64, torque_sigma: f64) -> Self {
        Self { force_sigma, torque_sigma, ..Self::default() }
    }

    /// Pose quantization only, with the same step for position [m] and
    /// quaternion components.
    pub fn pose(step: f64) -> Self {
        Self { position_step: step, orientation_step: step, ..Self::default() }
    }

    /// Combines the wrench noise of `self` with the pose steps of `other`.
    pub fn with_pose_of(self, other: &Self) -> Self {
        Self { position_step: other.position_step, orientation_step: other.orientation_step, ..self }
    }

    pub fn is_none(&self) -> bool {
        self.force_sigma == 0.0 && self.torque_sigma == 0.0 && self.position_step == 0.0 && self.orientation_step == 0.0
    }
}

fn quantize(value: f64, step: f64) -> f64 {
    (value / step).round() * step
}

/// Adds i.i.d. Gaussian noise to the wrench channels and optionally
/// quantizes the pose. Zero settings leave the corresponding channel
/// bit-identical.
pub fn inject_noise(rec: &Recording, model: &NoiseSpec, seed: u64) -> Recording {
    assert!(
        model.force_sigma >= 0.0
            && model.torque_sigma >= 0.0
            && model.position_step >= 0.0
            && model.orientation_step >= 0.0,
        "noise settings must be non-negative"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut draw = |sigma: f64, v: &mut Vector3<f64>| {
        if sigma > 0.0 {
            for x in v.iter_mut() {
                *x += sigma * unit.sample(&mut rng);
            }
        }
    };

    let samples = rec
        .samples
        .iter()
        .map(|s| {
            let mut out = *s;
            draw(model.force_sigma, &mut out.wrench.force);
            draw(model.torque_sigma, &mut out.wrench.torque);
            if model.position_step > 0.0 {
                out.position = s.position.map(|x| quantize(x, model.position_step));
            }
            if model.orientation_step > 0.0 {
                let q = s.orientation.quaternion().coords.map(|x| quantize(x, model.orientation_step));
                out.orientation = UnitQuaternion::from_quaternion(Quaternion::from(q));
            }
            out
        })
        .collect();
    Recording { rate: rec.rate, samples }
}
