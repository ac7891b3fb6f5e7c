use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{mask_system, nonzero_duration, EstimationError, EstimationMode, EstimationResult, Method, ParamScope};
use crate::linalg::spectrum;
use crate::model::{build_system, newton_euler_wrench, InertialParams, KinematicSample, Wrench};

/// Regular grid around a center parameter set.
///
/// Each searched coordinate `v` of the center spans
/// `v ± relative_span · |v|` with `points` evenly spaced values. A zero COM
/// component falls back to `relative_span · ‖c‖`, then to `com_floor`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub relative_span: f64,
    /// Points per dimension; `None` picks 101 for mass only and 11 for
    /// mass and center of mass.
    pub points: Option<usize>,
    /// Grid center; `None` uses the mode's known parameters.
    pub center: Option<InertialParams>,
    /// [m]
    pub com_floor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { relative_span: 0.2, points: None, center: None, com_floor: 0.01 }
    }
}

impl GridSpec {
    pub fn points_for(&self, scope: ParamScope) -> usize {
        self.points.unwrap_or(match scope {
            ParamScope::MassOnly => 101,
            _ => 11,
        })
    }
}

/// Evenly spaced values with the center as the middle entry (odd counts).
fn axis(center: f64, half_width: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![center];
    }
    let half = (points - 1) as f64 / 2.0;
    let step = half_width / half;
    (0..points).map(|i| center + (i as f64 - half) * step).collect()
}

fn cost(params: &InertialParams, samples: &[(KinematicSample, Wrench)]) -> f64 {
    samples
        .iter()
        .map(|(kin, w)| {
            let p = newton_euler_wrench(params, kin);
            (p.force - w.force).norm_squared() + (p.torque - w.torque).norm_squared()
        })
        .sum()
}

/// Exhaustive search of the summed squared wrench error over a grid.
///
/// Only mass-only and mass-with-COM scopes are searchable; the full
/// parameter set would need `points¹⁰` evaluations.
pub fn solve_brute_force(
    samples: &[(KinematicSample, Wrench)],
    mode: &EstimationMode,
    region: &GridSpec,
) -> Result<EstimationResult, EstimationError> {
    let start = Instant::now();
    if mode.scope == ParamScope::FullPip {
        return Err(EstimationError::UnsupportedMode(ParamScope::FullPip));
    }
    let known = mode.known.ok_or(EstimationError::MissingKnownParams(mode.scope))?;
    if samples.is_empty() {
        return Err(EstimationError::NoSamples);
    }
    let center = region.center.unwrap_or(known);
    let points = region.points_for(mode.scope).max(1);
    let span = region.relative_span;

    let masses = axis(center.mass, span * center.mass.abs(), points);
    let candidates: Vec<InertialParams> = match mode.scope {
        ParamScope::MassOnly => masses.iter().map(|&m| InertialParams::new(m, known.com, known.inertia)).collect(),
        _ => {
            let com_norm = center.com.norm();
            let axes: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    let c = center.com[i];
                    let mut w = span * c.abs();
                    if w == 0.0 {
                        w = span * com_norm;
                    }
                    if w == 0.0 {
                        w = region.com_floor;
                    }
                    axis(c, w, points)
                })
                .collect();
            let mut out = Vec::with_capacity(points.pow(4));
            for &m in &masses {
                for &cx in &axes[0] {
                    for &cy in &axes[1] {
                        for &cz in &axes[2] {
                            out.push(InertialParams::new(m, Vector3::new(cx, cy, cz), known.inertia));
                        }
                    }
                }
            }
            out
        }
    };

    let costs: Vec<f64> = candidates.par_iter().map(|p| cost(p, samples)).collect();
    let (best, best_cost) =
        costs.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, c)| if *c < acc.1 { (i, *c) } else { acc });
    let params = candidates[best];

    let sys = build_system(samples).map_err(|e| EstimationError::DegenerateSystem(e.to_string()))?;
    let reduced = mask_system(&sys, mode)?;
    let spec = spectrum(&reduced.a);
    let x = mode.restrict(&params);

    Ok(EstimationResult {
        method: Method::BruteForce,
        mode: *mode,
        params,
        phi: mode.expand(&x)?,
        residual_norm: best_cost.sqrt(),
        iterations: candidates.len(),
        runtime: nonzero_duration(start.elapsed()),
        condition_number: spec.condition,
        rank_deficient: spec.rank < mode.scope.dim(),
        converged: true,
        rows_used: 6 * samples.len(),
    })
}
