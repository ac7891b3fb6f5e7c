use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{nonzero_duration, EstimationError, EstimationMode, EstimationResult, Method};
use crate::linalg::spectrum;
use crate::model::{newton_euler_wrench_phi, KinematicSample, Wrench};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Stop when `‖δ‖ ≤ step_tolerance · (‖x‖ + step_tolerance)`.
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Forward-difference step relative to the parameter magnitude.
    pub relative_diff_step: f64,
    /// Lower bound of the forward-difference step.
    pub absolute_diff_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-12,
            relative_diff_step: 1e-7,
            absolute_diff_step: 1e-9,
        }
    }
}

/// Damping above which the search is considered stalled.
const MAX_DAMPING: f64 = 1e16;

struct Problem<'a> {
    samples: &'a [(KinematicSample, Wrench)],
    mode: &'a EstimationMode,
}

impl Problem<'_> {
    fn residuals(&self, x: &[f64]) -> Result<DVector<f64>, EstimationError> {
        let phi = self.mode.expand(x)?;
        let mut r = DVector::zeros(6 * self.samples.len());
        for (i, (kin, measured)) in self.samples.iter().enumerate() {
            let predicted = newton_euler_wrench_phi(&phi, kin);
            r.fixed_rows_mut::<6>(6 * i).copy_from(&(predicted.to_vector() - measured.to_vector()));
        }
        Ok(r)
    }

    /// Forward differences, one column per free parameter.
    fn jacobian(&self, x: &[f64], r0: &DVector<f64>, options: &LmOptions) -> Result<DMatrix<f64>, EstimationError> {
        let columns: Vec<DVector<f64>> = (0..x.len())
            .into_par_iter()
            .map(|j| {
                let step = (options.relative_diff_step * x[j].abs()).max(options.absolute_diff_step);
                let mut shifted = x.to_vec();
                shifted[j] += step;
                // Use the step actually representable in floating point.
                let step = shifted[j] - x[j];
                self.residuals(&shifted).map(|r| (r - r0) / step)
            })
            .collect::<Result<_, _>>()?;
        Ok(DMatrix::from_columns(&columns))
    }
}

/// Levenberg-Marquardt on `Σ‖wrench(φ(x), kin_i) − wrench_i‖²`, started at
/// `x = 0` with a numerical Jacobian and Marquardt's diagonal scaling.
///
/// Hitting `max_iterations` is not an error: the last iterate is returned
/// with `converged = false`.
pub fn solve_levenberg_marquardt(
    samples: &[(KinematicSample, Wrench)],
    mode: &EstimationMode,
    options: &LmOptions,
) -> Result<EstimationResult, EstimationError> {
    let start = Instant::now();
    if samples.is_empty() {
        return Err(EstimationError::NoSamples);
    }
    let problem = Problem { samples, mode };
    let n = mode.scope.dim();

    let mut x = DVector::<f64>::zeros(n);
    let mut r = problem.residuals(x.as_slice())?;
    let mut cost = r.norm_squared();
    let mut damping = options.initial_damping;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = problem.jacobian(x.as_slice(), &r, options)?;

    'outer: while iterations < options.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let gradient = jac.tr_mul(&r);
        let max_diag = jtj.diagonal().max();
        if !(max_diag > 0.0) {
            return Err(EstimationError::DegenerateSystem("Jacobian is identically zero".into()));
        }
        let floor = max_diag * 1e-12;

        loop {
            iterations += 1;
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += damping * jtj[(i, i)].max(floor);
            }
            let step = match damped.cholesky() {
                Some(chol) => -chol.solve(&gradient),
                None => {
                    damping *= 10.0;
                    if damping > MAX_DAMPING {
                        converged = true;
                        break 'outer;
                    }
                    if iterations >= options.max_iterations {
                        break 'outer;
                    }
                    continue;
                }
            };
            let small_step = step.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance);
            let candidate = &x + &step;
            let r_new = problem.residuals(candidate.as_slice())?;
            let cost_new = r_new.norm_squared();

            if cost_new < cost {
                let decrease = (cost - cost_new) / cost;
                x = candidate;
                r = r_new;
                cost = cost_new;
                damping = (damping / 10.0).max(f64::MIN_POSITIVE);
                if small_step || decrease < options.cost_tolerance {
                    converged = true;
                    break 'outer;
                }
                jac = problem.jacobian(x.as_slice(), &r, options)?;
                break;
            }
            damping *= 10.0;
            if small_step || damping > MAX_DAMPING {
                converged = true;
                break 'outer;
            }
            if iterations >= options.max_iterations {
                break 'outer;
            }
        }
    }

    let spec = spectrum(&jac);
    Ok(EstimationResult {
        method: Method::LevenbergMarquardt,
        mode: *mode,
        params: mode.params_from(x.as_slice())?,
        phi: mode.expand(x.as_slice())?,
        residual_norm: cost.sqrt(),
        iterations,
        runtime: nonzero_duration(start.elapsed()),
        condition_number: spec.condition,
        rank_deficient: spec.rank < n,
        converged,
        rows_used: r.len(),
    })
}
