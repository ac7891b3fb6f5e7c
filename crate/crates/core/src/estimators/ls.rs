use std::time::Instant;

use nalgebra::DVector;

use super::{nonzero_duration, residual_norm, EstimationError, EstimationResult, Method, ReducedSystem};
use crate::linalg::{condition_from, rank_tolerance, ThinSvd};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LsOptions {
    /// Normalize columns to unit length before the decomposition. The
    /// reported condition number is that of the scaled matrix.
    pub column_scaling: bool,
}

/// Ordinary least squares through `A = Q·R` followed by an SVD of `R`.
///
/// Singular values below the rank tolerance are dropped, which yields the
/// minimum-norm solution for rank-deficient systems.
pub fn solve_least_squares(sys: &ReducedSystem, options: &LsOptions) -> Result<EstimationResult, EstimationError> {
    let start = Instant::now();
    let (rows, cols) = sys.a.shape();
    if rows < cols {
        return Err(EstimationError::DegenerateSystem(format!("{rows} rows for {cols} unknowns")));
    }
    if sys.a.iter().all(|v| *v == 0.0) {
        return Err(EstimationError::DegenerateSystem("regressor is identically zero".into()));
    }

    let scale: DVector<f64> = if options.column_scaling {
        DVector::from_iterator(
            cols,
            sys.a.column_iter().map(|c| {
                let n = c.norm();
                if n > 0.0 {
                    n
                } else {
                    1.0
                }
            }),
        )
    } else {
        DVector::repeat(cols, 1.0)
    };
    let mut scaled = sys.a.clone();
    for (mut column, s) in scaled.column_iter_mut().zip(scale.iter()) {
        column /= *s;
    }

    let svd = ThinSvd::new(scaled, Some(&sys.b));
    let qtb = svd.qtb.as_ref().expect("right-hand side supplied");
    let max = svd.max_singular();
    let tol = rank_tolerance(max, rows, cols);
    let mut x = DVector::zeros(cols);
    let mut rank = 0;
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > tol {
            rank += 1;
            let coeff = svd.u.column(i).dot(qtb) / sigma;
            x += svd.v_t.row(i).transpose() * coeff;
        }
    }
    x.component_div_assign(&scale);

    let params = sys.mode.params_from(x.as_slice())?;
    Ok(EstimationResult {
        method: Method::LeastSquares,
        mode: sys.mode,
        params,
        phi: sys.mode.expand(x.as_slice())?,
        residual_norm: residual_norm(&sys.a, &x, &sys.b),
        iterations: 1,
        runtime: nonzero_duration(start.elapsed()),
        condition_number: condition_from(max, svd.min_singular(cols)),
        rank_deficient: rank < cols,
        converged: true,
        rows_used: rows,
    })
}
