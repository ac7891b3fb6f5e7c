use std::time::Instant;

use nalgebra::{DMatrix, DVector, SVD};

use super::{nonzero_duration, residual_norm, EstimationError, EstimationResult, Method, ReducedSystem};
use crate::linalg::{condition_from, rank_tolerance, ThinSvd};

/// How the SVD of the augmented matrix is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SvdMode {
    /// Every `stride`-th sample, QR-compressed before a small SVD.
    Fast,
    /// All rows, SVD of the full augmented matrix.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TlsOptions {
    pub svd: SvdMode,
    /// Sample stride in fast mode; ignored in exact mode.
    pub stride: usize,
}

impl Default for TlsOptions {
    fn default() -> Self {
        Self { svd: SvdMode::Fast, stride: 10 }
    }
}

impl TlsOptions {
    pub fn exact() -> Self {
        Self { svd: SvdMode::Exact, stride: 1 }
    }
}

/// Smallest perturbation `‖[ΔA Δb]‖²_F` that makes `x` an exact solution:
/// `‖A·x − b‖² / (1 + ‖x‖²)`.
pub fn tls_cost(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    residual_norm(a, x, b).powi(2) / (1.0 + x.norm_squared())
}

/// Classical total least squares: the right singular vector `v` of the
/// smallest singular value of `[A | b]` gives `x = −v[..n] / v[n]`.
pub fn solve_total_least_squares(
    sys: &ReducedSystem,
    options: &TlsOptions,
) -> Result<EstimationResult, EstimationError> {
    let start = Instant::now();
    let sys = match options.svd {
        SvdMode::Fast => sys.subsample(options.stride.max(1)),
        SvdMode::Exact => sys.clone(),
    };
    let (rows, cols) = sys.a.shape();
    if rows <= cols + 1 {
        return Err(EstimationError::InsufficientRows { required: cols + 1, actual: rows });
    }

    let mut augmented = DMatrix::zeros(rows, cols + 1);
    augmented.columns_mut(0, cols).copy_from(&sys.a);
    augmented.column_mut(cols).copy_from(&sys.b);

    let (singular_values, v_t) = match options.svd {
        SvdMode::Fast => {
            let svd = ThinSvd::new(augmented, None);
            (svd.singular_values, svd.v_t)
        }
        SvdMode::Exact => {
            let svd = SVD::new(augmented, false, true);
            (svd.singular_values, svd.v_t.expect("requested Vᵀ"))
        }
    };
    let smallest = singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let v = v_t.row(smallest).transpose();
    let last = v[cols];
    if last.abs() < 1e-12 {
        return Err(EstimationError::TlsDegenerate(last));
    }
    let x: DVector<f64> = -v.rows(0, cols) / last;

    let spectrum = ThinSvd::new(sys.a.clone(), None);
    let max = spectrum.max_singular();
    let rank = spectrum.singular_values.iter().filter(|s| **s > rank_tolerance(max, rows, cols)).count();

    Ok(EstimationResult {
        method: Method::TotalLeastSquares(options.svd),
        mode: sys.mode,
        params: sys.mode.params_from(x.as_slice())?,
        phi: sys.mode.expand(x.as_slice())?,
        residual_norm: residual_norm(&sys.a, &x, &sys.b),
        iterations: 1,
        runtime: nonzero_duration(start.elapsed()),
        condition_number: condition_from(max, spectrum.min_singular(cols)),
        rank_deficient: rank < cols,
        converged: true,
        rows_used: rows,
    })
}
