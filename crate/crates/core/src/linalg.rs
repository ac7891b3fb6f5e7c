//! Dense helpers shared by the solvers and the diagnostics.

use nalgebra::{DMatrix, DVector, SVD};

/// SVD of a tall matrix computed as `A = Q·R`, `R = U·Σ·Vᵀ`.
///
/// Only the `n×n` factors are kept, together with the first `n` entries of
/// `Qᵀ·b` when a right-hand side is supplied.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
    pub qtb: Option<DVector<f64>>,
}

impl ThinSvd {
    pub fn new(a: DMatrix<f64>, b: Option<&DVector<f64>>) -> Self {
        let (rows, cols) = a.shape();
        let (r, qtb) = if rows > cols {
            let qr = a.qr();
            let qtb = b.map(|b| {
                let mut b = b.clone();
                qr.q_tr_mul(&mut b);
                b.rows(0, cols).into_owned()
            });
            (qr.unpack_r(), qtb)
        } else {
            (a, b.cloned())
        };
        let svd = SVD::new(r, true, true);
        Self {
            u: svd.u.expect("requested U"),
            singular_values: svd.singular_values,
            v_t: svd.v_t.expect("requested Vᵀ"),
            qtb,
        }
    }

    pub fn max_singular(&self) -> f64 {
        self.singular_values.iter().fold(0.0_f64, |acc, s| acc.max(*s))
    }

    pub fn min_singular(&self, cols: usize) -> f64 {
        // Wide matrices have fewer singular values than columns.
        if self.singular_values.len() < cols {
            return 0.0;
        }
        self.singular_values.iter().fold(f64::INFINITY, |acc, s| acc.min(*s))
    }
}

/// Rank tolerance `σ_max · max(rows, cols) · ε · 16`.
pub(crate) fn rank_tolerance(max_singular: f64, rows: usize, cols: usize) -> f64 {
    max_singular * rows.max(cols) as f64 * f64::EPSILON * 16.0
}

pub(crate) fn numerical_rank(singular_values: &DVector<f64>, rows: usize, cols: usize) -> usize {
    let max = singular_values.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let tol = rank_tolerance(max, rows, cols);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|s| **s > tol).count()
}

/// `σ_max / σ_min`; infinite for a singular or empty matrix.
pub(crate) fn condition_from(max: f64, min: f64) -> f64 {
    if max == 0.0 || min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) struct Spectrum {
    pub singular_values: DVector<f64>,
    pub condition: f64,
    pub rank: usize,
    pub max: f64,
    pub min: f64,
}

pub(crate) fn spectrum(a: &DMatrix<f64>) -> Spectrum {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Spectrum { singular_values: DVector::zeros(0), condition: f64::INFINITY, rank: 0, max: 0.0, min: 0.0 };
    }
    let svd = ThinSvd::new(a.clone(), None);
    let max = svd.max_singular();
    let min = svd.min_singular(cols);
    Spectrum {
        rank: numerical_rank(&svd.singular_values, rows, cols),
        condition: condition_from(max, min),
        singular_values: svd.singular_values,
        max,
        min,
    }
}
