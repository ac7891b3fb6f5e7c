//! Payload parameter estimators.
//!
//! Every estimator works in one of three scopes: mass only, mass and center
//! of mass, or the full parameter set. Parameters outside the scope are
//! taken from known (ground-truth) values.
//!
//! - [`solve_least_squares`] and [`solve_total_least_squares`] operate on a
//!   [`ReducedSystem`] built by [`mask_system`].
//! - [`solve_levenberg_marquardt`] and [`solve_brute_force`] evaluate the
//!   wrench model sample by sample.

use std::fmt;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{InertialParams, PhiError, PhiVector, RegressorSystem};

mod brute;
mod lm;
mod ls;
mod tls;

pub use brute::{solve_brute_force, GridSpec};
pub use lm::{solve_levenberg_marquardt, LmOptions};
pub use ls::{solve_least_squares, LsOptions};
pub use tls::{solve_total_least_squares, tls_cost, SvdMode, TlsOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("{0} estimation needs known parameters for the fixed groups")]
    MissingKnownParams(ParamScope),
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),
    #[error("total least squares is degenerate: last component of the null vector is {0:e}")]
    TlsDegenerate(f64),
    #[error("need more than {required} rows, got {actual}")]
    InsufficientRows { required: usize, actual: usize },
    #[error("{0} is not supported by brute-force search")]
    UnsupportedMode(ParamScope),
    #[error("no samples to estimate from")]
    NoSamples,
}

/// Which parameter groups are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamScope {
    MassOnly,
    MassCom,
    FullPip,
}

impl ParamScope {
    /// Number of free parameters.
    pub fn dim(&self) -> usize {
        match self {
            Self::MassOnly => 1,
            Self::MassCom => 4,
            Self::FullPip => 10,
        }
    }

    pub fn estimates_com(&self) -> bool {
        !matches!(self, Self::MassOnly)
    }

    pub fn estimates_inertia(&self) -> bool {
        matches!(self, Self::FullPip)
    }
}

impl fmt::Display for ParamScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MassOnly => "mass only",
            Self::MassCom => "mass and center of mass",
            Self::FullPip => "full PIP",
        })
    }
}

/// Estimation scope plus the known values of the groups it does not cover.
///
/// For `MassOnly` the known center of mass and inertia are used; for
/// `MassCom` only the known inertia. `FullPip` ignores `known`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimationMode {
    pub scope: ParamScope,
    pub known: Option<InertialParams>,
}

impl EstimationMode {
    pub fn full() -> Self {
        Self { scope: ParamScope::FullPip, known: None }
    }

    pub fn mass_only(known: InertialParams) -> Self {
        Self { scope: ParamScope::MassOnly, known: Some(known) }
    }

    pub fn mass_com(known: InertialParams) -> Self {
        Self { scope: ParamScope::MassCom, known: Some(known) }
    }

    fn known_or_err(&self) -> Result<Option<&InertialParams>, EstimationError> {
        match (self.scope, &self.known) {
            (ParamScope::FullPip, _) => Ok(None),
            (_, Some(k)) => Ok(Some(k)),
            (scope, None) => Err(EstimationError::MissingKnownParams(scope)),
        }
    }

    /// Maps the free parameters `x` to the full φ vector.
    ///
    /// Mass-only keeps the known center of mass, so the first moment is
    /// `m · c_known`.
    pub fn expand(&self, x: &[f64]) -> Result<PhiVector, EstimationError> {
        assert_eq!(x.len(), self.scope.dim(), "free parameter count");
        let known = self.known_or_err()?;
        let mut phi = PhiVector::zeros();
        match (self.scope, known) {
            (ParamScope::FullPip, _) => phi.0.copy_from_slice(x),
            (ParamScope::MassCom, Some(k)) => {
                phi.0.rows_mut(0, 4).copy_from_slice(x);
                phi.0.rows_mut(4, 6).copy_from_slice(&k.inertia.vech());
            }
            (ParamScope::MassOnly, Some(k)) => {
                let h = k.com * x[0];
                phi.0[0] = x[0];
                phi.0.rows_mut(1, 3).copy_from_slice(h.as_slice());
                phi.0.rows_mut(4, 6).copy_from_slice(&k.inertia.vech());
            }
            _ => unreachable!("known parameters checked above"),
        }
        Ok(phi)
    }

    /// Free parameters of `params` in this scope.
    pub fn restrict(&self, params: &InertialParams) -> Vec<f64> {
        let phi = params.to_phi();
        match self.scope {
            ParamScope::MassOnly => vec![params.mass],
            ParamScope::MassCom => phi.as_slice()[..4].to_vec(),
            ParamScope::FullPip => phi.as_slice().to_vec(),
        }
    }

    /// Parameters from a free-parameter estimate; the center of mass of a
    /// non-positive mass is still `h / m` so that non-physical estimates are
    /// reported instead of rejected.
    pub fn params_from(&self, x: &[f64]) -> Result<InertialParams, EstimationError> {
        let phi = self.expand(x)?;
        match InertialParams::from_phi(&phi) {
            Ok(p) => Ok(match (self.scope, self.known) {
                (ParamScope::MassOnly, Some(k)) => InertialParams { com: k.com, ..p },
                _ => p,
            }),
            Err(PhiError::NonPositiveMass(m)) if m != 0.0 && m.is_finite() => match (self.scope, self.known) {
                (ParamScope::MassOnly, Some(k)) => Ok(InertialParams::new(m, k.com, k.inertia)),
                _ => Ok(InertialParams::new(m, phi.first_moment() / m, phi.inertia())),
            },
            Err(PhiError::NonPositiveMass(m)) => Err(EstimationError::DegenerateSystem(format!(
                "estimated mass {m} leaves the center of mass undefined"
            ))),
        }
    }
}

/// Regressor restricted to the free columns of a scope, with the known
/// contributions moved to the right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub mode: EstimationMode,
    pub sample_count: usize,
}

impl ReducedSystem {
    pub const ROWS_PER_SAMPLE: usize = RegressorSystem::ROWS_PER_SAMPLE;

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Keeps every `stride`-th sample (all six rows of it).
    pub fn subsample(&self, stride: usize) -> Self {
        assert!(stride > 0, "stride must be positive");
        if stride == 1 {
            return self.clone();
        }
        let kept: Vec<usize> = (0..self.sample_count).step_by(stride).collect();
        let r = Self::ROWS_PER_SAMPLE;
        let mut a = DMatrix::zeros(kept.len() * r, self.cols());
        let mut b = DVector::zeros(kept.len() * r);
        for (dst, src) in kept.iter().enumerate() {
            a.rows_mut(dst * r, r).copy_from(&self.a.rows(src * r, r));
            b.rows_mut(dst * r, r).copy_from(&self.b.rows(src * r, r));
        }
        Self { a, b, mode: self.mode, sample_count: kept.len() }
    }
}

/// Restricts `sys` to the free parameters of `mode`.
pub fn mask_system(sys: &RegressorSystem, mode: &EstimationMode) -> Result<ReducedSystem, EstimationError> {
    let known = mode.known_or_err()?;
    let a_full = sys.matrix();
    let (a, b) = match (mode.scope, known) {
        (ParamScope::FullPip, _) => (a_full.clone(), sys.rhs().clone()),
        (scope, Some(k)) => {
            let inertia = DVector::from_column_slice(&k.inertia.vech());
            let b = sys.rhs() - a_full.columns(4, 6) * inertia;
            let a = if scope == ParamScope::MassCom {
                a_full.columns(0, 4).into_owned()
            } else {
                let com = DVector::from_column_slice(k.com.as_slice());
                let col = a_full.column(0) + a_full.columns(1, 3) * com;
                DMatrix::from_columns(&[col])
            };
            (a, b)
        }
        (_, None) => unreachable!("known parameters checked above"),
    };
    Ok(ReducedSystem { a, b, mode: *mode, sample_count: sys.sample_count() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    LeastSquares,
    TotalLeastSquares(SvdMode),
    LevenbergMarquardt,
    BruteForce,
}

impl Method {
    /// Short identifier used in reports and on the command line.
    pub fn id(&self) -> &'static str {
        match self {
            Self::LeastSquares => "ls",
            Self::TotalLeastSquares(SvdMode::Fast) => "tls-fast",
            Self::TotalLeastSquares(SvdMode::Exact) => "tls-exact",
            Self::LevenbergMarquardt => "lm",
            Self::BruteForce => "brute",
        }
    }
}

/// Outcome of one estimator run.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    pub method: Method,
    pub mode: EstimationMode,
    pub params: InertialParams,
    /// Full φ, including the known entries.
    pub phi: PhiVector,
    /// `‖A·x − b‖₂` over the rows the solver used.
    pub residual_norm: f64,
    pub iterations: usize,
    pub runtime: Duration,
    /// `σ_max / σ_min` of the (reduced) regressor or Jacobian.
    pub condition_number: f64,
    pub rank_deficient: bool,
    /// False when an iterative solver hit its iteration cap.
    pub converged: bool,
    pub rows_used: usize,
}

pub(crate) fn nonzero_duration(d: Duration) -> Duration {
    d.max(Duration::from_nanos(1))
}

pub(crate) fn residual_norm(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a * x - b).norm()
}
