//! Error metrics, excitation analysis and method comparison tables.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::estimators::{EstimationResult, ParamScope};
use crate::linalg::spectrum;
use crate::model::{physical_consistency, InertialParams, RegressorSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnoseError {
    #[error("ground truth is zero, relative error is undefined")]
    ZeroGroundTruth,
    #[error("comparison needs the ground-truth parameters")]
    MissingTruth,
}

/// A parameter group with an L2-type norm: mass (absolute value), center
/// of mass (Euclidean) or inertia (Frobenius).
pub trait ParameterGroup {
    fn distance(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
}

impl ParameterGroup for f64 {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl ParameterGroup for Vector3<f64> {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl ParameterGroup for Matrix3<f64> {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// `‖estimate − truth‖ / ‖truth‖`.
pub fn relative_error<G: ParameterGroup>(estimate: &G, truth: &G) -> Result<f64, DiagnoseError> {
    let norm = truth.magnitude();
    if norm == 0.0 {
        return Err(DiagnoseError::ZeroGroundTruth);
    }
    Ok(estimate.distance(truth) / norm)
}

/// Relative error of one group; `Undefined` when the truth is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelError {
    Value(f64),
    Undefined,
}

impl RelError {
    fn from_result(r: Result<f64, DiagnoseError>) -> Self {
        r.map_or(Self::Undefined, Self::Value)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(*v),
            Self::Undefined => None,
        }
    }
}

impl fmt::Display for RelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(v) => write!(f, "{v:.6e}"),
            Self::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for RelError {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Value(v) => s.serialize_f64(*v),
            Self::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for RelError {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(Self::Value(v)),
            Repr::Text(t) if t == "undefined" => Ok(Self::Undefined),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected error value {t:?}"))),
        }
    }
}

/// Serializes non-finite values as `null` and reads `null` back as +∞,
/// since JSON has no infinity.
pub mod finite_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Per-group relative errors. Groups outside the estimation scope are
/// `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<RelError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub com: Option<RelError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<RelError>,
    pub rank_deficient: bool,
    pub non_physical: bool,
}

impl ErrorReport {
    pub fn evaluate(
        estimate: &InertialParams,
        truth: &InertialParams,
        scope: ParamScope,
        rank_deficient: bool,
    ) -> Self {
        let mass = RelError::from_result(relative_error(&estimate.mass, &truth.mass));
        let com = scope.estimates_com().then(|| RelError::from_result(relative_error(&estimate.com, &truth.com)));
        let inertia = scope
            .estimates_inertia()
            .then(|| RelError::from_result(relative_error(&estimate.inertia.matrix(), &truth.inertia.matrix())));
        Self {
            mass: Some(mass),
            com,
            inertia,
            rank_deficient,
            non_physical: !physical_consistency(estimate).is_consistent(),
        }
    }

    pub fn for_result(result: &EstimationResult, truth: &InertialParams) -> Self {
        Self::evaluate(&result.params, truth, result.mode.scope, result.rank_deficient)
    }
}

/// Identifiability of a regressor system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostics {
    #[serde(with = "finite_or_inf")]
    pub condition_number: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Mass column alone.
    #[serde(with = "finite_or_inf")]
    pub mass_condition: f64,
    /// Mass and first-moment columns.
    #[serde(with = "finite_or_inf")]
    pub mass_com_condition: f64,
    /// Inertia columns restricted to the torque rows.
    #[serde(with = "finite_or_inf")]
    pub inertia_condition: f64,
    pub inertia_unidentifiable: bool,
    pub max_angular_velocity: f64,
    pub max_angular_acceleration: f64,
    pub sample_count: usize,
}

/// Relative singular value below which the inertia block counts as
/// unidentifiable.
pub const UNIDENTIFIABLE_RATIO: f64 = 1e-8;

/// Conditioning of the full regressor and of its parameter-group blocks.
///
/// Angular rates are read back from the force rows of each block: the
/// first-moment columns hold `[α]× + [ω]×²`, whose skew part is `[α]×` and
/// whose trace is `−2‖ω‖²`.
pub fn excitation_diagnostics(sys: &RegressorSystem) -> Diagnostics {
    let a = sys.matrix();
    let n = sys.sample_count();
    let full = spectrum(a);
    let mass = spectrum(&a.columns(0, 1).into_owned());
    let mass_com = spectrum(&a.columns(0, 4).into_owned());

    let inertia_block = DMatrix::from_fn(3 * n, 6, |r, c| a[(6 * (r / 3) + 3 + r % 3, 4 + c)]);
    let inertia = spectrum(&inertia_block);
    let inertia_unidentifiable = !(inertia.max > 0.0) || inertia.min < UNIDENTIFIABLE_RATIO * inertia.max;

    let (mut max_w, mut max_dw) = (0.0_f64, 0.0_f64);
    for s in 0..n {
        let m = a.view((6 * s, 1), (3, 3));
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        max_w = max_w.max((-trace / 2.0).max(0.0).sqrt());
        let dw = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) / 2.0;
        max_dw = max_dw.max(dw.norm());
    }

    Diagnostics {
        condition_number: full.condition,
        rank: full.rank,
        singular_values: {
            let mut s: Vec<f64> = full.singular_values.iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            s
        },
        mass_condition: mass.condition,
        mass_com_condition: mass_com.condition,
        inertia_condition: inertia.condition,
        inertia_unidentifiable,
        max_angular_velocity: max_w,
        max_angular_acceleration: max_dw,
        sample_count: n,
    }
}

/// Whether the wrenches were synthesized from the model (validation) or
/// come from the sensor (measured, possibly emulated with noise).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Validation,
    Measured,
}

impl DataKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Validation => "validation",
            Self::Measured => "measured",
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn scope_id(scope: ParamScope) -> &'static str {
    match scope {
        ParamScope::MassOnly => "mass",
        ParamScope::MassCom => "mass-com",
        ParamScope::FullPip => "full",
    }
}

pub fn parse_scope_id(id: &str) -> Option<ParamScope> {
    match id {
        "mass" => Some(ParamScope::MassOnly),
        "mass-com" => Some(ParamScope::MassCom),
        "full" => Some(ParamScope::FullPip),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonRow {
    pub method: String,
    pub mode: String,
    pub data_kind: DataKind,
    pub errors: ErrorReport,
    /// Absent when timing was suppressed for reproducible output.
    #[serde(default)]
    pub runtime_ms: Option<f64>,
    #[serde(with = "finite_or_inf")]
    pub condition_number: f64,
}

impl ComparisonRow {
    fn key(&self) -> (&str, u8, DataKind) {
        let mode_rank = match parse_scope_id(&self.mode) {
            Some(ParamScope::MassOnly) => 0,
            Some(ParamScope::MassCom) => 1,
            Some(ParamScope::FullPip) => 2,
            None => 3,
        };
        (&self.method, mode_rank, self.data_kind)
    }
}

/// Rows sorted by (method, mode, data kind); ties keep input order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// An estimator result together with the kind of data it was run on.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledResult {
    pub result: EstimationResult,
    pub data_kind: DataKind,
}

impl ComparisonTable {
    pub fn from_rows(mut rows: Vec<ComparisonRow>) -> Self {
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        Self { rows }
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let header = ["method", "mode", "data", "e_mass", "e_com", "e_inertia", "cond", "runtime_ms", "flags"];
        let fmt_err = |e: &Option<RelError>| e.map_or_else(|| "-".to_string(), |e| e.to_string());
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut flags = Vec::new();
                if r.errors.rank_deficient {
                    flags.push("rank-deficient");
                }
                if r.errors.non_physical {
                    flags.push("non-physical");
                }
                vec![
                    r.method.clone(),
                    r.mode.clone(),
                    r.data_kind.to_string(),
                    fmt_err(&r.errors.mass),
                    fmt_err(&r.errors.com),
                    fmt_err(&r.errors.inertia),
                    format!("{:.3e}", r.condition_number),
                    r.runtime_ms.map_or_else(|| "-".to_string(), |t| format!("{t:.3}")),
                    flags.join(","),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let mut line = |items: Vec<&str>| {
            let padded: Vec<String> = items.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(header.to_vec());
        for row in &cells {
            line(row.iter().map(String::as_str).collect());
        }
        out
    }

    /// `method,mode,data,group,error` lines for bar-chart style plots;
    /// undefined and absent groups are skipped.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("method,mode,data,group,error\n");
        for r in &self.rows {
            for (group, e) in [("mass", r.errors.mass), ("com", r.errors.com), ("inertia", r.errors.inertia)] {
                if let Some(RelError::Value(v)) = e {
                    let _ = writeln!(out, "{},{},{},{},{}", r.method, r.mode, r.data_kind, group, v);
                }
            }
        }
        out
    }
}

/// Table of relative errors, runtimes and condition numbers.
pub fn build_comparison(
    results: &[LabeledResult],
    truth: Option<&InertialParams>,
) -> Result<ComparisonTable, DiagnoseError> {
    if results.is_empty() {
        return Ok(ComparisonTable::default());
    }
    let truth = truth.ok_or(DiagnoseError::MissingTruth)?;
    let rows = results
        .iter()
        .map(|l| ComparisonRow {
            method: l.result.method.id().to_string(),
            mode: scope_id(l.result.mode.scope).to_string(),
            data_kind: l.data_kind,
            errors: ErrorReport::for_result(&l.result, truth),
            runtime_ms: Some(l.result.runtime.as_secs_f64() * 1e3),
            condition_number: l.result.condition_number,
        })
        .collect();
    Ok(ComparisonTable::from_rows(rows))
}
