//! On-disk formats: recordings (CSV), parameter sets and reports (JSON).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, Vector3};
use pipest_core::diagnose::{finite_or_inf, ComparisonTable, DataKind, RelError};
use pipest_core::model::{InertialParams, SymmetricInertia, Wrench};
use pipest_core::signal::{RawSample, Recording};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const RECORDING_HEADER: [&str; 14] =
    ["t", "px", "py", "pz", "qw", "qx", "qy", "qz", "fx", "fy", "fz", "tx", "ty", "tz"];

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Quaternion norm deviation that is silently renormalized.
pub const QUATERNION_WARN: f64 = 1e-6;
/// Quaternion norm deviation that rejects the row.
pub const QUATERNION_REJECT: f64 = 1e-3;

pub struct LoadedRecording {
    pub recording: Recording,
    pub warnings: Vec<String>,
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))
}

/// Parses a recording; row numbers in errors count data rows from 1.
pub fn parse_recording(bytes: &[u8]) -> Result<(Recording, Vec<String>), CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| CliError::Ingest(format!("header: {e}")))?;
    if header.iter().map(str::trim).ne(RECORDING_HEADER) {
        return Err(CliError::Ingest(format!(
            "header must be `{}`, found `{}`",
            RECORDING_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Ingest(format!("row {row}: {e}")))?;
        if record.len() != RECORDING_HEADER.len() {
            return Err(CliError::Ingest(format!("row {row}: expected 14 columns, found {}", record.len())));
        }
        let mut v = [0.0; 14];
        for (k, field) in record.iter().enumerate() {
            v[k] = field.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                CliError::Ingest(format!("row {row}: column {} is not a finite number: {field:?}", RECORDING_HEADER[k]))
            })?;
        }
        let q = Quaternion::new(v[4], v[5], v[6], v[7]);
        let deviation = (q.norm() - 1.0).abs();
        if deviation > QUATERNION_REJECT {
            return Err(CliError::Ingest(format!("row {row}: quaternion norm {} is not unit", q.norm())));
        }
        if deviation > QUATERNION_WARN {
            warnings.push(format!("row {row}: quaternion norm {} renormalized", q.norm()));
        }
        samples.push(RawSample::new(
            v[0],
            Vector3::new(v[1], v[2], v[3]),
            q,
            Wrench::new(Vector3::new(v[8], v[9], v[10]), Vector3::new(v[11], v[12], v[13])),
        ));
    }
    if samples.is_empty() {
        return Err(CliError::Ingest("recording has no data rows".into()));
    }
    Ok((Recording::from_timestamps(samples)?, warnings))
}

pub fn load_recording(path: &Path) -> Result<LoadedRecording, CliError> {
    let bytes = read_bytes(path)?;
    let (recording, warnings) = parse_recording(&bytes).map_err(|e| match e {
        CliError::Ingest(m) => CliError::Ingest(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(LoadedRecording { recording, warnings, digest: digest(&bytes) })
}

/// CSV text; numbers use the shortest representation that parses back to
/// the same value.
pub fn recording_to_csv(rec: &Recording) -> String {
    let mut out = RECORDING_HEADER.join(",");
    out.push('\n');
    for s in rec.samples() {
        let q = s.orientation.quaternion();
        let (f, t) = (s.wrench.force, s.wrench.torque);
        let values = [s.t, s.position.x, s.position.y, s.position.z, q.w, q.i, q.j, q.k, f.x, f.y, f.z, t.x, t.y, t.z];
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

/// Mass [kg], center of mass [m], and inertia about the sensor origin
/// [kg·m²] in the order xx, xy, xz, yy, yz, zz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFileV1 {
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [f64; 6],
}

impl From<&InertialParams> for ParamsFileV1 {
    fn from(p: &InertialParams) -> Self {
        Self { mass: p.mass, com: p.com.into(), inertia: p.inertia.vech() }
    }
}

impl ParamsFileV1 {
    /// Estimates may carry any values; only ground-truth files are
    /// validated.
    pub fn params(&self) -> InertialParams {
        InertialParams::new(self.mass, Vector3::from(self.com), SymmetricInertia::from_vech(self.inertia))
    }

    pub fn ground_truth(&self) -> Result<InertialParams, CliError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(CliError::Usage(format!("ground-truth mass must be positive, got {}", self.mass)));
        }
        if !self.com.iter().chain(&self.inertia).all(|x| x.is_finite()) {
            return Err(CliError::Usage("ground-truth parameters must be finite".into()));
        }
        Ok(self.params())
    }
}

pub fn load_ground_truth(path: &Path) -> Result<InertialParams, CliError> {
    let bytes = read_bytes(path)?;
    let file: ParamsFileV1 =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))?;
    file.ground_truth()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportErrors {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<RelError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub com: Option<RelError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<RelError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RankFlags {
    pub rank_deficient: bool,
    pub non_physical: bool,
    pub inertia_unidentifiable: bool,
}

/// Processing and solver settings a report was produced with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SettingsRecord {
    pub trim: f64,
    pub sg_order: usize,
    pub sg_window: usize,
    pub sg_passes: usize,
    pub tls_svd: String,
    pub tls_stride: usize,
    pub column_scaling: bool,
    pub grid_span: f64,
    pub grid_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReportFileV1 {
    pub schema_version: u32,
    pub tool_version: String,
    pub input_digest: String,
    pub method: String,
    pub mode: String,
    pub data_kind: DataKind,
    pub estimated: ParamsFileV1,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ParamsFileV1>,
    /// Relative errors; absent without ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<ReportErrors>,
    #[serde(with = "finite_or_inf")]
    pub condition_number: f64,
    pub rank_flags: RankFlags,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rows_used: usize,
    /// `null` when timing was suppressed.
    pub runtime_ms: Option<f64>,
    pub settings: SettingsRecord,
}

pub fn load_report(path: &Path) -> Result<ReportFileV1, CliError> {
    let bytes = read_bytes(path)?;
    let report: ReportFileV1 =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(CliError::Ingest(format!(
            "{}: unsupported schema version {}",
            path.display(),
            report.schema_version
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ComparisonFileV1 {
    pub schema_version: u32,
    pub tool_version: String,
    pub rows: Vec<pipest_core::diagnose::ComparisonRow>,
}

impl From<&ComparisonTable> for ComparisonFileV1 {
    fn from(t: &ComparisonTable) -> Self {
        Self { schema_version: SCHEMA_VERSION, tool_version: TOOL_VERSION.into(), rows: t.rows.clone() }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary file in the target directory, so a failed
/// command never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(rows: &[&str]) -> String {
        let mut s = RECORDING_HEADER.join(",") + "\n";
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_and_renormalizes() {
        let text = csv(&[
            "0,0,0,0,1,0,0,0,0,0,-9.8,0,0,0",
            "0.001,0,0,0,1.0000005,0,0,0,0,0,-9.8,0,0,0",
            "0.002,0,0,0,1,0,0,0,0,0,-9.8,0,0,0",
        ]);
        let (rec, warnings) = parse_recording(text.as_bytes()).unwrap();
        assert_eq!(rec.len(), 3);
        assert!(warnings.is_empty());
        let text = csv(&["0,0,0,0,1.0005,0,0,0,0,0,0,0,0,0", "0.001,0,0,0,1,0,0,0,0,0,0,0,0,0"]);
        let (_, warnings) = parse_recording(text.as_bytes()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].starts_with("row 1"));
    }

    #[test]
    fn errors_carry_row_numbers() {
        let bad_quat = csv(&["0,0,0,0,1,0,0,0,0,0,0,0,0,0", "0.001,0,0,0,1.1,0,0,0,0,0,0,0,0,0"]);
        let msg = parse_recording(bad_quat.as_bytes()).err().unwrap().to_string();
        assert!(msg.contains("row 2"), "{msg}");
        let bad_num = csv(&["0,0,0,0,1,0,0,0,0,0,0,0,0,0", "0.001,0,x,0,1,0,0,0,0,0,0,0,0,0"]);
        let msg = parse_recording(bad_num.as_bytes()).err().unwrap().to_string();
        assert!(msg.contains("row 2") && msg.contains("py"), "{msg}");
        let short = csv(&["0,0,0,0,1,0,0,0,0,0,0,0,0"]);
        assert!(parse_recording(short.as_bytes()).err().unwrap().to_string().contains("row 1"));
        let backwards = csv(&[
            "0,0,0,0,1,0,0,0,0,0,0,0,0,0",
            "0.001,0,0,0,1,0,0,0,0,0,0,0,0,0",
            "0.0005,0,0,0,1,0,0,0,0,0,0,0,0,0",
        ]);
        let e = parse_recording(backwards.as_bytes()).err().unwrap();
        assert_eq!(e.exit_code(), 4);
        assert!(e.to_string().contains("row 3"), "{e}");
    }

    #[test]
    fn rejects_wrong_header() {
        let e = parse_recording(b"t,x,y\n0,0,0\n").err().unwrap();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let text = csv(&[
            "0,0.1,-0.2,0.30000000000000004,0.6,0.8,0,0,1e-7,2.5,-9.80665,0.001,0,-3",
            "0.001,0.1,-0.2,0.3,0.6,0.8,0,0,0,0,0,0,0,0",
        ]);
        let (rec, _) = parse_recording(text.as_bytes()).unwrap();
        let again = recording_to_csv(&rec);
        let (back, _) = parse_recording(again.as_bytes()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(recording_to_csv(&back), again);
    }

    #[test]
    fn params_reject_unknown_keys_and_bad_mass() {
        let ok: ParamsFileV1 =
            serde_json::from_str(r#"{"mass":0.3,"com":[0,0,0.05],"inertia":[1e-3,0,0,1e-3,0,1e-3]}"#).unwrap();
        assert!(ok.ground_truth().is_ok());
        assert!(serde_json::from_str::<ParamsFileV1>(
            r#"{"mass":0.3,"com":[0,0,0],"inertia":[0,0,0,0,0,0],"extra":1}"#
        )
        .is_err());
        let zero = ParamsFileV1 { mass: 0.0, ..ok };
        assert_eq!(zero.ground_truth().err().unwrap().exit_code(), 2);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
