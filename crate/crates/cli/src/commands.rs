use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use pipest_core::diagnose::{excitation_diagnostics, ComparisonRow, ComparisonTable, Diagnostics, ErrorReport};
use pipest_core::estimators::{GridSpec, LmOptions, LsOptions, ParamScope, TlsOptions};
use pipest_core::model::{build_system, InertialParams};
use pipest_core::signal::{prepare_samples, NoiseSpec, SavGolSpec, CONTROLLER_POSE_STEP};
use pipest_core::synth::{make_scenario, validation_recording, ScenarioKind};

use crate::args::{
    Command, CompareArgs, DiagnoseArgs, EstimateArgs, FilterArgs, SimulateArgs, SolverArgs, ValidateArgs,
};
use crate::error::CliError;
use crate::formats::{
    load_ground_truth, load_recording, load_report, recording_to_csv, to_json, write_atomic, ComparisonFileV1,
    ParamsFileV1, ReportFileV1,
};
use crate::pipeline::{build_report, estimate_recording, mode_for, run_sweep, Settings, Sweep};

/// Default sensor model of `simulate --noise`.
pub const DEFAULT_FORCE_SIGMA: f64 = 0.1;
pub const DEFAULT_TORQUE_SIGMA: f64 = 0.01;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Validate(a) => validate(&a),
        Command::Diagnose(a) => diagnose(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn filter_spec(a: &FilterArgs) -> Result<SavGolSpec, CliError> {
    if a.sg_window.is_multiple_of(2) || a.sg_window <= a.sg_order {
        return Err(CliError::Usage(format!(
            "--sg-window {} must be odd and larger than --sg-order {}",
            a.sg_window, a.sg_order
        )));
    }
    Ok(SavGolSpec { order: a.sg_order, window: a.sg_window, passes: a.sg_passes })
}

fn settings(a: &SolverArgs) -> Result<Settings, CliError> {
    if !(0.0..0.5).contains(&a.trim) {
        return Err(CliError::Usage(format!("--trim {} must lie in [0, 0.5)", a.trim)));
    }
    if a.tls_stride == 0 {
        return Err(CliError::Usage("--tls-stride must be at least 1".into()));
    }
    if !(a.grid_span.is_finite() && a.grid_span >= 0.0) {
        return Err(CliError::Usage(format!("--grid-span {} must be non-negative", a.grid_span)));
    }
    if a.grid_points == Some(0) {
        return Err(CliError::Usage("--grid-points must be at least 1".into()));
    }
    Ok(Settings {
        trim: a.trim,
        filter: filter_spec(&a.filter)?,
        ls: LsOptions { column_scaling: a.column_scaling },
        tls: TlsOptions { svd: a.tls_svd.into(), stride: a.tls_stride },
        lm: LmOptions::default(),
        grid: GridSpec { relative_span: a.grid_span, points: a.grid_points, ..GridSpec::default() },
    })
}

fn non_negative(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x.is_finite() && x >= 0.0) => Err(CliError::Usage(format!("--{name} {x} must be non-negative"))),
        other => Ok(other),
    }
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let kind = ScenarioKind::from(a.kind);
    let truth = match &a.gt {
        Some(p) => load_ground_truth(p)?,
        None => kind.default_truth(),
    };
    let duration = a.duration.unwrap_or(kind.default_duration());
    if !(duration.is_finite() && duration > 0.0) {
        return Err(CliError::Usage(format!("--duration {duration} must be positive")));
    }
    if !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(CliError::Usage(format!("--rate {} must be positive", a.rate)));
    }
    let (fs, ts) = if a.noise { (DEFAULT_FORCE_SIGMA, DEFAULT_TORQUE_SIGMA) } else { (0.0, 0.0) };
    let step = if a.noise { CONTROLLER_POSE_STEP } else { 0.0 };
    let filter = filter_spec(&a.filter)?;
    let mut noise = NoiseSpec {
        force_sigma: non_negative("force-sigma", a.force_sigma)?.unwrap_or(fs),
        torque_sigma: non_negative("torque-sigma", a.torque_sigma)?.unwrap_or(ts),
        ..NoiseSpec::pose(non_negative("pose-step", a.pose_step)?.unwrap_or(step))
    };
    if a.clean_wrench {
        noise.force_sigma = 0.0;
        noise.torque_sigma = 0.0;
    }
    let scenario = make_scenario(kind, truth, a.seed).with_duration(duration).with_rate(a.rate).with_noise(noise);
    let mut recording = scenario.realize()?.recording;
    if a.clean_wrench {
        recording = validation_recording(&recording, &truth, &filter)?;
    }
    write_atomic(&a.out, recording_to_csv(&recording).as_bytes())?;
    if let Some(p) = &a.truth_out {
        write_atomic(p, to_json(&ParamsFileV1::from(&truth))?.as_bytes())?;
    }
    println!(
        "simulated {} samples ({:?}, {duration} s at {} Hz, seed {}) -> {}",
        recording.len(),
        kind,
        a.rate,
        a.seed,
        a.out.display()
    );
    Ok(())
}

fn fmt_err(e: Option<pipest_core::diagnose::RelError>) -> String {
    e.map_or_else(|| "-".into(), |e| e.to_string())
}

fn estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let settings = settings(&a.solver)?;
    let scope = ParamScope::from(a.mode);
    let truth = a.gt.as_deref().map(load_ground_truth).transpose()?;
    let mode = mode_for(scope, truth.as_ref())?;
    let loaded = load_recording(&a.input)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let estimate = estimate_recording(&loaded.recording, a.method.into(), &mode, &settings)?;
    let report = build_report(&estimate, truth.as_ref(), a.data_kind.into(), &loaded.digest, &settings, !a.no_runtime);
    write_atomic(&a.out, to_json(&report)?.as_bytes())?;

    let p = &estimate.result.params;
    let mut line = format!(
        "{} {}: m={:.6} kg c=({:.6}, {:.6}, {:.6}) m cond={:.3e}",
        report.method, report.mode, p.mass, p.com.x, p.com.y, p.com.z, report.condition_number
    );
    if let Some(e) = &report.errors {
        let _ = write!(line, " e_m={} e_c={} e_I={}", fmt_err(e.mass), fmt_err(e.com), fmt_err(e.inertia));
    }
    for (set, name) in [
        (report.rank_flags.rank_deficient, "rank-deficient"),
        (report.rank_flags.non_physical, "non-physical"),
        (report.rank_flags.inertia_unidentifiable, "inertia-unidentifiable"),
    ] {
        if set {
            let _ = write!(line, " [{name}]");
        }
    }
    println!("{line}");
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<(), CliError> {
    let filter = filter_spec(&a.filter)?;
    let truth = load_ground_truth(&a.gt)?;
    let loaded = load_recording(&a.input)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let validated = validation_recording(&loaded.recording, &truth, &filter)?;
    write_atomic(&a.out, recording_to_csv(&validated).as_bytes())?;
    println!("validated {} samples -> {}", validated.len(), a.out.display());
    Ok(())
}

fn fmt_cond(c: f64) -> String {
    if c.is_finite() {
        format!("{c:.6e}")
    } else {
        "inf".into()
    }
}

pub fn diagnostics_text(d: &Diagnostics) -> String {
    let rows = [
        ("samples", d.sample_count.to_string()),
        ("rank", format!("{} / 10", d.rank)),
        ("condition", fmt_cond(d.condition_number)),
        ("mass condition", fmt_cond(d.mass_condition)),
        ("mass+com condition", fmt_cond(d.mass_com_condition)),
        ("inertia condition", fmt_cond(d.inertia_condition)),
        ("inertia identifiable", (!d.inertia_unidentifiable).to_string()),
        ("max |w| [rad/s]", format!("{:.6}", d.max_angular_velocity)),
        ("max |dw/dt| [rad/s^2]", format!("{:.6}", d.max_angular_acceleration)),
    ];
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    let filter = filter_spec(&a.filter)?;
    if !(0.0..0.5).contains(&a.trim) {
        return Err(CliError::Usage(format!("--trim {} must lie in [0, 0.5)", a.trim)));
    }
    let loaded = load_recording(&a.input)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let samples = prepare_samples(&loaded.recording, &filter, a.trim)?;
    let d = excitation_diagnostics(&build_system(&samples)?);
    let json = to_json(&d)?;
    if let Some(p) = &a.out {
        write_atomic(p, json.as_bytes())?;
    }
    if a.json {
        print!("{json}");
    } else {
        print!("{}", diagnostics_text(&d));
    }
    Ok(())
}

fn row_from_report(r: &ReportFileV1, path: &Path) -> Result<ComparisonRow, CliError> {
    let errors =
        r.errors.ok_or_else(|| CliError::Usage(format!("{}: report has no ground-truth errors", path.display())))?;
    Ok(ComparisonRow {
        method: r.method.clone(),
        mode: r.mode.clone(),
        data_kind: r.data_kind,
        errors: ErrorReport {
            mass: errors.mass,
            com: errors.com,
            inertia: errors.inertia,
            rank_deficient: r.rank_flags.rank_deficient,
            non_physical: r.rank_flags.non_physical,
        },
        runtime_ms: r.runtime_ms,
        condition_number: r.condition_number,
    })
}

/// One CSV per (mode, data kind): the groups of one bar chart.
fn plot_files(table: &ComparisonTable) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for row in &table.rows {
        let body = files
            .entry(format!("errors_{}_{}.csv", row.mode, row.data_kind))
            .or_insert_with(|| String::from("method,group,error\n"));
        for (group, e) in [("mass", row.errors.mass), ("com", row.errors.com), ("inertia", row.errors.inertia)] {
            if let Some(v) = e.and_then(|e| e.value()) {
                let _ = writeln!(body, "{},{group},{v:?}", row.method);
            }
        }
    }
    files
}

fn compare(a: &CompareArgs) -> Result<(), CliError> {
    let mut table = if a.sweep {
        let settings = settings(&a.solver)?;
        let kind = ScenarioKind::from(a.kind);
        let truth: InertialParams = match &a.gt {
            Some(p) => load_ground_truth(p)?,
            None => kind.default_truth(),
        };
        for (name, v) in [("force-sigma", a.force_sigma), ("torque-sigma", a.torque_sigma), ("pose-step", a.pose_step)]
        {
            non_negative(name, Some(v))?;
        }
        let sweep = Sweep {
            kind,
            seed: a.seed,
            duration: a.duration,
            truth,
            methods: a.methods.iter().map(|&m| m.into()).collect(),
            scopes: a.modes.iter().map(|&m| m.into()).collect(),
            data: a.data.iter().map(|&d| d.into()).collect(),
            noise: NoiseSpec::wrench(a.force_sigma, a.torque_sigma),
            pose_step: a.pose_step,
        };
        run_sweep(&sweep, &settings)?
    } else {
        let rows = a
            .reports
            .iter()
            .map(|p| load_report(p).and_then(|r| row_from_report(&r, p)))
            .collect::<Result<Vec<_>, _>>()?;
        ComparisonTable::from_rows(rows)
    };
    if a.no_runtime {
        for row in &mut table.rows {
            row.runtime_ms = None;
        }
    }
    let text = table.to_text();
    if let Some(p) = &a.out {
        write_atomic(p, to_json(&ComparisonFileV1::from(&table))?.as_bytes())?;
    }
    if let Some(p) = &a.text {
        write_atomic(p, text.as_bytes())?;
    }
    if let Some(dir) = &a.emit_plot_data {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for (name, body) in plot_files(&table) {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
    }
    print!("{text}");
    Ok(())
}
