//! Recording → samples → solver, shared by `estimate` and `compare --sweep`.

use pipest_core::diagnose::{
    build_comparison, excitation_diagnostics, scope_id, ComparisonTable, DataKind, Diagnostics, ErrorReport,
    LabeledResult,
};
use pipest_core::estimators::{
    mask_system, solve_brute_force, solve_least_squares, solve_levenberg_marquardt, solve_total_least_squares,
    EstimationMode, EstimationResult, GridSpec, LmOptions, LsOptions, ParamScope, SvdMode, TlsOptions,
};
use pipest_core::model::{build_system, InertialParams, KinematicSample, Wrench};
use pipest_core::signal::{prepare_samples, NoiseSpec, Recording, SavGolSpec};
use pipest_core::synth::{make_scenario, validation_recording, ScenarioKind};

use crate::error::CliError;
use crate::formats::{
    ParamsFileV1, RankFlags, ReportErrors, ReportFileV1, SettingsRecord, SCHEMA_VERSION, TOOL_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Ls,
    Tls,
    Lm,
    Brute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub trim: f64,
    pub filter: SavGolSpec,
    pub ls: LsOptions,
    pub tls: TlsOptions,
    pub lm: LmOptions,
    pub grid: GridSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            trim: 0.1,
            filter: SavGolSpec::default(),
            ls: LsOptions::default(),
            tls: TlsOptions::default(),
            lm: LmOptions::default(),
            grid: GridSpec::default(),
        }
    }
}

impl Settings {
    pub fn record(&self) -> SettingsRecord {
        SettingsRecord {
            trim: self.trim,
            sg_order: self.filter.order,
            sg_window: self.filter.window,
            sg_passes: self.filter.passes,
            tls_svd: match self.tls.svd {
                SvdMode::Fast => "fast".into(),
                SvdMode::Exact => "exact".into(),
            },
            tls_stride: self.tls.stride,
            column_scaling: self.ls.column_scaling,
            grid_span: self.grid.relative_span,
            grid_points: self.grid.points,
        }
    }
}

pub fn mode_for(scope: ParamScope, truth: Option<&InertialParams>) -> Result<EstimationMode, CliError> {
    match (scope, truth) {
        (ParamScope::FullPip, _) => Ok(EstimationMode::full()),
        (ParamScope::MassOnly, Some(t)) => Ok(EstimationMode::mass_only(*t)),
        (ParamScope::MassCom, Some(t)) => Ok(EstimationMode::mass_com(*t)),
        (s, None) => Err(CliError::Usage(format!("--gt is required for mode {}", scope_id(s)))),
    }
}

pub fn run_solver(
    samples: &[(KinematicSample, Wrench)],
    method: MethodChoice,
    mode: &EstimationMode,
    settings: &Settings,
) -> Result<EstimationResult, CliError> {
    let linear = |samples: &[(KinematicSample, Wrench)]| -> Result<_, CliError> {
        Ok(mask_system(&build_system(samples)?, mode)?)
    };
    Ok(match method {
        MethodChoice::Ls => solve_least_squares(&linear(samples)?, &settings.ls)?,
        MethodChoice::Tls => solve_total_least_squares(&linear(samples)?, &settings.tls)?,
        MethodChoice::Lm => solve_levenberg_marquardt(samples, mode, &settings.lm)?,
        MethodChoice::Brute => solve_brute_force(samples, mode, &settings.grid)?,
    })
}

pub struct Estimate {
    pub result: EstimationResult,
    pub diagnostics: Diagnostics,
}

pub fn estimate_recording(
    rec: &Recording,
    method: MethodChoice,
    mode: &EstimationMode,
    settings: &Settings,
) -> Result<Estimate, CliError> {
    if method == MethodChoice::Brute && mode.scope == ParamScope::FullPip {
        return Err(CliError::Solver(format!("unsupported mode {} for brute force", scope_id(mode.scope))));
    }
    let samples = prepare_samples(rec, &settings.filter, settings.trim)?;
    let diagnostics = excitation_diagnostics(&build_system(&samples)?);
    let result = run_solver(&samples, method, mode, settings)?;
    Ok(Estimate { result, diagnostics })
}

pub fn build_report(
    estimate: &Estimate,
    truth: Option<&InertialParams>,
    data_kind: DataKind,
    input_digest: &str,
    settings: &Settings,
    with_runtime: bool,
) -> ReportFileV1 {
    let r = &estimate.result;
    let errors = truth.map(|t| ErrorReport::for_result(r, t));
    ReportFileV1 {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.into(),
        input_digest: input_digest.into(),
        method: r.method.id().into(),
        mode: scope_id(r.mode.scope).into(),
        data_kind,
        estimated: ParamsFileV1::from(&r.params),
        truth: truth.map(ParamsFileV1::from),
        errors: errors.map(|e| ReportErrors { mass: e.mass, com: e.com, inertia: e.inertia }),
        condition_number: r.condition_number,
        rank_flags: RankFlags {
            rank_deficient: r.rank_deficient,
            non_physical: !pipest_core::model::physical_consistency(&r.params).is_consistent(),
            inertia_unidentifiable: estimate.diagnostics.inertia_unidentifiable,
        },
        residual_norm: r.residual_norm,
        iterations: r.iterations,
        converged: r.converged,
        rows_used: r.rows_used,
        runtime_ms: with_runtime.then_some(r.runtime.as_secs_f64() * 1e3),
        settings: settings.record(),
    }
}

/// Synthetic experiment grid for `compare --sweep`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub duration: Option<f64>,
    pub truth: InertialParams,
    pub methods: Vec<MethodChoice>,
    pub scopes: Vec<ParamScope>,
    pub data: Vec<DataKind>,
    /// Wrench noise of the measured data set.
    pub noise: NoiseSpec,
    /// Pose quantization applied to both data sets.
    pub pose_step: f64,
}

/// Validation data carries model wrenches computed from the differentiated
/// poses; measured data carries the true wrenches plus sensor noise. Both
/// share the trajectory and its pose discretization.
pub fn run_sweep(sweep: &Sweep, settings: &Settings) -> Result<ComparisonTable, CliError> {
    let mut results = Vec::new();
    for &data_kind in &sweep.data {
        let pose = NoiseSpec::pose(sweep.pose_step);
        let noise = match data_kind {
            DataKind::Validation => pose,
            DataKind::Measured => sweep.noise.with_pose_of(&pose),
        };
        let mut scenario = make_scenario(sweep.kind, sweep.truth, sweep.seed).with_noise(noise);
        if let Some(d) = sweep.duration {
            scenario = scenario.with_duration(d);
        }
        let mut recording = scenario.realize()?.recording;
        if data_kind == DataKind::Validation {
            recording = validation_recording(&recording, &sweep.truth, &settings.filter)?;
        }
        let samples = prepare_samples(&recording, &settings.filter, settings.trim)?;
        for &scope in &sweep.scopes {
            let mode = mode_for(scope, Some(&sweep.truth))?;
            for &method in &sweep.methods {
                let result = run_solver(&samples, method, &mode, settings)?;
                results.push(LabeledResult { result, data_kind });
            }
        }
    }
    build_comparison(&results, Some(&sweep.truth)).map_err(|e| CliError::Usage(e.to_string()))
}
