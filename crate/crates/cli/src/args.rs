use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pipest_core::diagnose::DataKind;
use pipest_core::estimators::{ParamScope, SvdMode};
use pipest_core::synth::ScenarioKind;

use crate::pipeline::MethodChoice;

#[derive(Debug, Parser)]
#[command(name = "pipest", version, about = "Payload inertial parameter estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording and its ground-truth parameters.
    Simulate(SimulateArgs),
    /// Estimate payload parameters from a recording.
    Estimate(EstimateArgs),
    /// Replace a recording's wrenches with model wrenches from its own kinematics.
    Validate(ValidateArgs),
    /// Report excitation and identifiability of a recording.
    Diagnose(DiagnoseArgs),
    /// Tabulate reports, or run a synthetic method comparison.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Predefined,
    PickPlace,
    Free,
}

impl From<KindArg> for ScenarioKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Predefined => ScenarioKind::Predefined,
            KindArg::PickPlace => ScenarioKind::PickPlaceLike,
            KindArg::Free => ScenarioKind::FreeMotionLike,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ls,
    Tls,
    Lm,
    Brute,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ls => MethodChoice::Ls,
            MethodArg::Tls => MethodChoice::Tls,
            MethodArg::Lm => MethodChoice::Lm,
            MethodArg::Brute => MethodChoice::Brute,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mass,
    MassCom,
    Full,
}

impl From<ModeArg> for ParamScope {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mass => ParamScope::MassOnly,
            ModeArg::MassCom => ParamScope::MassCom,
            ModeArg::Full => ParamScope::FullPip,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SvdArg {
    Fast,
    Exact,
}

impl From<SvdArg> for SvdMode {
    fn from(s: SvdArg) -> Self {
        match s {
            SvdArg::Fast => SvdMode::Fast,
            SvdArg::Exact => SvdMode::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DataArg {
    Validation,
    Measured,
}

impl From<DataArg> for DataKind {
    fn from(d: DataArg) -> Self {
        match d {
            DataArg::Validation => DataKind::Validation,
            DataArg::Measured => DataKind::Measured,
        }
    }
}

/// Savitzky-Golay settings for velocity smoothing.
#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[arg(long, default_value_t = 11)]
    pub sg_window: usize,
    #[arg(long, default_value_t = 3)]
    pub sg_order: usize,
    /// Filter passes; 0 disables smoothing, more than 1 smooths harder.
    #[arg(long, default_value_t = 1)]
    pub sg_passes: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Fraction of samples dropped at each end.
    #[arg(long, default_value_t = 0.1)]
    pub trim: f64,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, value_enum, default_value_t = SvdArg::Fast)]
    pub tls_svd: SvdArg,
    /// Sample stride of the fast TLS mode.
    #[arg(long, default_value_t = 10)]
    pub tls_stride: usize,
    /// Scale regressor columns to unit norm before least squares.
    #[arg(long)]
    pub column_scaling: bool,
    /// Brute-force half-width relative to the ground truth.
    #[arg(long, default_value_t = 0.2)]
    pub grid_span: f64,
    /// Brute-force points per dimension (default 101 for mass, 11 for mass-com).
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Predefined)]
    pub kind: KindArg,
    /// Seconds; defaults to 20 for predefined and 10 otherwise.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 1000.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth parameters; defaults to the scenario's nominal payload.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Recording CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the ground-truth parameters.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    /// Apply the default sensor model: 0.1 N, 0.01 N·m, 1e-5 pose steps.
    #[arg(long)]
    pub noise: bool,
    #[arg(long)]
    pub force_sigma: Option<f64>,
    #[arg(long)]
    pub torque_sigma: Option<f64>,
    /// Pose quantization step (position [m] and quaternion components).
    #[arg(long)]
    pub pose_step: Option<f64>,
    /// Write model wrenches computed from the recording's own
    /// differentiated poses instead of sensor wrenches (validation data).
    #[arg(long)]
    pub clean_wrench: bool,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    /// Ground-truth parameters; required unless the mode is full.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DataArg::Measured)]
    pub data_kind: DataArg,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Leave the runtime out of the report for reproducible output.
    #[arg(long)]
    pub no_runtime: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub trim: f64,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Diagnostics JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Report files to tabulate.
    pub reports: Vec<PathBuf>,
    /// Simulate and estimate instead of reading reports.
    #[arg(long, conflicts_with = "reports")]
    pub sweep: bool,
    #[arg(long, value_enum, default_value_t = KindArg::Predefined)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Ls, MethodArg::Lm])]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Full])]
    pub modes: Vec<ModeArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [DataArg::Validation, DataArg::Measured])]
    pub data: Vec<DataArg>,
    /// Force noise of the measured data set [N].
    #[arg(long, default_value_t = 0.1)]
    pub force_sigma: f64,
    /// Torque noise of the measured data set [N·m].
    #[arg(long, default_value_t = 0.01)]
    pub torque_sigma: f64,
    /// Pose quantization step of both data sets.
    #[arg(long, default_value_t = 0.0)]
    pub pose_step: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comparison JSON to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aligned text table to write (also printed).
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Directory for per-figure CSV series (method, group, error).
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
    #[arg(long)]
    pub no_runtime: bool,
}
