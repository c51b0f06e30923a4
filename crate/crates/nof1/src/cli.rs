//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::error;

use crate::config::{
    ConfigFile, FitOverrides, FitSettings, PreprocessOverrides, PreprocessSettings,
};
use crate::error::{CliError, Result};
use crate::pipeline::{self, AnovaSettings, DescribeSettings, IngestSettings, SynthSettings};

#[derive(Debug, Parser)]
#[command(
    name = "nof1",
    version,
    about = "Per-participant Bayesian analysis of N-of-1 gait trials"
)]
pub struct Cli {
    /// Emit log records as JSON lines on stderr.
    #[arg(long, global = true)]
    pub json_logs: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess a stride file into per-participant model series.
    Ingest(IngestArgs),
    /// Per-condition stride counts, means and SDs.
    Describe(DescribeArgs),
    /// Two-way repeated-measures ANOVA on participant cell means.
    Anova(AnovaArgs),
    /// Fit one model per participant and outcome.
    Fit(FitArgs),
    /// PSRF and ESS tables for a fit directory, flagging non-converged fits.
    Diagnose(DiagnoseArgs),
    /// Posterior predictive condition means and SDs against the data.
    Ppc(PpcArgs),
    /// Condition-mean posteriors and pairwise-difference heatmap data.
    Report(ReportArgs),
    /// Simulate a study in the input format, with true parameters.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory; must be absent or empty.
    #[arg(short, long, value_name = "DIR")]
    pub out: PathBuf,

    /// Replace the contents of a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Default, Args)]
pub struct PreprocessArgs {
    /// Foot whose strides are modeled (left or right).
    #[arg(long)]
    pub foot: Option<String>,

    /// Keep every k-th stride per condition block.
    #[arg(long, value_name = "K")]
    pub downsample: Option<usize>,

    /// Drop strides farther than this many block SDs from the block mean.
    #[arg(long, value_name = "SD")]
    pub outlier_sd: Option<f64>,
}

impl PreprocessArgs {
    fn overrides(&self) -> PreprocessOverrides {
        PreprocessOverrides {
            foot: self.foot.clone(),
            downsample: self.downsample,
            outlier_sd: self.outlier_sd,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Stride CSV.
    pub input: PathBuf,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    /// TOML config file; only its `[preprocess]` table is used here.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AnovaArgs {
    pub input: PathBuf,

    /// Strides entering the cell means: both, left or right.
    #[arg(long, default_value = "both")]
    pub foot: String,

    /// Use the preprocessed series (foot filter, outlier removal,
    /// downsampling) instead of raw strides.
    #[arg(long)]
    pub preprocessed: bool,

    #[arg(long, value_name = "SD", requires = "preprocessed")]
    pub outlier_sd: Option<f64>,

    #[arg(long, value_name = "K", requires = "preprocessed")]
    pub downsample: Option<usize>,

    /// Outcomes to analyze (stride_length, stride_time).
    #[arg(long, value_delimiter = ',')]
    pub outcome: Option<Vec<String>>,

    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,

    /// basic, time or ar1.
    #[arg(long)]
    pub model: Option<String>,

    /// noninformative or informative.
    #[arg(long)]
    pub priors: Option<String>,

    /// AR(1) covariance form: stationary or supplement.
    #[arg(long)]
    pub cov_form: Option<String>,

    #[arg(long)]
    pub chains: Option<usize>,

    /// Kept draws per chain.
    #[arg(long)]
    pub iters: Option<usize>,

    #[arg(long)]
    pub burn_in: Option<usize>,

    #[arg(long)]
    pub thin: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_delimiter = ',')]
    pub outcome: Option<Vec<String>>,

    /// Comma separated participant ids; default is everyone.
    #[arg(long, value_delimiter = ',')]
    pub participants: Option<Vec<String>>,

    #[command(flatten)]
    pub preprocess: PreprocessArgs,

    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Exit with status 3 if any fit is not converged.
    #[arg(long)]
    pub strict: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Output directory of a `fit` run.
    pub fit_dir: PathBuf,
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PpcArgs {
    pub fit_dir: PathBuf,
    /// Stride CSV to compare against; defaults to the one the fit used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub fit_dir: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub participants: usize,
    /// Strides per condition block.
    #[arg(long, default_value_t = 50)]
    pub strides: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    path.map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "{} is not a readable file",
            p.display()
        )))
    }
}

/// Refuses output directories that would overwrite or contain an input.
fn guard_output(out: &OutputArgs, inputs: &[&Path]) -> Result<()> {
    let out_abs = std::path::absolute(&out.out).map_err(|e| CliError::io(&out.out, e))?;
    for input in inputs {
        let abs = std::path::absolute(input).map_err(|e| CliError::io(*input, e))?;
        if abs.starts_with(&out_abs) {
            return Err(CliError::Invalid(format!(
                "output directory {} contains the input {}",
                out.out.display(),
                input.display()
            )));
        }
    }
    pipeline::prepare_output(&out.out, out.force)
}

fn strict_check(report: &pipeline::FitReport, strict: bool) -> Result<()> {
    if strict {
        report.require_converged()
    } else {
        Ok(())
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            require_file(&a.input)?;
            let file = load_config(a.config.as_deref())?;
            let settings = IngestSettings {
                input: path_str(&a.input),
                preprocess: PreprocessSettings::resolve(
                    &file.preprocess,
                    &a.preprocess.overrides(),
                )?,
            };
            guard_output(&a.output, &[&a.input])?;
            pipeline::run_ingest(&settings, &a.output.out)?;
        }
        Command::Describe(a) => {
            require_file(&a.input)?;
            guard_output(&a.output, &[&a.input])?;
            pipeline::run_describe(
                &DescribeSettings {
                    input: path_str(&a.input),
                },
                &a.output.out,
            )?;
        }
        Command::Anova(a) => {
            require_file(&a.input)?;
            let file = load_config(a.config.as_deref())?;
            pipeline::parse_foot_filter(&a.foot)?;
            let preprocess = if a.preprocessed {
                let foot = match a.foot.trim().to_ascii_lowercase().as_str() {
                    "both" => None,
                    f => Some(f.to_string()),
                };
                let flags = PreprocessOverrides {
                    foot,
                    downsample: a.downsample,
                    outlier_sd: a.outlier_sd,
                };
                Some(PreprocessSettings::resolve(&file.preprocess, &flags)?)
            } else {
                None
            };
            let outcomes = a
                .outcome
                .clone()
                .or(file.outcomes.clone())
                .unwrap_or_else(|| {
                    nof1_core::Outcome::ALL
                        .iter()
                        .map(|o| o.label().to_string())
                        .collect()
                });
            for o in &outcomes {
                o.parse::<nof1_core::Outcome>()?;
            }
            let settings = AnovaSettings {
                input: path_str(&a.input),
                outcomes,
                foot: preprocess
                    .as_ref()
                    .map_or_else(|| a.foot.trim().to_ascii_lowercase(), |p| p.foot.clone()),
                preprocess,
            };
            guard_output(&a.output, &[&a.input])?;
            pipeline::run_anova(&settings, &a.output.out)?;
        }
        Command::Fit(a) => {
            require_file(&a.input)?;
            let file = load_config(a.config.as_deref())?;
            let flags = FitOverrides {
                model: a.model,
                priors: a.priors,
                cov_form: a.cov_form,
                outcomes: a.outcome,
                participants: a.participants,
                chains: a.chains,
                iters: a.iters,
                burn_in: a.burn_in,
                thin: a.thin,
                seed: a.seed,
                preprocess: a.preprocess.overrides(),
            };
            let settings = FitSettings::resolve(&path_str(&a.input), &file, &flags)?;
            guard_output(&a.output, &[&a.input])?;
            let report = pipeline::run_fit(&settings, &a.output.out)?;
            strict_check(&report, a.strict)?;
        }
        Command::Diagnose(a) => {
            guard_output(&a.output, &[&a.fit_dir])?;
            let report = pipeline::run_diagnose(&a.fit_dir, &a.output.out)?;
            strict_check(&report, a.strict)?;
        }
        Command::Ppc(a) => {
            if let Some(p) = &a.input {
                require_file(p)?;
            }
            guard_output(&a.output, &[&a.fit_dir])?;
            pipeline::run_ppc(
                &a.fit_dir,
                a.input.as_deref().map(path_str).as_deref(),
                &a.output.out,
            )?;
        }
        Command::Report(a) => {
            guard_output(&a.output, &[&a.fit_dir])?;
            pipeline::run_report(&a.fit_dir, &a.output.out)?;
        }
        Command::Synth(a) => {
            let settings = SynthSettings {
                participants: a.participants,
                strides_per_condition: a.strides,
                seed: a.seed,
            };
            guard_output(&a.output, &[])?;
            pipeline::run_synth(&settings, &a.output.out)?;
        }
    }
    Ok(())
}

fn init_logging(json: bool) {
    let mut builder =
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if json {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "timestamp": buf.timestamp().to_string(),
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    // A second initialization (as in tests) keeps the first logger.
    let _ = builder.try_init();
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code().clamp(0, 255) as u8;
        }
    };
    let json = cli.json_logs;
    init_logging(json);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            if json {
                error!("{e}");
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}
