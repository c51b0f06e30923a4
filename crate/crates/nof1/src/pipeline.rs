//! The work behind each subcommand. Every function reads its inputs, writes
//! its files into a fresh output directory and returns a short summary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nof1_core::diagnostics::{condition_posteriors, ConditionDiffs, ParameterSummary};
use nof1_core::mcmc::{Chain, FitMeta, Sampler};
use nof1_core::population::CellMeans;
use nof1_core::synth::ParticipantTruth;
use nof1_core::{
    condition_diff_matrix, describe, generate_study, posterior_predictive, preprocess,
    rm_anova_2x2, summarize, Effect, Foot, Outcome, PosteriorChains, PosteriorSummary,
    Preprocessed, StrideRecord, StudySpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FitSettings, PreprocessSettings};
use crate::error::{CliError, Result};
use crate::formats::{fmt_f64, fmt_opt, read_strides, write_strides, Header, Table};

pub const RUN_FILE: &str = "run.toml";
pub const FITS_INDEX: &str = "fits.csv";
pub const FITS_DIR: &str = "fits";

const SUMMARY_COLUMNS: [&str; 11] = [
    "parameter",
    "mean",
    "sd",
    "q2.5",
    "q25",
    "q50",
    "q75",
    "q97.5",
    "psrf",
    "psrf_upper",
    "ess",
];

/// Makes `dir` ready for a run. An existing non-empty directory is an error
/// unless `force` is set, in which case its contents are removed.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Invalid(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        let non_empty = fs::read_dir(dir)
            .map_err(|e| CliError::io(dir, e))?
            .next()
            .is_some();
        if non_empty {
            if !force {
                return Err(CliError::Invalid(format!(
                    "output directory {} is not empty; choose a new one or pass --force",
                    dir.display()
                )));
            }
            fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn header<T: Serialize>(command: &str, settings: &T) -> Header {
    let text = toml::to_string(settings).expect("settings serialize to TOML");
    Header::from_text(
        &format!("nof1 {} {command}", env!("CARGO_PKG_VERSION")),
        &text,
    )
}

fn load_records(input: &Path) -> Result<Vec<StrideRecord>> {
    let records = read_strides(input)?;
    if records.is_empty() {
        return Err(CliError::Invalid(format!(
            "{} holds no strides",
            input.display()
        )));
    }
    info!("read {} strides from {}", records.len(), input.display());
    Ok(records)
}

fn run_preprocess(records: &[StrideRecord], settings: &PreprocessSettings) -> Result<Preprocessed> {
    let data = preprocess(records, &settings.to_config()?)?;
    for w in &data.warnings {
        warn!("{w}");
    }
    if data.participants.is_empty() {
        return Err(CliError::Invalid(
            "no participant has strides in all four conditions".into(),
        ));
    }
    Ok(data)
}

fn warnings_table(messages: impl IntoIterator<Item = String>) -> Table {
    let mut t = Table::new(&["message"]);
    for m in messages {
        t.push(vec![m]);
    }
    t
}

// ---------------------------------------------------------------- ingest

#[derive(Clone, Debug, Serialize)]
pub struct IngestSettings {
    pub input: String,
    pub preprocess: PreprocessSettings,
}

/// Writes `series.csv` (the preprocessed model input) and `warnings.csv`.
pub fn run_ingest(settings: &IngestSettings, out: &Path) -> Result<usize> {
    let records = load_records(Path::new(&settings.input))?;
    let data = run_preprocess(&records, &settings.preprocess)?;
    let head = header("ingest", settings);
    let mut t = Table::new(&[
        "participant_id",
        "outcome",
        "condition",
        "sequence_index",
        "value",
    ]);
    for (pid, series) in &data.participants {
        for outcome in Outcome::ALL {
            for obs in series.get(outcome).observations() {
                t.push(vec![
                    pid.clone(),
                    outcome.label().into(),
                    obs.condition.label().into(),
                    obs.sequence_index.to_string(),
                    fmt_f64(obs.value),
                ]);
            }
        }
    }
    t.write(&out.join("series.csv"), &head)?;
    warnings_table(data.warnings.iter().map(ToString::to_string))
        .write(&out.join("warnings.csv"), &head)?;
    Ok(data.participants.len())
}

// ---------------------------------------------------------------- describe

#[derive(Clone, Debug, Serialize)]
pub struct DescribeSettings {
    pub input: String,
}

pub fn run_describe(settings: &DescribeSettings, out: &Path) -> Result<()> {
    let records = load_records(Path::new(&settings.input))?;
    let mut t = Table::new(&["condition", "n", "sl_mean", "sl_sd", "st_mean", "st_sd"]);
    for d in describe(&records)? {
        t.push(vec![
            d.condition.label().into(),
            d.n.to_string(),
            fmt_f64(d.stride_length.mean),
            fmt_f64(d.stride_length.sd),
            fmt_f64(d.stride_time.mean),
            fmt_f64(d.stride_time.sd),
        ]);
    }
    t.write(&out.join("describe.csv"), &header("describe", settings))
}

// ---------------------------------------------------------------- anova

#[derive(Clone, Debug, Serialize)]
pub struct AnovaSettings {
    pub input: String,
    pub outcomes: Vec<String>,
    /// `both`, `left` or `right`; with `preprocess` set it repeats the
    /// preprocessing foot.
    pub foot: String,
    /// When set, cell means come from the preprocessed series instead of the
    /// raw strides.
    pub preprocess: Option<PreprocessSettings>,
}

pub fn parse_foot_filter(s: &str) -> Result<Option<Foot>> {
    if s.trim().eq_ignore_ascii_case("both") {
        Ok(None)
    } else {
        Ok(Some(s.parse()?))
    }
}

/// Writes `anova_<outcome>.csv` per outcome plus `warnings.csv`.
pub fn run_anova(settings: &AnovaSettings, out: &Path) -> Result<()> {
    let records = load_records(Path::new(&settings.input))?;
    let head = header("anova", settings);
    let foot = parse_foot_filter(&settings.foot)?;
    let data = match &settings.preprocess {
        Some(p) => Some(run_preprocess(&records, p)?),
        None => None,
    };
    let mut warnings = Vec::new();
    for label in &settings.outcomes {
        let outcome: Outcome = label.parse()?;
        let cells = match &data {
            Some(d) => CellMeans::from_preprocessed(d, outcome),
            None => CellMeans::from_records(&records, outcome, foot),
        };
        for w in &cells.warnings {
            warn!("{w}");
            warnings.push(format!("{}: {w}", outcome.label()));
        }
        let result = rm_anova_2x2(&cells)?;
        let mut t = Table::new(&["effect", "F", "df1", "df2", "p", "ges"]);
        for effect in Effect::ALL {
            let r = result.get(effect);
            t.push(vec![
                effect.label().into(),
                fmt_f64(r.f),
                r.df1.to_string(),
                r.df2.to_string(),
                fmt_f64(r.p),
                fmt_f64(r.ges),
            ]);
        }
        t.write(&out.join(format!("anova_{}.csv", outcome.label())), &head)?;
    }
    warnings_table(warnings).write(&out.join("warnings.csv"), &head)
}

// ---------------------------------------------------------------- fit

/// One row of `fits.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub participant_id: String,
    pub outcome: String,
    pub model: String,
    pub n_obs: usize,
    pub chains_file: String,
    pub summary_file: String,
}

impl FitRecord {
    pub fn outcome(&self) -> Result<Outcome> {
        Ok(self.outcome.parse()?)
    }
}

/// Convergence verdict of one fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convergence {
    Converged,
    NotConverged,
    /// No PSRF could be computed, for example with a single chain.
    Unassessed,
}

impl Convergence {
    pub fn of(summary: &PosteriorSummary) -> Self {
        if summary.converged() {
            Convergence::Converged
        } else if summary
            .parameters
            .iter()
            .any(|p| p.converged() == Some(false))
        {
            Convergence::NotConverged
        } else {
            Convergence::Unassessed
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Convergence::Converged => "converged",
            Convergence::NotConverged => "not_converged",
            Convergence::Unassessed => "unassessed",
        }
    }
}

/// Summary of a finished `fit` or `diagnose` run.
#[derive(Clone, Debug)]
pub struct FitReport {
    pub fits: Vec<(FitRecord, Convergence)>,
}

impl FitReport {
    pub fn flagged(&self) -> Vec<String> {
        self.fits
            .iter()
            .filter(|(_, c)| *c != Convergence::Converged)
            .map(|(r, c)| format!("{}/{} ({})", r.participant_id, r.outcome, c.label()))
            .collect()
    }

    /// The `--strict` check.
    pub fn require_converged(&self) -> Result<()> {
        let flagged = self.flagged();
        if flagged.is_empty() {
            Ok(())
        } else {
            Err(CliError::NotConverged {
                count: flagged.len(),
                fits: flagged.join(", "),
            })
        }
    }
}

fn file_stem(pid: &str) -> String {
    pid.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn chains_table(chains: &PosteriorChains) -> Table {
    let mut t = Table::new(&["chain", "iteration", "parameter", "value"]);
    for (c, chain) in chains.chains.iter().enumerate() {
        for it in 0..chains.n_iterations() {
            for (k, name) in chains.parameter_names.iter().enumerate() {
                t.push(vec![
                    (c + 1).to_string(),
                    (it + 1).to_string(),
                    name.clone(),
                    fmt_f64(chain.draws[k][it]),
                ]);
            }
        }
    }
    t
}

fn summary_row(p: &ParameterSummary) -> Vec<String> {
    let mut row = vec![p.name.clone(), fmt_f64(p.mean), fmt_f64(p.sd)];
    row.extend(p.quantiles.iter().map(|&q| fmt_f64(q)));
    row.push(fmt_opt(p.psrf.map(|x| x.point)));
    row.push(fmt_opt(p.psrf.map(|x| x.upper)));
    row.push(fmt_opt(p.ess.map(|x| x.value)));
    row
}

fn summary_table(summary: &PosteriorSummary) -> Table {
    let mut t = Table::new(&SUMMARY_COLUMNS);
    for p in &summary.parameters {
        t.push(summary_row(p));
    }
    t
}

fn convergence_table(rows: &[(FitRecord, PosteriorSummary)]) -> Table {
    let mut t = Table::new(&[
        "participant_id",
        "outcome",
        "status",
        "unconverged_parameters",
    ]);
    for (r, s) in rows {
        t.push(vec![
            r.participant_id.clone(),
            r.outcome.clone(),
            Convergence::of(s).label().into(),
            s.unconverged().join(";"),
        ]);
    }
    t
}

fn index_table(records: &[FitRecord]) -> Table {
    let mut t = Table::new(&[
        "participant_id",
        "outcome",
        "model",
        "n_obs",
        "chains_file",
        "summary_file",
    ]);
    for r in records {
        t.push(vec![
            r.participant_id.clone(),
            r.outcome.clone(),
            r.model.clone(),
            r.n_obs.to_string(),
            r.chains_file.clone(),
            r.summary_file.clone(),
        ]);
    }
    t
}

fn fit_header(command: &str, settings: &FitSettings) -> Header {
    Header::from_text(
        &format!("nof1 {} {command}", env!("CARGO_PKG_VERSION")),
        &settings.to_toml(),
    )
}

/// Fits every selected participant and outcome. Fits run in parallel; each
/// one writes its own files, and the index files are written afterwards in
/// a fixed order, so output never depends on scheduling.
pub fn run_fit(settings: &FitSettings, out: &Path) -> Result<FitReport> {
    let records = load_records(Path::new(&settings.input))?;
    let data = run_preprocess(&records, &settings.preprocess)?;
    let selected: Vec<&String> = if settings.participants.is_empty() {
        data.participants.keys().collect()
    } else {
        for pid in &settings.participants {
            if !data.participants.contains_key(pid) {
                return Err(CliError::Invalid(format!(
                    "participant `{pid}` is not in the preprocessed data"
                )));
            }
        }
        settings.participants.iter().collect()
    };
    let outcomes = settings.outcomes()?;
    let mut stems = BTreeSet::new();
    for pid in &selected {
        if !stems.insert(file_stem(pid)) {
            return Err(CliError::Invalid(format!(
                "participant ids collide as file names near `{pid}`"
            )));
        }
    }

    let config = settings.sampler.to_config();
    let head = fit_header("fit", settings);
    let fits_dir = out.join(FITS_DIR);
    fs::create_dir_all(&fits_dir).map_err(|e| CliError::io(&fits_dir, e))?;

    let jobs: Vec<(&String, Outcome)> = selected
        .iter()
        .flat_map(|pid| outcomes.iter().map(move |&o| (*pid, o)))
        .collect();
    info!(
        "fitting {} series with the {} model",
        jobs.len(),
        settings.model
    );

    let results: Vec<(FitRecord, PosteriorSummary)> = jobs
        .par_iter()
        .map(|&(pid, outcome)| -> Result<(FitRecord, PosteriorSummary)> {
            let series = data.participants[pid].get(outcome);
            let model = settings.model_spec(outcome)?;
            let chains = Sampler::new(&model, series)?.run(&config).map_err(|e| {
                CliError::Runtime(format!("participant {pid}, {}: {e}", outcome.label()))
            })?;
            let summary = summarize(&chains);
            let stem = format!("{}_{}", file_stem(pid), outcome.label());
            let record = FitRecord {
                participant_id: pid.clone(),
                outcome: outcome.label().into(),
                model: settings.model.clone(),
                n_obs: series.len(),
                chains_file: format!("{FITS_DIR}/{stem}_chains.csv"),
                summary_file: format!("{FITS_DIR}/{stem}_summary.csv"),
            };
            chains_table(&chains).write(&out.join(&record.chains_file), &head)?;
            summary_table(&summary).write(&out.join(&record.summary_file), &head)?;
            for chain in &chains.chains {
                for (name, rate) in &chain.acceptance {
                    if !(0.15..=0.7).contains(rate) {
                        warn!(
                            "participant {pid}, {}: {name} acceptance rate {rate:.2}",
                            outcome.label()
                        );
                    }
                }
            }
            info!(
                "participant {pid}, {}: {}",
                outcome.label(),
                Convergence::of(&summary).label()
            );
            Ok((record, summary))
        })
        .collect::<Result<_>>()?;

    let index: Vec<FitRecord> = results.iter().map(|(r, _)| r.clone()).collect();
    index_table(&index).write(&out.join(FITS_INDEX), &head)?;
    convergence_table(&results).write(&out.join("convergence.csv"), &head)?;
    let run_path = out.join(RUN_FILE);
    fs::write(&run_path, settings.to_toml()).map_err(|e| CliError::io(&run_path, e))?;

    let report = FitReport {
        fits: results
            .iter()
            .map(|(r, s)| (r.clone(), Convergence::of(s)))
            .collect(),
    };
    for f in report.flagged() {
        warn!("flagged fit: {f}");
    }
    Ok(report)
}

// ---------------------------------------------------------------- fit directories

/// A finished `fit` output directory.
#[derive(Clone, Debug)]
pub struct FitDir {
    pub root: PathBuf,
    pub settings: FitSettings,
    pub fits: Vec<FitRecord>,
}

impl FitDir {
    pub fn load(root: &Path) -> Result<Self> {
        let run_path = root.join(RUN_FILE);
        let text = fs::read_to_string(&run_path).map_err(|e| CliError::io(&run_path, e))?;
        let settings = FitSettings::from_toml(&text)?;
        let table = Table::read(&root.join(FITS_INDEX))?;
        let col = |name| table.column(name);
        let (pid, outcome, model, n_obs, chains, summary) = (
            col("participant_id")?,
            col("outcome")?,
            col("model")?,
            col("n_obs")?,
            col("chains_file")?,
            col("summary_file")?,
        );
        let fits = table
            .rows
            .iter()
            .map(|row| {
                Ok(FitRecord {
                    participant_id: row[pid].clone(),
                    outcome: row[outcome].clone(),
                    model: row[model].clone(),
                    n_obs: row[n_obs].parse().map_err(|_| {
                        CliError::Invalid(format!("bad n_obs `{}` in {FITS_INDEX}", row[n_obs]))
                    })?,
                    chains_file: row[chains].clone(),
                    summary_file: row[summary].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FitDir {
            root: root.to_path_buf(),
            settings,
            fits,
        })
    }

    /// Reads the draws of one fit back from its chains file.
    pub fn chains(&self, record: &FitRecord) -> Result<PosteriorChains> {
        let outcome = record.outcome()?;
        let model = self.settings.model_spec(outcome)?;
        let names = model.parameter_names();
        let path = self.root.join(&record.chains_file);
        let table = Table::read(&path)?;
        let (ci, ii, pi, vi) = (
            table.column("chain")?,
            table.column("iteration")?,
            table.column("parameter")?,
            table.column("value")?,
        );
        let config = self.settings.sampler.to_config();
        let mut chains: Vec<Chain> = Vec::new();
        for (line, row) in table.rows.iter().enumerate() {
            let bad = |what: &str| CliError::Parse {
                path: path.clone(),
                line: line as u64 + 2,
                message: format!("invalid {what}"),
            };
            let c: usize = row[ci].parse().map_err(|_| bad("chain"))?;
            let it: usize = row[ii].parse().map_err(|_| bad("iteration"))?;
            let k = names
                .iter()
                .position(|n| *n == row[pi])
                .ok_or_else(|| bad("parameter"))?;
            let v: f64 = row[vi].parse().map_err(|_| bad("value"))?;
            if c == chains.len() + 1 {
                chains.push(Chain {
                    draws: vec![Vec::with_capacity(config.n_iterations); names.len()],
                    acceptance: Vec::new(),
                });
            }
            if c == 0 || c > chains.len() || chains[c - 1].draws[k].len() + 1 != it {
                return Err(bad("row order"));
            }
            chains[c - 1].draws[k].push(v);
        }
        let meta = FitMeta {
            participant_id: record.participant_id.clone(),
            outcome,
            variant: model.variant,
            covariance: model.covariance,
            n_obs: record.n_obs,
        };
        Ok(PosteriorChains::new(meta, names, chains, config)?)
    }

    /// Loads and summarizes every fit, in index order, in parallel.
    pub fn summaries(&self) -> Result<Vec<(FitRecord, PosteriorChains, PosteriorSummary)>> {
        self.fits
            .par_iter()
            .map(|r| {
                let chains = self.chains(r)?;
                let summary = summarize(&chains);
                Ok((r.clone(), chains, summary))
            })
            .collect()
    }
}

// ---------------------------------------------------------------- diagnose

/// Writes `diagnostics.csv` (PSRF and ESS per parameter) and
/// `convergence.csv` (one verdict per fit).
pub fn run_diagnose(fit_dir: &Path, out: &Path) -> Result<FitReport> {
    let dir = FitDir::load(fit_dir)?;
    let head = fit_header("diagnose", &dir.settings);
    let loaded = dir.summaries()?;
    let mut t = Table::new(&[
        "participant_id",
        "outcome",
        "parameter",
        "mean",
        "sd",
        "psrf",
        "psrf_raw",
        "psrf_upper",
        "ess",
        "converged",
    ]);
    for (r, _, s) in &loaded {
        for p in &s.parameters {
            t.push(vec![
                r.participant_id.clone(),
                r.outcome.clone(),
                p.name.clone(),
                fmt_f64(p.mean),
                fmt_f64(p.sd),
                fmt_opt(p.psrf.map(|x| x.point)),
                fmt_opt(p.psrf.map(|x| x.point_raw)),
                fmt_opt(p.psrf.map(|x| x.upper)),
                fmt_opt(p.ess.map(|x| x.value)),
                p.converged().map_or("NA".into(), |c| c.to_string()),
            ]);
        }
    }
    t.write(&out.join("diagnostics.csv"), &head)?;
    let pairs: Vec<(FitRecord, PosteriorSummary)> =
        loaded.into_iter().map(|(r, _, s)| (r, s)).collect();
    convergence_table(&pairs).write(&out.join("convergence.csv"), &head)?;
    let report = FitReport {
        fits: pairs
            .iter()
            .map(|(r, s)| (r.clone(), Convergence::of(s)))
            .collect(),
    };
    for f in report.flagged() {
        warn!("flagged fit: {f}");
    }
    Ok(report)
}

// ---------------------------------------------------------------- ppc

/// Writes `ppc_<outcome>.csv`: modeled against observed mean and SD per
/// participant and condition. The stride file is the one named in the fit's
/// `run.toml` unless `input` overrides it.
pub fn run_ppc(fit_dir: &Path, input: Option<&str>, out: &Path) -> Result<()> {
    let dir = FitDir::load(fit_dir)?;
    let mut settings = dir.settings.clone();
    if let Some(path) = input {
        settings.input = path.to_string();
    }
    let records = load_records(Path::new(&settings.input))?;
    let data = run_preprocess(&records, &settings.preprocess)?;
    let head = fit_header("ppc", &settings);
    let loaded = dir.summaries()?;
    for outcome in settings.outcomes()? {
        let mut t = Table::new(&[
            "participant_id",
            "condition",
            "modeled_mean",
            "modeled_sd",
            "observed_mean",
            "observed_sd",
            "n_observed",
            "mean_discrepancy",
            "sd_discrepancy",
        ]);
        for (r, chains, _) in loaded
            .iter()
            .filter(|(r, _, _)| r.outcome == outcome.label())
        {
            let series = data
                .participants
                .get(&r.participant_id)
                .ok_or_else(|| {
                    CliError::Invalid(format!(
                        "participant {} missing from input",
                        r.participant_id
                    ))
                })?
                .get(outcome);
            for row in posterior_predictive(chains, series)?.rows {
                t.push(vec![
                    r.participant_id.clone(),
                    row.condition.label().into(),
                    fmt_f64(row.modeled.mean),
                    fmt_f64(row.modeled.sd),
                    fmt_f64(row.observed.mean),
                    fmt_f64(row.observed.sd),
                    row.n_observed.to_string(),
                    fmt_f64(row.mean_discrepancy()),
                    fmt_f64(row.sd_discrepancy()),
                ]);
            }
        }
        t.write(&out.join(format!("ppc_{}.csv", outcome.label())), &head)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- report

/// Writes per outcome `conditions_<outcome>.csv` (posterior of each
/// condition mean) and `heatmap_<outcome>.csv` (six condition pairs by
/// participant), plus `estimates.csv` with every parameter summary and its
/// convergence flag.
pub fn run_report(fit_dir: &Path, out: &Path) -> Result<()> {
    let dir = FitDir::load(fit_dir)?;
    let head = fit_header("report", &dir.settings);
    let loaded = dir.summaries()?;

    let mut est_cols = vec!["participant_id", "outcome"];
    est_cols.extend(SUMMARY_COLUMNS);
    est_cols.push("fit_status");
    let mut estimates = Table::new(&est_cols);
    for (r, _, s) in &loaded {
        let status = Convergence::of(s).label().to_string();
        for p in &s.parameters {
            let mut row = vec![r.participant_id.clone(), r.outcome.clone()];
            row.extend(summary_row(p));
            row.push(status.clone());
            estimates.push(row);
        }
    }
    estimates.write(&out.join("estimates.csv"), &head)?;

    for outcome in dir.settings.outcomes()? {
        let fits: Vec<_> = loaded
            .iter()
            .filter(|(r, _, _)| r.outcome == outcome.label())
            .collect();
        let mut conditions = Table::new(&[
            "participant_id",
            "condition",
            "mean",
            "sd",
            "q2.5",
            "q25",
            "q50",
            "q75",
            "q97.5",
            "fit_status",
        ]);
        let mut diffs = Vec::new();
        for (r, chains, s) in &fits {
            let status = Convergence::of(s).label();
            for c in condition_posteriors(chains)? {
                let mut row = vec![
                    r.participant_id.clone(),
                    c.condition.label().into(),
                    fmt_f64(c.mean),
                    fmt_f64(c.sd),
                ];
                row.extend(c.quantiles.iter().map(|&q| fmt_f64(q)));
                row.push(status.into());
                conditions.push(row);
            }
            diffs.push(condition_diff_matrix(s)?);
        }
        conditions.write(
            &out.join(format!("conditions_{}.csv", outcome.label())),
            &head,
        )?;
        heatmap_table(&diffs)
            .write(&out.join(format!("heatmap_{}.csv", outcome.label())), &head)?;
    }
    Ok(())
}

/// Six rows, one per condition pair (`to - from` of posterior means), and
/// one column per participant.
pub fn heatmap_table(diffs: &[ConditionDiffs]) -> Table {
    let mut cols = vec!["pair".to_string()];
    cols.extend(diffs.iter().map(|d| d.participant_id.clone()));
    let mut t = Table::new(&cols);
    for (from, to) in ConditionDiffs::PAIRS {
        let mut row = vec![nof1_core::diagnostics::pair_label(from, to)];
        row.extend(diffs.iter().map(|d| fmt_f64(d.get(from, to))));
        t.push(row);
    }
    t
}

// ---------------------------------------------------------------- synth

#[derive(Clone, Debug, Serialize)]
pub struct SynthSettings {
    pub participants: usize,
    pub strides_per_condition: usize,
    pub seed: u64,
}

/// Writes `strides.csv` in the input format and one truth file per outcome
/// (`truth_<outcome>.csv`).
pub fn run_synth(settings: &SynthSettings, out: &Path) -> Result<()> {
    if settings.participants == 0 {
        return Err(CliError::Invalid(
            "at least one participant is required".into(),
        ));
    }
    if settings.seed > i64::MAX as u64 {
        return Err(CliError::Invalid(format!(
            "seed must be at most {}",
            i64::MAX
        )));
    }
    let spec = StudySpec {
        n_participants: settings.participants,
        strides_per_condition: settings.strides_per_condition,
        ..StudySpec::default()
    };
    let study = generate_study(&spec, settings.seed)?;
    let head = header("synth", settings);
    write_strides(&out.join("strides.csv"), &head, &study.records)?;
    for outcome in Outcome::ALL {
        truth_table(&study.truths, outcome)
            .write(&out.join(format!("truth_{}.csv", outcome.label())), &head)?;
    }
    info!(
        "wrote {} strides for {} participants",
        study.records.len(),
        study.truths.len()
    );
    Ok(())
}

fn truth_table(truths: &[ParticipantTruth], outcome: Outcome) -> Table {
    let mut t = Table::new(&[
        "participant_id",
        "beta1",
        "beta2",
        "beta3",
        "beta4",
        "phi",
        "sigma",
    ]);
    for truth in truths {
        let s = truth.get(outcome);
        let mut row = vec![s.participant_id.clone()];
        row.extend(s.beta.iter().map(|&b| fmt_f64(b)));
        row.push(fmt_f64(s.phi));
        row.push(fmt_f64(s.sigma));
        t.push(row);
    }
    t
}
