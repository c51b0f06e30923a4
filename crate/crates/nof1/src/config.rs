//! Run configuration: built-in defaults, overridden by a TOML config file,
//! overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use nof1_core::design::{default_priors, PriorRegime, PriorSet, PriorSpec};
use nof1_core::{
    CovarianceForm, Foot, ModelSpec, ModelVariant, Outcome, PreprocessConfig, SamplerConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<String>,
    pub cov_form: Option<String>,
    pub outcomes: Option<Vec<String>>,
    pub participants: Option<Vec<String>>,
    #[serde(default)]
    pub sampler: SamplerFile,
    #[serde(default)]
    pub preprocess: PreprocessFile,
    #[serde(default)]
    pub priors: PriorsFile,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerFile {
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessFile {
    pub foot: Option<String>,
    pub downsample: Option<usize>,
    pub outlier_sd: Option<f64>,
}

/// `[priors]` holds the regime; `[priors.beta1]`, `[priors.sigma]` and so on
/// replace single priors.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct PriorsFile {
    pub regime: Option<String>,
    #[serde(flatten)]
    pub overrides: BTreeMap<String, PriorEntry>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

/// One prior in config form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorEntry {
    pub dist: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl PriorEntry {
    pub fn from_spec(spec: &PriorSpec) -> Self {
        let mut e = PriorEntry {
            dist: String::new(),
            mean: None,
            sd: None,
            lo: None,
            hi: None,
            scale: None,
        };
        match *spec {
            PriorSpec::Normal { mean, sd } => {
                e.dist = "normal".into();
                e.mean = Some(mean);
                e.sd = Some(sd);
            }
            PriorSpec::Uniform { lo, hi } => {
                e.dist = "uniform".into();
                e.lo = Some(lo);
                e.hi = Some(hi);
            }
            PriorSpec::HalfCauchy { scale } => {
                e.dist = "half_cauchy".into();
                e.scale = Some(scale);
            }
            PriorSpec::TruncatedNormal { mean, sd, lo } => {
                e.dist = "truncated_normal".into();
                e.mean = Some(mean);
                e.sd = Some(sd);
                e.lo = Some(lo);
            }
        }
        e
    }

    pub fn to_spec(&self, name: &str) -> Result<PriorSpec> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| {
                CliError::Invalid(format!("prior {name}: `{}` needs `{field}`", self.dist))
            })
        };
        let spec = match self.dist.to_ascii_lowercase().replace('-', "_").as_str() {
            "normal" => PriorSpec::Normal {
                mean: need(self.mean, "mean")?,
                sd: need(self.sd, "sd")?,
            },
            "uniform" => PriorSpec::Uniform {
                lo: need(self.lo, "lo")?,
                hi: need(self.hi, "hi")?,
            },
            "half_cauchy" | "halfcauchy" => PriorSpec::HalfCauchy {
                scale: need(self.scale, "scale")?,
            },
            "truncated_normal" => PriorSpec::TruncatedNormal {
                mean: need(self.mean, "mean")?,
                sd: need(self.sd, "sd")?,
                lo: need(self.lo, "lo")?,
            },
            other => {
                return Err(CliError::Invalid(format!(
                    "prior {name}: unknown distribution `{other}`"
                )))
            }
        };
        spec.validate(name)?;
        Ok(spec)
    }
}

/// Flag values from the command line; `None` leaves the file or default
/// value in place.
#[derive(Clone, Debug, Default)]
pub struct FitOverrides {
    pub model: Option<String>,
    pub priors: Option<String>,
    pub cov_form: Option<String>,
    pub outcomes: Option<Vec<String>>,
    pub participants: Option<Vec<String>>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub preprocess: PreprocessOverrides,
}

#[derive(Clone, Debug, Default)]
pub struct PreprocessOverrides {
    pub foot: Option<String>,
    pub downsample: Option<usize>,
    pub outlier_sd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl SamplerSettings {
    pub fn to_config(&self) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            n_iterations: self.iterations,
            burn_in: self.burn_in,
            thinning: self.thinning,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSettings {
    pub foot: String,
    pub downsample: usize,
    pub outlier_sd: f64,
}

impl PreprocessSettings {
    pub fn resolve(file: &PreprocessFile, flags: &PreprocessOverrides) -> Result<Self> {
        let d = PreprocessConfig::default();
        let s = PreprocessSettings {
            foot: flags
                .foot
                .clone()
                .or_else(|| file.foot.clone())
                .unwrap_or_else(|| d.foot.label().to_string()),
            downsample: flags
                .downsample
                .or(file.downsample)
                .unwrap_or(d.downsample_factor),
            outlier_sd: flags.outlier_sd.or(file.outlier_sd).unwrap_or(d.outlier_sd),
        };
        s.to_config()?;
        Ok(s)
    }

    pub fn to_config(&self) -> Result<PreprocessConfig> {
        let cfg = PreprocessConfig {
            foot: self.foot.parse::<Foot>()?,
            downsample_factor: self.downsample,
            outlier_sd: self.outlier_sd,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSettings {
    pub regime: String,
    pub stride_length: BTreeMap<String, PriorEntry>,
    pub stride_time: BTreeMap<String, PriorEntry>,
}

/// Fully resolved settings of a `fit` run; stored as `run.toml` and echoed
/// in the header of every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub input: String,
    pub model: String,
    pub cov_form: String,
    pub outcomes: Vec<String>,
    /// Empty means every participant.
    pub participants: Vec<String>,
    pub sampler: SamplerSettings,
    pub preprocess: PreprocessSettings,
    pub priors: PriorSettings,
}

impl FitSettings {
    pub fn resolve(input: &str, file: &ConfigFile, flags: &FitOverrides) -> Result<Self> {
        let d = SamplerConfig::default();
        let model: ModelVariant = flags
            .model
            .as_deref()
            .or(file.model.as_deref())
            .unwrap_or("ar1")
            .parse()?;
        let cov_form: CovarianceForm = flags
            .cov_form
            .as_deref()
            .or(file.cov_form.as_deref())
            .unwrap_or("stationary")
            .parse()?;
        let regime: PriorRegime = flags
            .priors
            .as_deref()
            .or(file.priors.regime.as_deref())
            .unwrap_or("noninformative")
            .parse()?;
        let outcomes: Vec<Outcome> = match flags.outcomes.as_ref().or(file.outcomes.as_ref()) {
            Some(list) => list.iter().map(|o| o.parse()).collect::<Result<_, _>>()?,
            None => Outcome::ALL.to_vec(),
        };
        if outcomes.is_empty() {
            return Err(CliError::Invalid("at least one outcome is required".into()));
        }
        let f = &file.sampler;
        let sampler = SamplerSettings {
            chains: flags.chains.or(f.chains).unwrap_or(d.n_chains),
            iterations: flags.iters.or(f.iters).unwrap_or(d.n_iterations),
            burn_in: flags.burn_in.or(f.burn_in).unwrap_or(d.burn_in),
            thinning: flags.thin.or(f.thin).unwrap_or(d.thinning),
            seed: flags.seed.or(f.seed).unwrap_or(d.seed),
        };
        sampler.to_config().validate()?;
        if sampler.seed > i64::MAX as u64 {
            return Err(CliError::Invalid(format!(
                "seed must be at most {}",
                i64::MAX
            )));
        }

        let mut priors = PriorSettings {
            regime: regime.label().to_string(),
            stride_length: BTreeMap::new(),
            stride_time: BTreeMap::new(),
        };
        for outcome in Outcome::ALL {
            let mut set = default_priors(outcome, regime, model);
            for (name, entry) in &file.priors.overrides {
                apply_override(&mut set, model, name, entry.to_spec(name)?)?;
            }
            let spec = ModelSpec::new(model, outcome, regime).with_priors(set.clone());
            spec.validate()?;
            let map = prior_entries(&set);
            match outcome {
                Outcome::StrideLength => priors.stride_length = map,
                Outcome::StrideTime => priors.stride_time = map,
            }
        }

        let mut outcome_labels: Vec<String> = Vec::new();
        for o in Outcome::ALL {
            if outcomes.contains(&o) {
                outcome_labels.push(o.label().to_string());
            }
        }
        let mut participants = flags
            .participants
            .clone()
            .or_else(|| file.participants.clone())
            .unwrap_or_default();
        participants.sort();
        participants.dedup();

        Ok(FitSettings {
            input: input.to_string(),
            model: model.label().to_string(),
            cov_form: cov_form.label().to_string(),
            outcomes: outcome_labels,
            participants,
            sampler,
            preprocess: PreprocessSettings::resolve(&file.preprocess, &flags.preprocess)?,
            priors,
        })
    }

    pub fn variant(&self) -> Result<ModelVariant> {
        Ok(self.model.parse()?)
    }

    pub fn outcomes(&self) -> Result<Vec<Outcome>> {
        self.outcomes
            .iter()
            .map(|o| o.parse().map_err(CliError::from))
            .collect()
    }

    pub fn model_spec(&self, outcome: Outcome) -> Result<ModelSpec> {
        let variant = self.variant()?;
        let regime: PriorRegime = self.priors.regime.parse()?;
        let entries = match outcome {
            Outcome::StrideLength => &self.priors.stride_length,
            Outcome::StrideTime => &self.priors.stride_time,
        };
        let mut set = default_priors(outcome, regime, variant);
        for (name, entry) in entries {
            apply_override(&mut set, variant, name, entry.to_spec(name)?)?;
        }
        let spec = ModelSpec::new(variant, outcome, regime)
            .with_priors(set)
            .with_covariance(self.cov_form.parse()?);
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("run.toml: {e}")))
    }
}

fn apply_override(
    set: &mut PriorSet,
    model: ModelVariant,
    name: &str,
    spec: PriorSpec,
) -> Result<()> {
    match name {
        "sigma" => set.sigma = spec,
        "phi" => {
            if model != ModelVariant::Ar1 {
                return Err(CliError::Invalid(
                    "a phi prior only applies to the ar1 model".into(),
                ));
            }
            set.phi = Some(spec);
        }
        _ => {
            let k: usize = name
                .strip_prefix("beta")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1 && k <= set.beta.len())
                .ok_or_else(|| {
                    CliError::Invalid(format!("unknown prior key `{name}` for the {model} model"))
                })?;
            set.beta[k - 1] = spec;
        }
    }
    Ok(())
}

fn prior_entries(set: &PriorSet) -> BTreeMap<String, PriorEntry> {
    let mut map = BTreeMap::new();
    for (k, b) in set.beta.iter().enumerate() {
        map.insert(format!("beta{}", k + 1), PriorEntry::from_spec(b));
    }
    map.insert("sigma".into(), PriorEntry::from_spec(&set.sigma));
    if let Some(phi) = &set.phi {
        map.insert("phi".into(), PriorEntry::from_spec(phi));
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let file: ConfigFile = toml::from_str(
            r#"
            model = "basic"
            [sampler]
            chains = 3
            seed = 9
            [priors]
            regime = "informative"
            [priors.beta2]
            dist = "normal"
            mean = 0.0
            sd = 0.5
            "#,
        )
        .unwrap();
        let flags = FitOverrides {
            seed: Some(7),
            ..FitOverrides::default()
        };
        let s = FitSettings::resolve("data.csv", &file, &flags).unwrap();
        assert_eq!(s.model, "basic");
        assert_eq!(s.sampler.chains, 3);
        assert_eq!(s.sampler.seed, 7);
        assert_eq!(s.sampler.iterations, 10_000);
        let spec = s.model_spec(Outcome::StrideLength).unwrap();
        assert_eq!(
            spec.priors.beta[0],
            PriorSpec::Normal {
                mean: 1.36,
                sd: 0.08
            }
        );
        assert_eq!(
            spec.priors.beta[1],
            PriorSpec::Normal { mean: 0.0, sd: 0.5 }
        );
        let back = FitSettings::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_values_rejected() {
        let file = ConfigFile::default();
        let bad_model = FitOverrides {
            model: Some("gp".into()),
            ..FitOverrides::default()
        };
        assert_eq!(
            FitSettings::resolve("x", &file, &bad_model)
                .unwrap_err()
                .exit_code(),
            2
        );
        let phi_on_basic: ConfigFile = toml::from_str(
            "model = \"basic\"\n[priors.phi]\ndist = \"uniform\"\nlo = -1.0\nhi = 1.0\n",
        )
        .unwrap();
        assert!(FitSettings::resolve("x", &phi_on_basic, &FitOverrides::default()).is_err());
        assert!(toml::from_str::<ConfigFile>("colour = 1").is_err());
    }

    #[test]
    fn infinite_outlier_band_survives_toml() {
        let flags = FitOverrides {
            preprocess: PreprocessOverrides {
                outlier_sd: Some(f64::INFINITY),
                ..PreprocessOverrides::default()
            },
            ..FitOverrides::default()
        };
        let s = FitSettings::resolve("x", &ConfigFile::default(), &flags).unwrap();
        assert_eq!(FitSettings::from_toml(&s.to_toml()).unwrap(), s);
    }
}
