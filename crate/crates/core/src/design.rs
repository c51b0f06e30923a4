//! Design matrices and prior sets for the three model variants.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::ar1::CovarianceForm;
use crate::data::{Outcome, TrialSeries, WalkingCondition};
use crate::error::{Error, Result};
use crate::math;
use crate::special::normal_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Cell-coded condition means with independent errors.
    Basic,
    /// Basic plus a within-block linear time ramp.
    TimeCovariate,
    /// Basic design with AR(1) correlated errors.
    Ar1,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [
        ModelVariant::Basic,
        ModelVariant::TimeCovariate,
        ModelVariant::Ar1,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::Basic => "basic",
            ModelVariant::TimeCovariate => "time",
            ModelVariant::Ar1 => "ar1",
        }
    }

    pub fn n_beta(self) -> usize {
        match self {
            ModelVariant::TimeCovariate => 5,
            _ => 4,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "basic" => Ok(ModelVariant::Basic),
            "time" | "time_covariate" | "timecovariate" => Ok(ModelVariant::TimeCovariate),
            "ar1" => Ok(ModelVariant::Ar1),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnLabel {
    Intercept,
    DtControlIndicator,
    StFatigueIndicator,
    DtFatigueIndicator,
    TimeIndex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    columns: Vec<ColumnLabel>,
}

impl DesignMatrix {
    /// Wraps an arbitrary matrix; only the label count is checked.
    pub fn new(matrix: DMatrix<f64>, columns: Vec<ColumnLabel>) -> Result<Self> {
        if matrix.ncols() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} labels",
                matrix.ncols(),
                columns.len()
            )));
        }
        Ok(DesignMatrix { matrix, columns })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn columns(&self) -> &[ColumnLabel] {
        &self.columns
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }
}

/// Cell-coded design relative to ST-Control: `(1, 1{DT-Control},
/// 1{ST-Fatigue}, 1{DT-Fatigue})`, plus a time ramp restarting at 0 in every
/// condition block for [`ModelVariant::TimeCovariate`].
pub fn build_design_matrix(series: &TrialSeries, variant: ModelVariant) -> Result<DesignMatrix> {
    series.require_complete()?;
    let p = variant.n_beta();
    let n = series.len();
    let mut m = DMatrix::<f64>::zeros(n, p);
    let mut ramp = 0.0;
    let mut prev: Option<WalkingCondition> = None;
    for (i, o) in series.observations().iter().enumerate() {
        if prev != Some(o.condition) {
            ramp = 0.0;
            prev = Some(o.condition);
        }
        m[(i, 0)] = 1.0;
        if o.condition != WalkingCondition::StControl {
            m[(i, o.condition.index())] = 1.0;
        }
        if variant == ModelVariant::TimeCovariate {
            m[(i, 4)] = ramp;
        }
        ramp += 1.0;
    }
    let mut columns = vec![
        ColumnLabel::Intercept,
        ColumnLabel::DtControlIndicator,
        ColumnLabel::StFatigueIndicator,
        ColumnLabel::DtFatigueIndicator,
    ];
    if variant == ModelVariant::TimeCovariate {
        columns.push(ColumnLabel::TimeIndex);
    }
    Ok(DesignMatrix { matrix: m, columns })
}

/// Univariate prior, always stored as (mean, standard deviation) for normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorSpec {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    HalfCauchy { scale: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64 },
}

impl PriorSpec {
    /// Normal prior given in (mean, precision) form.
    pub fn normal_from_precision(mean: f64, precision: f64) -> Self {
        PriorSpec::Normal {
            mean,
            sd: 1.0 / math::sqrt(precision),
        }
    }

    pub fn validate(&self, parameter: &str) -> Result<()> {
        let bad = |detail: String| Error::InvalidPrior {
            parameter: parameter.into(),
            detail,
        };
        match *self {
            PriorSpec::Normal { mean, sd } | PriorSpec::TruncatedNormal { mean, sd, .. } => {
                if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
                    return Err(bad(format!(
                        "need finite mean and sd > 0, got ({mean}, {sd})"
                    )));
                }
                if let PriorSpec::TruncatedNormal { lo, .. } = *self {
                    if !lo.is_finite() {
                        return Err(bad(format!("truncation point must be finite, got {lo}")));
                    }
                }
            }
            PriorSpec::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(bad(format!("need finite lo < hi, got ({lo}, {hi})")));
                }
            }
            PriorSpec::HalfCauchy { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(bad(format!("scale must be positive, got {scale}")));
                }
            }
        }
        Ok(())
    }

    /// Normalized log density; `-inf` outside the support.
    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * math::ln(2.0 * PI) - math::ln(sd) - 0.5 * z * z
            }
            PriorSpec::Uniform { lo, hi } => {
                if x > lo && x < hi {
                    -math::ln(hi - lo)
                } else {
                    f64::NEG_INFINITY
                }
            }
            PriorSpec::HalfCauchy { scale } => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let u = x / scale;
                math::ln(2.0 / (PI * scale)) - math::ln_1p(u * u)
            }
            PriorSpec::TruncatedNormal { mean, sd, lo } => {
                if x < lo {
                    return f64::NEG_INFINITY;
                }
                let z = (x - mean) / sd;
                let mass = 1.0 - normal_cdf((lo - mean) / sd);
                -0.5 * math::ln(2.0 * PI) - math::ln(sd) - 0.5 * z * z - math::ln(mass)
            }
        }
    }

    /// Lower and upper support bounds.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            PriorSpec::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            PriorSpec::Uniform { lo, hi } => (lo, hi),
            PriorSpec::HalfCauchy { .. } => (0.0, f64::INFINITY),
            PriorSpec::TruncatedNormal { lo, .. } => (lo, f64::INFINITY),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PriorSpec::Normal { mean, sd } => write!(f, "normal(mean={mean}, sd={sd})"),
            PriorSpec::Uniform { lo, hi } => write!(f, "uniform(lo={lo}, hi={hi})"),
            PriorSpec::HalfCauchy { scale } => write!(f, "half_cauchy(scale={scale})"),
            PriorSpec::TruncatedNormal { mean, sd, lo } => {
                write!(f, "truncated_normal(mean={mean}, sd={sd}, lo={lo})")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorRegime {
    NonInformative,
    Informative,
}

impl PriorRegime {
    pub fn label(self) -> &'static str {
        match self {
            PriorRegime::NonInformative => "noninformative",
            PriorRegime::Informative => "informative",
        }
    }
}

impl fmt::Display for PriorRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PriorRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "noninformative" => Ok(PriorRegime::NonInformative),
            "informative" => Ok(PriorRegime::Informative),
            other => Err(Error::InvalidConfig(format!(
                "unknown prior regime `{other}`"
            ))),
        }
    }
}

/// Precision of the vague coefficient priors.
pub const VAGUE_PRECISION: f64 = 1.0e-3;
pub const HALF_CAUCHY_SCALE: f64 = 2.5;
pub const SIGMA_UNIFORM_UPPER: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSet {
    pub beta: Vec<PriorSpec>,
    pub sigma: PriorSpec,
    pub phi: Option<PriorSpec>,
}

impl PriorSet {
    pub fn validate(&self, variant: ModelVariant) -> Result<()> {
        if self.beta.len() != variant.n_beta() {
            return Err(Error::InvalidPrior {
                parameter: "beta".into(),
                detail: format!(
                    "{} priors for {} coefficients",
                    self.beta.len(),
                    variant.n_beta()
                ),
            });
        }
        for (i, b) in self.beta.iter().enumerate() {
            let name = format!("beta{}", i + 1);
            b.validate(&name)?;
            if !matches!(b, PriorSpec::Normal { .. }) {
                return Err(Error::InvalidPrior {
                    parameter: name,
                    detail: "coefficient priors must be normal".into(),
                });
            }
        }
        self.sigma.validate("sigma")?;
        if self.sigma.support().1 <= 0.0 {
            return Err(Error::InvalidPrior {
                parameter: "sigma".into(),
                detail: "support does not include positive values".into(),
            });
        }
        match (variant, &self.phi) {
            (ModelVariant::Ar1, Some(phi)) => {
                phi.validate("phi")?;
                let (lo, hi) = phi.support();
                if lo < -1.0 || hi > 1.0 {
                    return Err(Error::InvalidPrior {
                        parameter: "phi".into(),
                        detail: format!("support ({lo}, {hi}) is not inside (-1, 1)"),
                    });
                }
            }
            (ModelVariant::Ar1, None) => {
                return Err(Error::InvalidPrior {
                    parameter: "phi".into(),
                    detail: "AR1 model requires a phi prior".into(),
                })
            }
            (_, Some(_)) => {
                return Err(Error::InvalidPrior {
                    parameter: "phi".into(),
                    detail: "only the AR1 model has phi".into(),
                })
            }
            (_, None) => {}
        }
        Ok(())
    }

    /// Prior means and precisions of the coefficients.
    pub(crate) fn beta_normal_moments(&self) -> (Vec<f64>, Vec<f64>) {
        self.beta
            .iter()
            .map(|b| match *b {
                PriorSpec::Normal { mean, sd } => (mean, 1.0 / (sd * sd)),
                _ => unreachable!("validated"),
            })
            .unzip()
    }
}

/// Default priors. Vague coefficient priors are normal with precision 1e-3;
/// the informative intercept uses published young-adult gait norms read as
/// (mean, SD).
pub fn default_priors(outcome: Outcome, regime: PriorRegime, variant: ModelVariant) -> PriorSet {
    let vague = PriorSpec::normal_from_precision(0.0, VAGUE_PRECISION);
    let mut beta = vec![vague; variant.n_beta()];
    if regime == PriorRegime::Informative {
        beta[0] = match outcome {
            Outcome::StrideLength => PriorSpec::Normal {
                mean: 1.36,
                sd: 0.08,
            },
            Outcome::StrideTime => PriorSpec::Normal {
                mean: 1.05,
                sd: 0.06,
            },
        };
    }
    match variant {
        ModelVariant::Ar1 => PriorSet {
            beta,
            sigma: PriorSpec::HalfCauchy {
                scale: HALF_CAUCHY_SCALE,
            },
            phi: Some(PriorSpec::Uniform { lo: -1.0, hi: 1.0 }),
        },
        _ => PriorSet {
            beta,
            sigma: PriorSpec::Uniform {
                lo: 0.0,
                hi: SIGMA_UNIFORM_UPPER,
            },
            phi: None,
        },
    }
}

/// Everything the sampler needs to know about one model fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub outcome: Outcome,
    pub priors: PriorSet,
    pub covariance: CovarianceForm,
    /// Holds sigma at a fixed value instead of sampling it.
    pub pinned_sigma: Option<f64>,
    /// Holds phi at a fixed value (AR1 only).
    pub pinned_phi: Option<f64>,
}

impl ModelSpec {
    pub fn new(variant: ModelVariant, outcome: Outcome, regime: PriorRegime) -> Self {
        ModelSpec {
            variant,
            outcome,
            priors: default_priors(outcome, regime, variant),
            covariance: CovarianceForm::Stationary,
            pinned_sigma: None,
            pinned_phi: None,
        }
    }

    pub fn with_priors(mut self, priors: PriorSet) -> Self {
        self.priors = priors;
        self
    }

    pub fn with_covariance(mut self, form: CovarianceForm) -> Self {
        self.covariance = form;
        self
    }

    pub fn pin_sigma(mut self, sigma: f64) -> Self {
        self.pinned_sigma = Some(sigma);
        self
    }

    pub fn pin_phi(mut self, phi: f64) -> Self {
        self.pinned_phi = Some(phi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate(self.variant)?;
        if let Some(s) = self.pinned_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::NonPositiveScale(s));
            }
        }
        if let Some(phi) = self.pinned_phi {
            if self.variant != ModelVariant::Ar1 {
                return Err(Error::InvalidConfig(
                    "phi can only be pinned in the AR1 model".into(),
                ));
            }
            if !(phi.abs() < 1.0) {
                return Err(Error::PhiOutOfRange(phi));
            }
        }
        Ok(())
    }

    /// Parameter names in draw order: `beta1..betap`, `sigma`, and `phi` for AR1.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.variant.n_beta())
            .map(|i| format!("beta{i}"))
            .collect();
        names.push("sigma".into());
        if self.variant == ModelVariant::Ar1 {
            names.push("phi".into());
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Observation, Provenance};

    fn series(blocks: &[(WalkingCondition, usize)]) -> TrialSeries {
        let mut obs = Vec::new();
        for &(c, n) in blocks {
            for i in 0..n {
                obs.push(Observation {
                    condition: c,
                    sequence_index: i as u32,
                    value: 1.0,
                });
            }
        }
        TrialSeries::new("p", Outcome::StrideLength, obs, Provenance::default()).unwrap()
    }

    #[test]
    fn cell_coding_rows() {
        let s = series(&[
            (WalkingCondition::StControl, 1),
            (WalkingCondition::StFatigue, 1),
            (WalkingCondition::DtControl, 1),
            (WalkingCondition::DtFatigue, 1),
        ]);
        let x = build_design_matrix(&s, ModelVariant::Basic).unwrap();
        assert_eq!(x.row(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(x.row(1), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(x.row(2), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(x.row(3), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn time_ramp_restarts_per_block() {
        let s = series(&[
            (WalkingCondition::DtControl, 3),
            (WalkingCondition::DtFatigue, 2),
            (WalkingCondition::StControl, 3),
            (WalkingCondition::StFatigue, 1),
        ]);
        let x = build_design_matrix(&s, ModelVariant::TimeCovariate).unwrap();
        let ramp: Vec<f64> = (0..x.nrows()).map(|i| x.matrix()[(i, 4)]).collect();
        assert_eq!(ramp, vec![0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 2.0, 0.0]);
        assert_eq!(x.columns().last(), Some(&ColumnLabel::TimeIndex));
    }

    #[test]
    fn missing_condition_is_named() {
        let s = series(&[
            (WalkingCondition::StControl, 2),
            (WalkingCondition::DtControl, 2),
            (WalkingCondition::DtFatigue, 2),
        ]);
        match build_design_matrix(&s, ModelVariant::Basic) {
            Err(Error::MissingCondition { condition, .. }) => {
                assert_eq!(condition, WalkingCondition::StFatigue)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn basic_design_has_full_rank() {
        let s = series(&[
            (WalkingCondition::StControl, 2),
            (WalkingCondition::StFatigue, 1),
            (WalkingCondition::DtControl, 3),
            (WalkingCondition::DtFatigue, 1),
        ]);
        let x = build_design_matrix(&s, ModelVariant::Basic).unwrap();
        assert_eq!(x.matrix().rank(1e-10), 4);
    }

    #[test]
    fn table_priors() {
        let p = default_priors(
            Outcome::StrideLength,
            PriorRegime::Informative,
            ModelVariant::Ar1,
        );
        assert_eq!(
            p.beta[0],
            PriorSpec::Normal {
                mean: 1.36,
                sd: 0.08
            }
        );
        assert_eq!(p.sigma, PriorSpec::HalfCauchy { scale: 2.5 });
        assert_eq!(p.phi, Some(PriorSpec::Uniform { lo: -1.0, hi: 1.0 }));

        let p = default_priors(
            Outcome::StrideTime,
            PriorRegime::Informative,
            ModelVariant::Basic,
        );
        assert_eq!(
            p.beta[0],
            PriorSpec::Normal {
                mean: 1.05,
                sd: 0.06
            }
        );
        assert_eq!(p.sigma, PriorSpec::Uniform { lo: 0.0, hi: 100.0 });
        assert!(p.phi.is_none());

        // precision 1e-3 -> sd = 1/sqrt(1e-3) = 31.6228
        let p = default_priors(
            Outcome::StrideTime,
            PriorRegime::NonInformative,
            ModelVariant::Basic,
        );
        for b in &p.beta {
            match *b {
                PriorSpec::Normal { mean, sd } => {
                    assert_eq!(mean, 0.0);
                    assert!((sd - 31.6228).abs() < 1e-4);
                }
                _ => panic!(),
            }
        }
        let p = default_priors(
            Outcome::StrideTime,
            PriorRegime::NonInformative,
            ModelVariant::TimeCovariate,
        );
        assert_eq!(p.beta.len(), 5);
        assert!(p.validate(ModelVariant::TimeCovariate).is_ok());
    }

    #[test]
    fn prior_validation() {
        let mut p = default_priors(
            Outcome::StrideLength,
            PriorRegime::NonInformative,
            ModelVariant::Ar1,
        );
        p.phi = Some(PriorSpec::Uniform { lo: -2.0, hi: 1.0 });
        assert!(p.validate(ModelVariant::Ar1).is_err());
        p.phi = None;
        assert!(p.validate(ModelVariant::Ar1).is_err());
        assert!(PriorSpec::HalfCauchy { scale: 0.0 }
            .validate("sigma")
            .is_err());
        assert!(PriorSpec::Uniform { lo: 1.0, hi: 1.0 }
            .validate("sigma")
            .is_err());
    }

    #[test]
    fn half_cauchy_density_integrates() {
        let prior = PriorSpec::HalfCauchy { scale: 2.5 };
        // trapezoid on [0, 2000] plus the analytic tail 2/pi * atan-complement
        let h = 0.01;
        let mut total = 0.0;
        let mut x = 0.0;
        while x < 2000.0 {
            total +=
                0.5 * h * (math::exp(prior.ln_density(x)) + math::exp(prior.ln_density(x + h)));
            x += h;
        }
        let tail = 1.0 - 2.0 / PI * libm::atan(2000.0 / 2.5);
        assert!((total + tail - 1.0).abs() < 1e-6);
        assert_eq!(prior.ln_density(-0.1), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_normal_mass() {
        let prior = PriorSpec::TruncatedNormal {
            mean: 0.0,
            sd: 1.0,
            lo: 0.0,
        };
        // half-normal at 0 has density 2 * phi(0)
        let want = math::ln(2.0 / math::sqrt(2.0 * PI));
        assert!((prior.ln_density(0.0) - want).abs() < 1e-12);
    }
}
