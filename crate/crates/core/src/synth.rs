//! Synthetic trial data with known ground truth.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ar1::{check_phi, check_sigma};
use crate::data::{
    Foot, Observation, Outcome, Provenance, StrideRecord, TrialSeries, WalkingCondition,
};
use crate::error::{Error, Result};
use crate::math;

/// Visit order of participants who start with single-task walking.
pub const ST_FIRST: [WalkingCondition; 4] = [
    WalkingCondition::StControl,
    WalkingCondition::StFatigue,
    WalkingCondition::DtControl,
    WalkingCondition::DtFatigue,
];

/// Visit order of participants who start with dual-task walking.
pub const DT_FIRST: [WalkingCondition; 4] = [
    WalkingCondition::DtControl,
    WalkingCondition::DtFatigue,
    WalkingCondition::StControl,
    WalkingCondition::StFatigue,
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub participant_id: String,
    pub outcome: Outcome,
    /// Cell-coded coefficients relative to ST-Control.
    pub beta: [f64; 4],
    pub phi: f64,
    /// Innovation SD of the AR(1) error.
    pub sigma: f64,
    pub strides_per_condition: usize,
    pub condition_order: [WalkingCondition; 4],
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        check_phi(self.phi)?;
        check_sigma(self.sigma)?;
        if self.strides_per_condition == 0 {
            return Err(Error::InvalidConfig(
                "strides_per_condition must be positive".into(),
            ));
        }
        for c in WalkingCondition::ALL {
            if !self.condition_order.contains(&c) {
                return Err(Error::InvalidConfig(format!("condition order lacks {c}")));
            }
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("non-finite beta".into()));
        }
        Ok(())
    }

    /// Mean of `condition` implied by `beta`.
    pub fn condition_mean(&self, condition: WalkingCondition) -> f64 {
        match condition.index() {
            0 => self.beta[0],
            k => self.beta[0] + self.beta[k],
        }
    }
}

/// Stationary AR(1) sequence: `e₁ ~ N(0, σ²/(1-φ²))`, `e_t = φ e_{t-1} + N(0, σ²)`.
pub fn ar1_errors<R: Rng + ?Sized>(phi: f64, sigma: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut e = 0.0;
    for t in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        e = if t == 0 {
            z * sigma / math::sqrt(1.0 - phi * phi)
        } else {
            phi * e + sigma * z
        };
        out.push(e);
    }
    out
}

/// `y = Xβ + ε` with one AR(1) error process running through all blocks in
/// visit order.
pub fn generate_series(spec: &SynthSpec) -> Result<TrialSeries> {
    spec.validate()?;
    let k = spec.strides_per_condition;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let errors = ar1_errors(spec.phi, spec.sigma, 4 * k, &mut rng);
    let observations = spec
        .condition_order
        .iter()
        .flat_map(|&c| (0..k).map(move |i| (c, i)))
        .zip(errors)
        .map(|((condition, i), e)| Observation {
            condition,
            sequence_index: i as u32,
            value: spec.condition_mean(condition) + e,
        })
        .collect();
    TrialSeries::new(
        spec.participant_id.clone(),
        spec.outcome,
        observations,
        Provenance {
            foot: Some(Foot::Left),
            downsample_factor: 1,
            outlier_sd: f64::INFINITY,
            outliers_removed: 0,
        },
    )
}

/// Population from which per-participant parameters are drawn:
/// `β_k ~ N(mean_k, sd_k)`, `φ ~ U(phi_range)`, `σ ~ U(sigma_range)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterDistribution {
    pub beta_mean: [f64; 4],
    pub beta_sd: [f64; 4],
    pub phi_range: (f64, f64),
    pub sigma_range: (f64, f64),
}

impl ParameterDistribution {
    /// Same parameters for every participant.
    pub fn fixed(beta: [f64; 4], phi: f64, sigma: f64) -> Self {
        ParameterDistribution {
            beta_mean: beta,
            beta_sd: [0.0; 4],
            phi_range: (phi, phi),
            sigma_range: (sigma, sigma),
        }
    }

    /// Heterogeneous stride lengths of the order seen in healthy adults.
    pub fn stride_length_default() -> Self {
        ParameterDistribution {
            beta_mean: [1.43, -0.09, -0.03, -0.12],
            beta_sd: [0.10, 0.04, 0.03, 0.04],
            phi_range: (0.2, 0.8),
            sigma_range: (0.03, 0.06),
        }
    }

    pub fn stride_time_default() -> Self {
        ParameterDistribution {
            beta_mean: [1.10, 0.04, -0.01, 0.03],
            beta_sd: [0.07, 0.02, 0.02, 0.02],
            phi_range: (0.2, 0.8),
            sigma_range: (0.015, 0.03),
        }
    }

    fn validate(&self) -> Result<()> {
        let (plo, phi) = self.phi_range;
        let (slo, shi) = self.sigma_range;
        if !(plo <= phi && plo > -1.0 && phi < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "phi range ({plo}, {phi}) must lie inside (-1, 1)"
            )));
        }
        if !(slo <= shi && slo > 0.0 && shi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma range ({slo}, {shi}) must be positive"
            )));
        }
        if self.beta_sd.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("beta sd must be non-negative".into()));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ([f64; 4], f64, f64) {
        let beta = core::array::from_fn(|k| {
            let z: f64 = StandardNormal.sample(rng);
            self.beta_mean[k] + self.beta_sd[k] * z
        });
        let uniform = |(lo, hi): (f64, f64), rng: &mut R| lo + (hi - lo) * rng.random::<f64>();
        let phi = uniform(self.phi_range, rng);
        let sigma = uniform(self.sigma_range, rng);
        (beta, phi, sigma)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudySpec {
    pub n_participants: usize,
    pub strides_per_condition: usize,
    pub stride_length: ParameterDistribution,
    pub stride_time: ParameterDistribution,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            n_participants: 16,
            strides_per_condition: 50,
            stride_length: ParameterDistribution::stride_length_default(),
            stride_time: ParameterDistribution::stride_time_default(),
        }
    }
}

/// Generating parameters of one participant.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantTruth {
    pub stride_length: SynthSpec,
    pub stride_time: SynthSpec,
}

impl ParticipantTruth {
    pub fn participant_id(&self) -> &str {
        &self.stride_length.participant_id
    }

    pub fn get(&self, outcome: Outcome) -> &SynthSpec {
        match outcome {
            Outcome::StrideLength => &self.stride_length,
            Outcome::StrideTime => &self.stride_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Study {
    /// Left-foot strides, participants in id order, blocks in visit order.
    pub records: Vec<StrideRecord>,
    pub truths: Vec<ParticipantTruth>,
}

/// Draws a study: per-participant parameters, a balanced random assignment
/// to single-task-first or dual-task-first visit orders, and one synthetic
/// series per outcome.
pub fn generate_study(spec: &StudySpec, seed: u64) -> Result<Study> {
    spec.stride_length.validate()?;
    spec.stride_time.validate()?;
    if spec.strides_per_condition == 0 {
        return Err(Error::InvalidConfig(
            "strides_per_condition must be positive".into(),
        ));
    }
    let n = spec.n_participants;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st_first: Vec<bool> = (0..n).map(|i| i < n.div_ceil(2)).collect();
    st_first.shuffle(&mut rng);
    let width = format!("{}", n.max(1)).len().max(2);

    let mut records = Vec::with_capacity(n * 4 * spec.strides_per_condition);
    let mut truths = Vec::with_capacity(n);
    for (i, &st) in st_first.iter().enumerate() {
        let participant_id = format!("p{:0width$}", i + 1);
        let condition_order = if st { ST_FIRST } else { DT_FIRST };
        let mut draw = |dist: &ParameterDistribution, outcome| {
            let (beta, phi, sigma) = dist.sample(&mut rng);
            SynthSpec {
                participant_id: participant_id.clone(),
                outcome,
                beta,
                phi,
                sigma,
                strides_per_condition: spec.strides_per_condition,
                condition_order,
                seed: rng.next_u64(),
            }
        };
        let truth = ParticipantTruth {
            stride_length: draw(&spec.stride_length, Outcome::StrideLength),
            stride_time: draw(&spec.stride_time, Outcome::StrideTime),
        };
        let sl = generate_series(&truth.stride_length)?;
        let st = generate_series(&truth.stride_time)?;
        for (a, b) in sl.observations().iter().zip(st.observations()) {
            records.push(StrideRecord::new(
                participant_id.clone(),
                Foot::Left,
                a.condition,
                a.sequence_index,
                a.value,
                b.value,
            )?);
        }
        truths.push(truth);
    }
    Ok(Study { records, truths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn spec(phi: f64, sigma: f64, k: usize) -> SynthSpec {
        SynthSpec {
            participant_id: "s".into(),
            outcome: Outcome::StrideLength,
            beta: [1.4, -0.1, -0.03, -0.12],
            phi,
            sigma,
            strides_per_condition: k,
            condition_order: ST_FIRST,
            seed: 11,
        }
    }

    fn residuals(s: &SynthSpec) -> Vec<f64> {
        generate_series(s)
            .unwrap()
            .observations()
            .iter()
            .map(|o| o.value - s.condition_mean(o.condition))
            .collect()
    }

    #[test]
    fn white_noise_lag1() {
        let r = residuals(&spec(0.0, 0.05, 250));
        assert!(stats::lag1_autocorrelation(&r).abs() < 0.1);
    }

    #[test]
    fn ar1_lag1_matches_phi() {
        let r = residuals(&spec(0.8, 0.05, 500));
        assert!((stats::lag1_autocorrelation(&r) - 0.8).abs() < 0.05);
    }

    #[test]
    fn tiny_sigma_gives_condition_means() {
        let s = spec(0.5, 1e-12, 3);
        for o in generate_series(&s).unwrap().observations() {
            assert!((o.value - s.condition_mean(o.condition)).abs() < 1e-10);
        }
    }

    #[test]
    fn marginal_variance() {
        let s = spec(0.6, 0.1, 1250);
        let r = residuals(&s);
        let want = 0.01 / (1.0 - 0.36);
        assert!((stats::sample_variance(&r) / want - 1.0).abs() < 0.1);
    }

    #[test]
    fn study_counts_and_balance() {
        let study = generate_study(
            &StudySpec {
                strides_per_condition: 50,
                ..StudySpec::default()
            },
            3,
        )
        .unwrap();
        assert_eq!(study.records.len(), 3200);
        let st_first = study
            .truths
            .iter()
            .filter(|t| t.stride_length.condition_order == ST_FIRST)
            .count();
        assert_eq!(st_first, 8);
        assert_eq!(study, generate_study(&StudySpec::default(), 3).unwrap());
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate_series(&spec(1.0, 0.1, 5)).is_err());
        let mut s = spec(0.1, 0.1, 5);
        s.condition_order = [WalkingCondition::StControl; 4];
        assert!(generate_series(&s).is_err());
    }
}
