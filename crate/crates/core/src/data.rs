//! Stride-level records and the preprocessing that turns them into
//! per-participant analysis series.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::stats;

/// The four cells of the 2×2 (task × fatigue) within-subject design.
///
/// Declaration order is the design order: ST-Control is the baseline
/// (intercept), then DT-Control, ST-Fatigue and DT-Fatigue map to the
/// second, third and fourth regression coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WalkingCondition {
    StControl,
    DtControl,
    StFatigue,
    DtFatigue,
}

impl WalkingCondition {
    pub const ALL: [WalkingCondition; 4] = [
        WalkingCondition::StControl,
        WalkingCondition::DtControl,
        WalkingCondition::StFatigue,
        WalkingCondition::DtFatigue,
    ];

    /// Position in design order (0 = ST-Control).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            WalkingCondition::StControl => "ST-Control",
            WalkingCondition::DtControl => "DT-Control",
            WalkingCondition::StFatigue => "ST-Fatigue",
            WalkingCondition::DtFatigue => "DT-Fatigue",
        }
    }

    pub fn is_dual_task(self) -> bool {
        matches!(
            self,
            WalkingCondition::DtControl | WalkingCondition::DtFatigue
        )
    }

    pub fn is_fatigue(self) -> bool {
        matches!(
            self,
            WalkingCondition::StFatigue | WalkingCondition::DtFatigue
        )
    }
}

impl fmt::Display for WalkingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WalkingCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        WalkingCondition::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::InvalidRecord(format!("unknown condition token `{t}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub fn label(self) -> &'static str {
        match self {
            Foot::Left => "left",
            Foot::Right => "right",
        }
    }
}

impl fmt::Display for Foot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Foot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("left") || t.eq_ignore_ascii_case("l") {
            Ok(Foot::Left)
        } else if t.eq_ignore_ascii_case("right") || t.eq_ignore_ascii_case("r") {
            Ok(Foot::Right)
        } else {
            Err(Error::InvalidRecord(format!("unknown foot token `{t}`")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    StrideLength,
    StrideTime,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::StrideLength, Outcome::StrideTime];

    pub fn label(self) -> &'static str {
        match self {
            Outcome::StrideLength => "stride_length",
            Outcome::StrideTime => "stride_time",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Outcome::StrideLength => "m",
            Outcome::StrideTime => "s",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "stride_length" | "sl" | "length" => Ok(Outcome::StrideLength),
            "stride_time" | "st" | "time" => Ok(Outcome::StrideTime),
            other => Err(Error::InvalidRecord(format!("unknown outcome `{other}`"))),
        }
    }
}

/// One stride of one foot.
#[derive(Clone, Debug, PartialEq)]
pub struct StrideRecord {
    pub participant_id: String,
    pub foot: Foot,
    pub condition: WalkingCondition,
    pub sequence_index: u32,
    /// Meters.
    pub stride_length: f64,
    /// Seconds.
    pub stride_time: f64,
}

impl StrideRecord {
    pub fn new(
        participant_id: impl Into<String>,
        foot: Foot,
        condition: WalkingCondition,
        sequence_index: u32,
        stride_length: f64,
        stride_time: f64,
    ) -> Result<Self> {
        let participant_id = participant_id.into();
        if participant_id.trim().is_empty() {
            return Err(Error::InvalidRecord("empty participant_id".into()));
        }
        for (name, v) in [
            ("stride_length", stride_length),
            ("stride_time", stride_time),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidRecord(format!(
                    "non-finite value for {name}: {v}"
                )));
            }
            if v <= 0.0 {
                return Err(Error::InvalidRecord(format!(
                    "non-positive value for {name}: {v}"
                )));
            }
        }
        Ok(StrideRecord {
            participant_id,
            foot,
            condition,
            sequence_index,
            stride_length,
            stride_time,
        })
    }

    pub fn value(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::StrideLength => self.stride_length,
            Outcome::StrideTime => self.stride_time,
        }
    }
}

/// Checks that `sequence_index` strictly increases (in input order) within
/// every (participant, foot, condition) group.
pub fn validate_sequence(records: &[StrideRecord]) -> Result<()> {
    let mut last: BTreeMap<(&str, Foot, WalkingCondition), u32> = BTreeMap::new();
    for r in records {
        let key = (r.participant_id.as_str(), r.foot, r.condition);
        if let Some(prev) = last.insert(key, r.sequence_index) {
            if r.sequence_index <= prev {
                return Err(Error::SeriesOrder {
                    participant: r.participant_id.clone(),
                    condition: r.condition,
                    detail: format!(
                        "{} foot sequence_index {} does not follow {}",
                        r.foot, r.sequence_index, prev
                    ),
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub condition: WalkingCondition,
    pub sequence_index: u32,
    pub value: f64,
}

/// Preprocessing settings that produced a series.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub foot: Option<Foot>,
    pub downsample_factor: usize,
    pub outlier_sd: f64,
    pub outliers_removed: usize,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            foot: None,
            downsample_factor: 1,
            outlier_sd: f64::INFINITY,
            outliers_removed: 0,
        }
    }
}

/// One participant's outcome series, ordered by condition block (in visit
/// order) and then by sequence index.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSeries {
    participant_id: String,
    outcome: Outcome,
    observations: Vec<Observation>,
    pub provenance: Provenance,
}

impl TrialSeries {
    /// Validates block contiguity and within-block ordering. Completeness is
    /// only required for fitting, see [`TrialSeries::require_complete`].
    pub fn new(
        participant_id: impl Into<String>,
        outcome: Outcome,
        observations: Vec<Observation>,
        provenance: Provenance,
    ) -> Result<Self> {
        let participant_id = participant_id.into();
        let mut closed = [false; 4];
        let mut current: Option<WalkingCondition> = None;
        let mut last_idx = 0u32;
        for o in &observations {
            if !o.value.is_finite() {
                return Err(Error::InvalidRecord(format!(
                    "participant {participant_id}: non-finite observation"
                )));
            }
            if current != Some(o.condition) {
                if closed[o.condition.index()] {
                    return Err(Error::SeriesOrder {
                        participant: participant_id,
                        condition: o.condition,
                        detail: "condition block is not contiguous".into(),
                    });
                }
                if let Some(c) = current {
                    closed[c.index()] = true;
                }
                current = Some(o.condition);
            } else if o.sequence_index <= last_idx {
                return Err(Error::SeriesOrder {
                    participant: participant_id,
                    condition: o.condition,
                    detail: format!(
                        "sequence_index {} does not follow {}",
                        o.sequence_index, last_idx
                    ),
                });
            }
            last_idx = o.sequence_index;
        }
        Ok(TrialSeries {
            participant_id,
            outcome,
            observations,
            provenance,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    /// Conditions in the order their blocks appear.
    pub fn block_order(&self) -> Vec<WalkingCondition> {
        let mut order: Vec<WalkingCondition> = Vec::with_capacity(4);
        for o in &self.observations {
            if order.last() != Some(&o.condition) {
                order.push(o.condition);
            }
        }
        order
    }

    pub fn missing_conditions(&self) -> Vec<WalkingCondition> {
        let present = self.block_order();
        WalkingCondition::ALL
            .into_iter()
            .filter(|c| !present.contains(c))
            .collect()
    }

    pub fn require_complete(&self) -> Result<()> {
        match self.missing_conditions().first() {
            None => Ok(()),
            Some(&condition) => Err(Error::MissingCondition {
                participant: self.participant_id.clone(),
                condition,
            }),
        }
    }

    /// Values of one condition block in sequence order.
    pub fn condition_values(&self, condition: WalkingCondition) -> Vec<f64> {
        self.observations
            .iter()
            .filter(|o| o.condition == condition)
            .map(|o| o.value)
            .collect()
    }
}

/// Knobs of [`preprocess`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub foot: Foot,
    pub downsample_factor: usize,
    /// Half-width of the retention band in block standard deviations.
    /// `f64::INFINITY` disables outlier removal.
    pub outlier_sd: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            foot: Foot::Left,
            downsample_factor: 5,
            outlier_sd: 3.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample_factor == 0 {
            return Err(Error::InvalidConfig(
                "downsample factor must be at least 1".into(),
            ));
        }
        if !(self.outlier_sd > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "outlier_sd must be positive, got {}",
                self.outlier_sd
            )));
        }
        Ok(())
    }
}

/// Both outcome series of one participant.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantSeries {
    pub stride_length: TrialSeries,
    pub stride_time: TrialSeries,
}

impl ParticipantSeries {
    pub fn get(&self, outcome: Outcome) -> &TrialSeries {
        match outcome {
            Outcome::StrideLength => &self.stride_length,
            Outcome::StrideTime => &self.stride_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PreprocessWarning {
    /// The participant lacked at least one condition after foot filtering and
    /// was excluded.
    MissingConditions {
        participant_id: String,
        missing: Vec<WalkingCondition>,
    },
}

impl fmt::Display for PreprocessWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessWarning::MissingConditions {
                participant_id,
                missing,
            } => {
                let names: Vec<&str> = missing.iter().map(|c| c.label()).collect();
                write!(
                    f,
                    "participant {participant_id} excluded: no strides for {}",
                    names.join(", ")
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub participants: BTreeMap<String, ParticipantSeries>,
    pub warnings: Vec<PreprocessWarning>,
    pub config: PreprocessConfig,
}

/// Foot filter, per-block outlier exclusion and sequential downsampling.
///
/// Per participant and condition block the mean and SD of each outcome are
/// taken over the whole foot-filtered block; values farther than
/// `outlier_sd` SDs from the mean are dropped (independently per outcome),
/// then every `downsample_factor`-th remaining stride is kept starting at the
/// first. Blocks keep the order in which the participant's conditions first
/// appear in `records`.
pub fn preprocess(records: &[StrideRecord], config: &PreprocessConfig) -> Result<Preprocessed> {
    config.validate()?;
    validate_sequence(records)?;

    // participant -> blocks in first-appearance order
    let mut grouped: BTreeMap<&str, Vec<(WalkingCondition, Vec<&StrideRecord>)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.foot == config.foot) {
        let blocks = grouped.entry(r.participant_id.as_str()).or_default();
        match blocks.iter_mut().find(|(c, _)| *c == r.condition) {
            Some((_, v)) => v.push(r),
            None => blocks.push((r.condition, alloc::vec![r])),
        }
    }
    // participants that have only other-foot strides are reported too
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    for r in records {
        seen.insert(r.participant_id.as_str(), ());
    }

    let mut participants = BTreeMap::new();
    let mut warnings = Vec::new();
    for &pid in seen.keys() {
        let blocks = grouped.remove(pid).unwrap_or_default();
        let missing: Vec<WalkingCondition> = WalkingCondition::ALL
            .into_iter()
            .filter(|c| !blocks.iter().any(|(b, _)| b == c))
            .collect();
        if !missing.is_empty() {
            warnings.push(PreprocessWarning::MissingConditions {
                participant_id: pid.to_string(),
                missing,
            });
            continue;
        }
        let sl = build_outcome_series(pid, Outcome::StrideLength, &blocks, config)?;
        let st = build_outcome_series(pid, Outcome::StrideTime, &blocks, config)?;
        participants.insert(
            pid.to_string(),
            ParticipantSeries {
                stride_length: sl,
                stride_time: st,
            },
        );
    }
    Ok(Preprocessed {
        participants,
        warnings,
        config: *config,
    })
}

fn build_outcome_series(
    pid: &str,
    outcome: Outcome,
    blocks: &[(WalkingCondition, Vec<&StrideRecord>)],
    config: &PreprocessConfig,
) -> Result<TrialSeries> {
    let mut observations = Vec::new();
    let mut removed = 0;
    for (condition, block) in blocks {
        let values: Vec<f64> = block.iter().map(|r| r.value(outcome)).collect();
        let m = stats::mean(&values);
        let sd = stats::sample_sd(&values);
        let band = config.outlier_sd * sd;
        // sd == 0 would otherwise turn rounding noise in the mean into outliers
        let keep_all = sd == 0.0 || config.outlier_sd.is_infinite();
        let kept: Vec<&&StrideRecord> = block
            .iter()
            .filter(|r| keep_all || crate::math::abs(r.value(outcome) - m) <= band)
            .collect();
        removed += block.len() - kept.len();
        observations.extend(
            kept.iter()
                .step_by(config.downsample_factor)
                .map(|r| Observation {
                    condition: *condition,
                    sequence_index: r.sequence_index,
                    value: r.value(outcome),
                }),
        );
    }
    TrialSeries::new(
        pid,
        outcome,
        observations,
        Provenance {
            foot: Some(config.foot),
            downsample_factor: config.downsample_factor,
            outlier_sd: config.outlier_sd,
            outliers_removed: removed,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        MeanSd {
            mean: stats::mean(xs),
            sd: stats::sample_sd(xs),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionDescription {
    pub condition: WalkingCondition,
    pub n: usize,
    pub stride_length: MeanSd,
    pub stride_time: MeanSd,
}

/// Per-condition stride counts and mean ± SD of both outcomes, pooled over
/// participants. Conditions without strides are omitted.
pub fn describe(records: &[StrideRecord]) -> Result<Vec<ConditionDescription>> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let out = WalkingCondition::ALL
        .into_iter()
        .filter_map(|c| {
            let rows: Vec<&StrideRecord> = records.iter().filter(|r| r.condition == c).collect();
            if rows.is_empty() {
                return None;
            }
            let sl: Vec<f64> = rows.iter().map(|r| r.stride_length).collect();
            let st: Vec<f64> = rows.iter().map(|r| r.stride_time).collect();
            Some(ConditionDescription {
                condition: c,
                n: rows.len(),
                stride_length: MeanSd::of(&sl),
                stride_time: MeanSd::of(&st),
            })
        })
        .collect();
    Ok(out)
}
