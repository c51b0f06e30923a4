//! Population-level reference analysis: the 2×2 fully within-subject
//! repeated-measures ANOVA on per-participant cell means.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::data::{Foot, Outcome, Preprocessed, StrideRecord, WalkingCondition};
use crate::error::{Error, Result};
use crate::special::f_sf;
use crate::stats;

#[derive(Clone, Debug, PartialEq)]
pub struct CellMeans {
    pub outcome: Outcome,
    /// Participant id and the four cell means in design order.
    pub participants: Vec<(String, [f64; 4])>,
    pub warnings: Vec<CellWarning>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellWarning {
    IncompleteCells {
        participant_id: String,
        missing: Vec<WalkingCondition>,
    },
}

impl fmt::Display for CellWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellWarning::IncompleteCells {
                participant_id,
                missing,
            } => {
                let names: Vec<&str> = missing.iter().map(|c| c.label()).collect();
                write!(
                    f,
                    "participant {participant_id} excluded from ANOVA: empty cells {}",
                    names.join(", ")
                )
            }
        }
    }
}

impl CellMeans {
    /// Mean of the raw stride values per participant and condition,
    /// optionally restricted to one foot. Participants with an empty cell
    /// are dropped with a warning.
    pub fn from_records(records: &[StrideRecord], outcome: Outcome, foot: Option<Foot>) -> Self {
        let mut groups: BTreeMap<&str, [Vec<f64>; 4]> = BTreeMap::new();
        for r in records {
            let cells = groups.entry(r.participant_id.as_str()).or_default();
            if foot.is_none_or(|f| f == r.foot) {
                cells[r.condition.index()].push(r.value(outcome));
            }
        }
        let mut participants = Vec::new();
        let mut warnings = Vec::new();
        for (pid, cells) in groups {
            let missing: Vec<WalkingCondition> = WalkingCondition::ALL
                .into_iter()
                .filter(|c| cells[c.index()].is_empty())
                .collect();
            if missing.is_empty() {
                participants.push((pid.to_string(), cells.each_ref().map(|v| stats::mean(v))));
            } else {
                warnings.push(CellWarning::IncompleteCells {
                    participant_id: pid.to_string(),
                    missing,
                });
            }
        }
        CellMeans {
            outcome,
            participants,
            warnings,
        }
    }

    /// Cell means of already preprocessed series; these are complete by
    /// construction.
    pub fn from_preprocessed(data: &Preprocessed, outcome: Outcome) -> Self {
        let participants = data
            .participants
            .iter()
            .map(|(pid, s)| {
                let series = s.get(outcome);
                (
                    pid.clone(),
                    WalkingCondition::ALL.map(|c| stats::mean(&series.condition_values(c))),
                )
            })
            .collect();
        CellMeans {
            outcome,
            participants,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Effect {
    Fatigue,
    Task,
    Interaction,
}

impl Effect {
    pub const ALL: [Effect; 3] = [Effect::Fatigue, Effect::Task, Effect::Interaction];

    pub fn label(self) -> &'static str {
        match self {
            Effect::Fatigue => "fatigue",
            Effect::Task => "task",
            Effect::Interaction => "fatigue:task",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectRow {
    pub effect: Effect,
    pub f: f64,
    pub df1: u32,
    pub df2: u32,
    pub p: f64,
    /// Generalized eta squared.
    pub ges: f64,
    pub ss_effect: f64,
    pub ss_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnovaResult {
    pub outcome: Outcome,
    pub n_participants: usize,
    pub rows: [EffectRow; 3],
    pub ss_subjects: f64,
    pub ss_total: f64,
}

impl AnovaResult {
    pub fn get(&self, effect: Effect) -> &EffectRow {
        &self.rows[effect as usize]
    }
}

/// Two-way fully within-subject ANOVA (fatigue × task).
///
/// Every effect has one degree of freedom, so each reduces to a one-sample
/// test on a per-participant contrast score `d`: `SS_effect = n·mean(d)²`
/// and `SS_error = Σ(d - mean(d))²`, with `d` scaled so the sums equal the
/// classical decomposition.
pub fn rm_anova_2x2(cells: &CellMeans) -> Result<AnovaResult> {
    let n = cells.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "ANOVA needs at least 3 complete participants, got {n}"
        )));
    }
    let rows: Vec<[f64; 4]> = cells.participants.iter().map(|(_, c)| *c).collect();
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite cell mean".into()));
    }
    // (fatigue, task) levels: y00 = ST-Control, y01 = DT-Control, y10 = ST-Fatigue, y11 = DT-Fatigue
    let contrast = |effect: Effect, y: &[f64; 4]| -> f64 {
        let (y00, y01, y10, y11) = (y[0], y[1], y[2], y[3]);
        match effect {
            Effect::Fatigue => ((y10 + y11) - (y00 + y01)) / 2.0,
            Effect::Task => ((y01 + y11) - (y00 + y10)) / 2.0,
            Effect::Interaction => ((y11 + y00) - (y10 + y01)) / 2.0,
        }
    };

    // grouped so that exchanging the two factors leaves every sum unchanged
    let subject_sum = |y: &[f64; 4]| (y[0] + y[3]) + (y[1] + y[2]);
    let nf = n as f64;
    let all: Vec<f64> = rows.iter().flatten().copied().collect();
    let grand = rows.iter().map(subject_sum).sum::<f64>() / (4.0 * nf);
    let ss_total: f64 = all.iter().map(|v| (v - grand) * (v - grand)).sum();
    let ss_subjects: f64 = rows
        .iter()
        .map(|y| {
            let m = subject_sum(y) / 4.0 - grand;
            4.0 * m * m
        })
        .sum();
    let magnitude: f64 = all.iter().map(|v| v * v).sum();
    let floor = magnitude * (64.0 * f64::EPSILON) * (64.0 * f64::EPSILON);

    let mut parts = [(0.0, 0.0); 3];
    for effect in Effect::ALL {
        let d: Vec<f64> = rows.iter().map(|y| contrast(effect, y)).collect();
        let mean = stats::mean(&d);
        let ss_error: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum();
        if ss_error <= floor {
            return Err(Error::Degenerate(format!(
                "zero error variance for the {effect} effect"
            )));
        }
        parts[effect as usize] = (nf * mean * mean, ss_error);
    }
    let err_total: f64 = parts.iter().map(|p| p.1).sum();
    let df2 = (n - 1) as u32;
    let rows = Effect::ALL.map(|effect| {
        let (ss_effect, ss_error) = parts[effect as usize];
        let f = ss_effect / (ss_error / df2 as f64);
        EffectRow {
            effect,
            f,
            df1: 1,
            df2,
            p: f_sf(f, 1.0, df2 as f64),
            ges: ss_effect / (ss_effect + ss_subjects + err_total),
            ss_effect,
            ss_error,
        }
    });
    Ok(AnovaResult {
        outcome: cells.outcome,
        n_participants: n,
        rows,
        ss_subjects,
        ss_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(pid: &str, c: WalkingCondition, i: u32, v: f64) -> StrideRecord {
        StrideRecord::new(pid, Foot::Left, c, i, v, 1.0).unwrap()
    }

    fn cells(rows: &[[f64; 4]]) -> CellMeans {
        CellMeans {
            outcome: Outcome::StrideLength,
            participants: rows
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("p{i}"), *r))
                .collect(),
            warnings: vec![],
        }
    }

    #[test]
    fn cell_is_stride_mean() {
        let mut recs = vec![
            rec("a", WalkingCondition::StControl, 0, 1.4),
            rec("a", WalkingCondition::StControl, 1, 1.6),
        ];
        for (i, c) in WalkingCondition::ALL[1..].iter().enumerate() {
            recs.push(rec("a", *c, i as u32, 1.3));
        }
        let cm = CellMeans::from_records(&recs, Outcome::StrideLength, None);
        assert!((cm.participants[0].1[0] - 1.5).abs() < 1e-15);
        assert_eq!(cm.participants[0].1[3], 1.3);
    }

    #[test]
    fn incomplete_participant_warned() {
        let recs = vec![rec("a", WalkingCondition::StControl, 0, 1.4)];
        let cm = CellMeans::from_records(&recs, Outcome::StrideLength, Some(Foot::Left));
        assert!(cm.is_empty());
        assert_eq!(cm.warnings.len(), 1);
    }

    #[test]
    fn needs_three_participants() {
        assert!(rm_anova_2x2(&cells(&[[1.0, 2.0, 3.0, 4.0], [2.0, 2.5, 3.0, 5.0]])).is_err());
    }

    #[test]
    fn flat_cells_are_degenerate() {
        let r = rm_anova_2x2(&cells(&[[1.4; 4], [1.3; 4], [1.5; 4]]));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn decomposition_sums_to_total() {
        let c = cells(&[
            [1.40, 1.31, 1.38, 1.27],
            [1.52, 1.41, 1.49, 1.40],
            [1.33, 1.29, 1.30, 1.20],
            [1.45, 1.30, 1.44, 1.33],
        ]);
        let a = rm_anova_2x2(&c).unwrap();
        let parts: f64 =
            a.ss_subjects + a.rows.iter().map(|r| r.ss_effect + r.ss_error).sum::<f64>();
        assert!((parts - a.ss_total).abs() <= 1e-12 * a.ss_total);
        for r in &a.rows {
            assert_eq!((r.df1, r.df2), (1, 3));
            assert!((0.0..=1.0).contains(&r.ges) && (0.0..=1.0).contains(&r.p));
        }
        assert!(a.get(Effect::Task).f > a.get(Effect::Fatigue).f);
    }
}
