//! Per-worker bias scores from probe pairs, plus the two baselines they are
//! compared against: gold-question error-rate differences and self-report
//! surveys.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    scale_range, BiasReport, LabelScale, Query, ReportFlag, Response, Role, SensitiveSpec, TaskPlan,
};

/// Complete pairs need at least this many entries for a report to count as
/// reliable.
pub const DEFAULT_MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedLabel {
    pub pair_id: String,
    pub original: i64,
    pub counterfactual: i64,
}

/// Label pairs of one worker. Only pairs with both halves answered appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedLabels {
    pub worker_id: String,
    pub entries: Vec<PairedLabel>,
    pub incomplete_pairs: usize,
}

/// Rebuilds (original, counterfactual) label pairs from a plan's hidden map.
/// Filler responses are ignored.
pub fn match_responses(plan: &TaskPlan, responses: &[Response]) -> Result<PairedLabels> {
    let mut labels: BTreeMap<&str, i64> = BTreeMap::new();
    for r in responses {
        if r.worker_id != plan.worker_id {
            return Err(Error::WorkerMismatch {
                expected: plan.worker_id.clone(),
                found: r.worker_id.clone(),
            });
        }
        if !plan.hidden_map.contains_key(&r.display_id) {
            return Err(Error::UnknownDisplayId(r.display_id.clone()));
        }
        if labels.insert(&r.display_id, r.label).is_some() {
            return Err(Error::DuplicateResponse(r.display_id.clone()));
        }
    }
    let mut entries = Vec::new();
    let mut incomplete_pairs = 0;
    for (pair_id, (orig, cf)) in plan.pair_slots() {
        let o = orig.and_then(|id| labels.get(id));
        let c = cf.and_then(|id| labels.get(id));
        match (o, c) {
            (Some(&original), Some(&counterfactual)) => entries.push(PairedLabel {
                pair_id: pair_id.to_string(),
                original,
                counterfactual,
            }),
            _ => incomplete_pairs += 1,
        }
    }
    Ok(PairedLabels {
        worker_id: plan.worker_id.clone(),
        entries,
        incomplete_pairs,
    })
}

/// Mean absolute label difference over the complete pairs.
pub fn worker_bias(paired: &PairedLabels) -> Result<f64> {
    if paired.entries.is_empty() {
        return Err(Error::NoUsablePairs);
    }
    let total: i64 = paired
        .entries
        .iter()
        .map(|e| (e.original - e.counterfactual).abs())
        .sum();
    Ok(total as f64 / paired.entries.len() as f64)
}

pub fn normalized_bias(raw: f64, scale: &LabelScale) -> f64 {
    raw / scale_range(scale) as f64
}

/// Scores one worker. A worker without complete pairs gets a report with no
/// score and the `no_usable_probe_pairs` flag rather than a zero.
pub fn bias_report(paired: &PairedLabels, scale: &LabelScale, min_pairs: usize) -> Result<BiasReport> {
    for e in &paired.entries {
        scale.check(e.original)?;
        scale.check(e.counterfactual)?;
    }
    let pair_count = paired.entries.len();
    let mut flags = Vec::new();
    let raw = match worker_bias(paired) {
        Ok(v) => Some(v),
        Err(Error::NoUsablePairs) => {
            flags.push(ReportFlag::NoUsableProbePairs);
            None
        }
        Err(e) => return Err(e),
    };
    let reliable = pair_count >= min_pairs && raw.is_some();
    if !reliable {
        flags.push(ReportFlag::Unreliable);
    }
    flags.sort();
    Ok(BiasReport {
        worker_id: paired.worker_id.clone(),
        pair_count,
        raw_bias: raw,
        normalized_bias: raw.map(|r| normalized_bias(r, scale)),
        incomplete_pairs: paired.incomplete_pairs,
        reliable,
        flags,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// FP / (FP + TN); `None` without gold negatives.
    pub fn fpr(&self) -> Option<f64> {
        let d = self.fp + self.tn;
        (d > 0).then(|| self.fp as f64 / d as f64)
    }

    /// TP / (TP + FN); `None` without gold positives.
    pub fn tpr(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldBaselineReport {
    pub worker_id: String,
    /// Compared groups, in difference order (first minus second).
    pub groups: (String, String),
    pub confusion: BTreeMap<String, Confusion>,
    /// `None` when a compared group has no gold negatives.
    pub fpr_difference: Option<f64>,
    /// `None` when a compared group has no gold positives.
    pub tpr_difference: Option<f64>,
    /// Responses skipped because their query has no gold label.
    pub skipped: usize,
}

/// Error-rate differences between the two reference groups on gold items.
/// Worker and gold labels are positive iff `>= positive_threshold`.
pub fn gold_baseline(
    responses: &[Response],
    plan: &TaskPlan,
    queries: &BTreeMap<String, Query>,
    spec: &SensitiveSpec,
    positive_threshold: i64,
) -> Result<GoldBaselineReport> {
    let (a, b) = spec.reference_groups();
    let mut confusion: BTreeMap<String, Confusion> = spec
        .groups()
        .iter()
        .map(|g| (g.clone(), Confusion::default()))
        .collect();
    let mut skipped = 0;
    for r in responses {
        if r.worker_id != plan.worker_id {
            continue;
        }
        let entry = plan
            .hidden_map
            .get(&r.display_id)
            .ok_or_else(|| Error::UnknownDisplayId(r.display_id.clone()))?;
        let gold_query = match entry.role {
            Role::Counterfactual => None,
            _ => queries.get(&entry.query_id),
        };
        let Some((query, gold)) = gold_query.and_then(|q| q.gold_label.map(|g| (q, g))) else {
            skipped += 1;
            continue;
        };
        let group = spec.group_of(query)?;
        confusion
            .get_mut(group)
            .expect("groups pre-seeded")
            .record(r.label >= positive_threshold, gold >= positive_threshold);
    }
    let diff = |f: fn(&Confusion) -> Option<f64>| -> Option<f64> {
        Some(f(&confusion[a])? - f(&confusion[b])?)
    };
    Ok(GoldBaselineReport {
        worker_id: plan.worker_id.clone(),
        groups: (a.to_string(), b.to_string()),
        fpr_difference: diff(Confusion::fpr),
        tpr_difference: diff(Confusion::tpr),
        confusion,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyAnswer {
    pub item_id: String,
    pub value: f64,
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub reverse_coded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfReportScore {
    pub worker_id: String,
    pub survey_score: f64,
}

/// Mean of min-max rescaled answers, reverse-coded items flipped, so that 0
/// reads as unbiased and 1 as maximally biased.
pub fn ingest_self_report(worker_id: &str, answers: &[SurveyAnswer]) -> Result<SelfReportScore> {
    if answers.is_empty() {
        return Err(Error::EmptySurvey);
    }
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for a in answers {
        if a.max.partial_cmp(&a.min) != Some(std::cmp::Ordering::Greater) || !(a.min..=a.max).contains(&a.value) {
            return Err(Error::SurveyOutOfRange {
                item: a.item_id.clone(),
                value: a.value,
                min: a.min,
                max: a.max,
            });
        }
        if !seen.insert(&a.item_id) {
            return Err(Error::Config(format!("survey item `{}` answered twice", a.item_id)));
        }
        let scaled = (a.value - a.min) / (a.max - a.min);
        total += if a.reverse_coded { 1.0 - scaled } else { scaled };
    }
    Ok(SelfReportScore {
        worker_id: worker_id.to_string(),
        survey_score: total / answers.len() as f64,
    })
}
