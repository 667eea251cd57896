//! Turning worker labels into a dataset, using bias scores to filter or
//! down-weight workers, and measuring the demographic parity of the result.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BiasReport, LabelScale, Query, Response, Role, SensitiveSpec, TaskPlan};
use crate::scoring::SelfReportScore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// Weight 1 when normalized bias <= threshold, else 0.
    Filter { threshold: f64 },
    /// Weight `exp(-sharpness * normalized bias)`.
    Weighted { sharpness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    /// Plain mean over positive-weight responses.
    MeanRounded,
    /// Weighted median; an even split takes the lower label.
    Median,
    WeightedMeanRounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    #[serde(flatten)]
    pub mode: WeightMode,
    pub combiner: Combiner,
    /// Weight for workers whose score is missing or unreliable.
    #[serde(default = "default_unreliable_weight")]
    pub unreliable_weight: f64,
}

fn default_unreliable_weight() -> f64 {
    1.0
}

impl AggregationPolicy {
    pub fn filter(threshold: f64, combiner: Combiner) -> Self {
        Self {
            mode: WeightMode::Filter { threshold },
            combiner,
            unreliable_weight: 1.0,
        }
    }

    pub fn weighted(sharpness: f64, combiner: Combiner) -> Self {
        Self {
            mode: WeightMode::Weighted { sharpness },
            combiner,
            unreliable_weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            WeightMode::Filter { threshold } if !(0.0..=1.0).contains(&threshold) => Err(
                Error::Config(format!("filter threshold must lie in [0, 1], got {threshold}")),
            ),
            WeightMode::Weighted { sharpness } if !sharpness.is_finite() || sharpness < 0.0 => Err(
                Error::Config(format!("sharpness must be finite and >= 0, got {sharpness}")),
            ),
            _ if !self.unreliable_weight.is_finite() || self.unreliable_weight < 0.0 => Err(
                Error::Config("unreliable weight must be finite and >= 0".into()),
            ),
            _ => Ok(()),
        }
    }

    fn weight_for(&self, score: f64) -> f64 {
        match self.mode {
            WeightMode::Filter { threshold } => {
                if score <= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            WeightMode::Weighted { sharpness } => (-sharpness * score).exp(),
        }
    }
}

/// A worker's score on `[0, 1]` as seen by the weighting step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerScore {
    pub score: Option<f64>,
    pub reliable: bool,
}

impl From<&BiasReport> for WorkerScore {
    fn from(r: &BiasReport) -> Self {
        Self {
            score: r.normalized_bias,
            reliable: r.reliable,
        }
    }
}

impl From<&SelfReportScore> for WorkerScore {
    fn from(s: &SelfReportScore) -> Self {
        Self {
            score: Some(s.survey_score),
            reliable: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerWeight {
    pub weight: f64,
    /// Set when the weight is the policy default for an unreliable score.
    pub defaulted: bool,
}

pub type WeightTable = BTreeMap<String, WorkerWeight>;

pub fn weights_from_scores<'a>(
    scores: impl IntoIterator<Item = (&'a str, WorkerScore)>,
    policy: &AggregationPolicy,
) -> WeightTable {
    scores
        .into_iter()
        .map(|(worker, s)| {
            let w = match s.score {
                Some(score) if s.reliable => WorkerWeight {
                    weight: policy.weight_for(score),
                    defaulted: false,
                },
                _ => WorkerWeight {
                    weight: policy.unreliable_weight,
                    defaulted: true,
                },
            };
            (worker.to_string(), w)
        })
        .collect()
}

/// Per-worker weights from bias reports.
pub fn worker_weights(reports: &[BiasReport], policy: &AggregationPolicy) -> WeightTable {
    weights_from_scores(
        reports.iter().map(|r| (r.worker_id.as_str(), WorkerScore::from(r))),
        policy,
    )
}

/// Weight 1 for every listed worker.
pub fn uniform_weights<'a>(workers: impl IntoIterator<Item = &'a str>) -> WeightTable {
    workers
        .into_iter()
        .map(|w| {
            (
                w.to_string(),
                WorkerWeight {
                    weight: 1.0,
                    defaulted: false,
                },
            )
        })
        .collect()
}

/// A label a worker gave to a real query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledResponse {
    pub query_id: String,
    pub worker_id: String,
    pub label: i64,
}

/// Resolves responses to query ids through the plans' hidden maps.
/// Counterfactual items are synthetic and are left out of the dataset.
pub fn collect_labels(plans: &[TaskPlan], responses: &[Response]) -> Result<Vec<LabeledResponse>> {
    let by_worker: BTreeMap<&str, &TaskPlan> =
        plans.iter().map(|p| (p.worker_id.as_str(), p)).collect();
    let mut out = Vec::new();
    for r in responses {
        let plan = by_worker
            .get(r.worker_id.as_str())
            .ok_or_else(|| Error::Config(format!("no plan for worker `{}`", r.worker_id)))?;
        let entry = plan
            .hidden_map
            .get(&r.display_id)
            .ok_or_else(|| Error::UnknownDisplayId(r.display_id.clone()))?;
        if entry.role == Role::Counterfactual {
            continue;
        }
        out.push(LabeledResponse {
            query_id: entry.query_id.clone(),
            worker_id: r.worker_id.clone(),
            label: r.label,
        });
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLabel {
    pub label: i64,
    pub contributors: usize,
    pub total_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregatedDataset {
    pub labels: BTreeMap<String, AggregatedLabel>,
    /// Queries whose every contributor had zero weight.
    pub dropped: Vec<String>,
}

/// Nearest scale point; exact halves go toward the scale midpoint, and to
/// the lower point when both are equally close to it.
pub fn round_toward_midpoint(value: f64, scale: &LabelScale) -> i64 {
    let floor = value.floor();
    let frac = value - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        let mid = scale.midpoint();
        let (lo, hi) = (floor, floor + 1.0);
        if (hi - mid).abs() < (lo - mid).abs() {
            hi
        } else {
            lo
        }
    } else {
        value.round()
    };
    scale.clip_round(rounded)
}

fn weighted_median(mut labels: Vec<(i64, f64)>) -> i64 {
    labels.sort_by_key(|&(l, _)| l);
    let total: f64 = labels.iter().map(|&(_, w)| w).sum();
    let mut acc = 0.0;
    for &(l, w) in &labels {
        acc += w;
        if acc >= total / 2.0 - 1e-12 {
            return l;
        }
    }
    labels.last().map(|&(l, _)| l).expect("non-empty")
}

/// Combines each query's labels under the given worker weights.
/// Zero-weight responses do not count; a query left with no contributors is
/// listed in `dropped`.
pub fn aggregate_labels(
    responses: &[LabeledResponse],
    weights: &WeightTable,
    policy: &AggregationPolicy,
    scale: &LabelScale,
) -> Result<AggregatedDataset> {
    let mut by_query: BTreeMap<&str, Vec<(&str, i64, f64)>> = BTreeMap::new();
    for r in responses {
        scale.check(r.label)?;
        let w = weights
            .get(&r.worker_id)
            .ok_or_else(|| Error::MissingWeight(r.worker_id.clone()))?
            .weight;
        by_query
            .entry(&r.query_id)
            .or_default()
            .push((&r.worker_id, r.label, w));
    }
    let mut out = AggregatedDataset::default();
    for (query_id, mut rs) in by_query {
        rs.retain(|&(_, _, w)| w > 0.0);
        if rs.is_empty() {
            out.dropped.push(query_id.to_string());
            continue;
        }
        // fixed summation order keeps results bit-stable
        rs.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(&b.1)));
        let total_weight: f64 = rs.iter().map(|&(_, _, w)| w).sum();
        let label = match policy.combiner {
            Combiner::MeanRounded => {
                let sum: i64 = rs.iter().map(|&(_, l, _)| l).sum();
                round_toward_midpoint(sum as f64 / rs.len() as f64, scale)
            }
            Combiner::WeightedMeanRounded => {
                let sum: f64 = rs.iter().map(|&(_, l, w)| w * l as f64).sum();
                round_toward_midpoint(sum / total_weight, scale)
            }
            Combiner::Median => weighted_median(rs.iter().map(|&(_, l, w)| (l, w)).collect()),
        };
        out.labels.insert(
            query_id.to_string(),
            AggregatedLabel {
                label,
                contributors: rs.len(),
                total_weight,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub queries: usize,
    pub positives: usize,
    pub positive_rate: Option<f64>,
    pub mean_label: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub groups: BTreeMap<String, GroupStats>,
    pub reference_groups: (String, String),
    /// `|rate(first) - rate(second)|`; `None` when either group is empty.
    pub parity_gap: Option<f64>,
}

/// Positive-label rates per group in the aggregated dataset and the gap
/// between the two reference groups.
pub fn demographic_parity_gap(
    dataset: &AggregatedDataset,
    queries: &BTreeMap<String, Query>,
    spec: &SensitiveSpec,
    positive_threshold: i64,
) -> Result<FairnessSummary> {
    let mut acc: BTreeMap<&str, (usize, usize, i64)> =
        spec.groups().iter().map(|g| (g.as_str(), (0, 0, 0))).collect();
    let mut offending = Vec::new();
    for (query_id, agg) in &dataset.labels {
        let group = queries.get(query_id).and_then(|q| spec.group_of(q).ok());
        let Some(group) = group else {
            offending.push(query_id.clone());
            continue;
        };
        let e = acc.get_mut(group).expect("group validated");
        e.0 += 1;
        e.1 += usize::from(agg.label >= positive_threshold);
        e.2 += agg.label;
    }
    if !offending.is_empty() {
        return Err(Error::MissingSensitive(offending));
    }
    let groups: BTreeMap<String, GroupStats> = acc
        .into_iter()
        .map(|(g, (n, pos, sum))| {
            (
                g.to_string(),
                GroupStats {
                    queries: n,
                    positives: pos,
                    positive_rate: (n > 0).then(|| pos as f64 / n as f64),
                    mean_label: (n > 0).then(|| sum as f64 / n as f64),
                },
            )
        })
        .collect();
    let (a, b) = spec.reference_groups();
    let parity_gap = match (groups[a].positive_rate, groups[b].positive_rate) {
        (Some(x), Some(y)) => Some((x - y).abs()),
        _ => None,
    };
    Ok(FairnessSummary {
        groups,
        reference_groups: (a.to_string(), b.to_string()),
        parity_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub retained_workers: usize,
    pub dropped_queries: usize,
    pub fairness: FairnessSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub worker_id: String,
    pub counterfactual_score: Option<f64>,
    pub self_report_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub unweighted: PipelineOutcome,
    pub counterfactual: PipelineOutcome,
    pub self_report: PipelineOutcome,
    pub scatter: Vec<ScatterPoint>,
}

/// Everything [`compare_pipelines`] reads.
pub struct ComparisonInput<'a> {
    pub responses: &'a [LabeledResponse],
    pub reports: &'a [BiasReport],
    pub surveys: &'a [SelfReportScore],
    pub queries: &'a BTreeMap<String, Query>,
    pub spec: &'a SensitiveSpec,
    pub scale: &'a LabelScale,
    pub positive_threshold: i64,
}

/// Builds the unweighted dataset, the one weighted by counterfactual bias
/// scores and the one weighted by self-report scores under the same policy,
/// and summarizes the fairness of each.
pub fn compare_pipelines(input: &ComparisonInput<'_>, policy: &AggregationPolicy) -> Result<ComparisonReport> {
    policy.validate()?;
    let workers: BTreeSet<&str> = input.responses.iter().map(|r| r.worker_id.as_str()).collect();
    let survey_by_worker: BTreeMap<&str, &SelfReportScore> =
        input.surveys.iter().map(|s| (s.worker_id.as_str(), s)).collect();
    let report_by_worker: BTreeMap<&str, &BiasReport> =
        input.reports.iter().map(|r| (r.worker_id.as_str(), r)).collect();
    for w in &workers {
        if !survey_by_worker.contains_key(w) || !report_by_worker.contains_key(w) {
            return Err(Error::MissingWeight(w.to_string()));
        }
    }

    let run = |weights: &WeightTable| -> Result<PipelineOutcome> {
        let dataset = aggregate_labels(input.responses, weights, policy, input.scale)?;
        let fairness =
            demographic_parity_gap(&dataset, input.queries, input.spec, input.positive_threshold)?;
        Ok(PipelineOutcome {
            retained_workers: workers
                .iter()
                .filter(|w| weights.get(**w).is_some_and(|x| x.weight > 0.0))
                .count(),
            dropped_queries: dataset.dropped.len(),
            fairness,
        })
    };

    let unweighted = run(&uniform_weights(workers.iter().copied()))?;
    let counterfactual = run(&weights_from_scores(
        workers.iter().map(|w| (*w, WorkerScore::from(report_by_worker[w]))),
        policy,
    ))?;
    let self_report = run(&weights_from_scores(
        workers.iter().map(|w| (*w, WorkerScore::from(survey_by_worker[w]))),
        policy,
    ))?;
    let scatter = workers
        .iter()
        .map(|w| ScatterPoint {
            worker_id: w.to_string(),
            counterfactual_score: report_by_worker[w].normalized_bias,
            self_report_score: survey_by_worker[w].survey_score,
        })
        .collect();
    Ok(ComparisonReport {
        unweighted,
        counterfactual,
        self_report,
        scatter,
    })
}
