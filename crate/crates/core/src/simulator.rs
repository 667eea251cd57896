//! Synthetic workers and end-to-end experiments.
//!
//! A worker labels a query as `clip_round(latent + shift * [group is
//! disfavored] + Normal(0, noise_sd))`, where the latent score is a linear
//! function of non-sensitive numeric features. Spammers answer uniformly.
//! Masked workers answer surveys as if they had no bias.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aggregation::{collect_labels, compare_pipelines, AggregationPolicy, ComparisonInput, ComparisonReport};
use crate::counterfactual::DisguiseConfig;
use crate::error::{Error, Result};
use crate::model::{
    BiasReport, FieldKind, FieldValue, LabelScale, Query, Response, Role, Schema, SensitiveSpec,
};
use crate::pipeline::{assemble_worker_plan, AssemblyContext, WorkerAssignment};
use crate::rng::derived_stream;
use crate::scheduler::PlanConfig;
use crate::scoring::{bias_report, ingest_self_report, match_responses, SurveyAnswer, DEFAULT_MIN_PAIRS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerKind {
    Unbiased,
    ShiftBiased,
    Noisy,
    Spammer,
    DeceptiveBiased,
}

impl WorkerKind {
    pub fn name(&self) -> &'static str {
        match self {
            WorkerKind::Unbiased => "unbiased",
            WorkerKind::ShiftBiased => "shift_biased",
            WorkerKind::Noisy => "noisy",
            WorkerKind::Spammer => "spammer",
            WorkerKind::DeceptiveBiased => "deceptive_biased",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyHonesty {
    Honest,
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub kind: WorkerKind,
    /// Label shift applied to queries from a disfavored group.
    #[serde(default)]
    pub bias_shift: f64,
    #[serde(default)]
    pub noise_sd: f64,
    pub survey: SurveyHonesty,
    #[serde(default)]
    pub disfavored: BTreeSet<String>,
}

impl WorkerProfile {
    fn build(kind: WorkerKind, bias_shift: f64, noise_sd: f64, survey: SurveyHonesty) -> Self {
        Self {
            kind,
            bias_shift,
            noise_sd,
            survey,
            disfavored: BTreeSet::new(),
        }
    }

    pub fn unbiased(noise_sd: f64) -> Self {
        Self::build(WorkerKind::Unbiased, 0.0, noise_sd, SurveyHonesty::Honest)
    }

    pub fn shift_biased(bias_shift: f64, noise_sd: f64) -> Self {
        Self::build(WorkerKind::ShiftBiased, bias_shift, noise_sd, SurveyHonesty::Honest)
    }

    pub fn noisy(noise_sd: f64) -> Self {
        Self::build(WorkerKind::Noisy, 0.0, noise_sd, SurveyHonesty::Honest)
    }

    pub fn spammer() -> Self {
        Self::build(WorkerKind::Spammer, 0.0, 0.0, SurveyHonesty::Honest)
    }

    pub fn deceptive_biased(bias_shift: f64, noise_sd: f64) -> Self {
        Self::build(WorkerKind::DeceptiveBiased, bias_shift, noise_sd, SurveyHonesty::Masked)
    }

    pub fn disfavoring<S: Into<String>>(mut self, groups: impl IntoIterator<Item = S>) -> Self {
        self.disfavored = groups.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.bias_shift.is_finite() {
            return Err(Error::Config("bias shift must be finite".into()));
        }
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(Error::Config("noise sd must be finite and >= 0".into()));
        }
        if matches!(self.kind, WorkerKind::Unbiased | WorkerKind::Noisy) && self.bias_shift != 0.0 {
            return Err(Error::Config(format!(
                "{} workers cannot carry a bias shift",
                self.kind.name()
            )));
        }
        Ok(())
    }

    /// Shift that actually reaches labels (spammers ignore it).
    pub fn effective_shift(&self) -> f64 {
        match self.kind {
            WorkerKind::Spammer => 0.0,
            _ => self.bias_shift,
        }
    }
}

/// Linear ground-truth score over numeric features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl LatentModel {
    /// Rejects weights on the sensitive attribute or on dummy-identity fields.
    pub fn validate(&self, spec: &SensitiveSpec, disguise: &DisguiseConfig) -> Result<()> {
        for f in self.weights.keys() {
            if f == spec.attribute() || disguise.identity_pools.contains_key(f) {
                return Err(Error::Config(format!(
                    "latent model may not read `{f}` (sensitive or identity field)"
                )));
            }
        }
        Ok(())
    }

    /// Copy with the given fields removed.
    pub fn without<'a>(&self, fields: impl IntoIterator<Item = &'a String>) -> Self {
        let mut out = self.clone();
        for f in fields {
            out.weights.remove(f);
        }
        out
    }

    pub fn score(&self, query: &Query) -> Result<f64> {
        let mut total = self.intercept;
        for (field, w) in &self.weights {
            let v = match query.get(field) {
                Some(FieldValue::Numeric(v)) => *v,
                Some(other) => {
                    return Err(Error::WrongKind {
                        field: field.clone(),
                        expected: "numeric",
                        found: other.kind_name(),
                    })
                }
                None => return Err(Error::MissingField(field.clone())),
            };
            total += w * v;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulatedLabel {
    pub label: i64,
    /// The unclipped value fell outside the scale.
    pub clipped: bool,
}

/// One simulated label. Randomness is drawn from `stream` only for noisy
/// workers and spammers.
pub fn simulate_response<R: Rng + ?Sized>(
    worker: &WorkerProfile,
    query: &Query,
    latent: &LatentModel,
    spec: &SensitiveSpec,
    scale: &LabelScale,
    stream: &mut R,
) -> Result<SimulatedLabel> {
    if worker.kind == WorkerKind::Spammer {
        return Ok(SimulatedLabel {
            label: stream.random_range(scale.min_label()..=scale.max_label()),
            clipped: false,
        });
    }
    let group = spec.group_of(query)?;
    let mut value = latent.score(query)?;
    if worker.disfavored.contains(group) {
        value += worker.bias_shift;
    }
    if worker.noise_sd > 0.0 {
        let normal = Normal::new(0.0, worker.noise_sd)
            .map_err(|e| Error::Config(format!("noise sd: {e}")))?;
        value += normal.sample(stream);
    }
    let r = value.round();
    Ok(SimulatedLabel {
        label: scale.clip_round(value),
        clipped: r < scale.min_label() as f64 || r > scale.max_label() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub item_id: String,
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub reverse_coded: bool,
}

/// Survey items plus the shift magnitude an honest respondent reports as
/// maximal bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyForm {
    pub items: Vec<SurveyItem>,
    pub shift_ceiling: f64,
}

impl SurveyForm {
    /// A small default form: three Likert items on `[1, 5]`, one
    /// reverse-coded.
    pub fn likert(shift_ceiling: f64) -> Self {
        let item = |id: &str, reverse_coded| SurveyItem {
            item_id: id.to_string(),
            min: 1.0,
            max: 5.0,
            reverse_coded,
        };
        Self {
            items: vec![item("s1", false), item("s2", true), item("s3", false)],
            shift_ceiling,
        }
    }
}

/// Answers to a survey form. Honest workers report `min(1, |shift| /
/// ceiling)` as their position on each item; masked workers and spammers
/// answer like a worker with no bias.
pub fn simulate_survey(worker: &WorkerProfile, form: &SurveyForm) -> Vec<SurveyAnswer> {
    let level = match worker.survey {
        SurveyHonesty::Masked => 0.0,
        SurveyHonesty::Honest if form.shift_ceiling > 0.0 => {
            (worker.effective_shift().abs() / form.shift_ceiling).min(1.0)
        }
        SurveyHonesty::Honest => 0.0,
    };
    form.items
        .iter()
        .map(|item| {
            let pos = if item.reverse_coded { 1.0 - level } else { level };
            SurveyAnswer {
                item_id: item.item_id.clone(),
                value: item.min + pos * (item.max - item.min),
                min: item.min,
                max: item.max,
                reverse_coded: item.reverse_coded,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericRange {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub precision: u32,
}

/// Recipe for a synthetic query pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub size: usize,
    #[serde(default)]
    pub numeric: BTreeMap<String, NumericRange>,
    /// Text field -> candidate texts.
    #[serde(default)]
    pub text: BTreeMap<String, Vec<String>>,
}

/// Generates a pool: sensitive groups uniform, numeric fields uniform on
/// their range, identity fields drawn from the pool of the query's group,
/// text fields drawn from their candidates.
pub fn generate_pool(
    config: &PoolConfig,
    spec: &SensitiveSpec,
    disguise: &DisguiseConfig,
    seed: u64,
) -> Result<(Schema, Vec<Query>)> {
    let mut schema = Schema::new().field(
        spec.attribute(),
        FieldKind::Categorical {
            categories: spec.groups().iter().cloned().collect(),
        },
    );
    for (f, r) in &config.numeric {
        if r.max.is_nan() || r.min.is_nan() || r.max < r.min {
            return Err(Error::Config(format!("numeric range for `{f}` is empty")));
        }
        schema = schema.field(f, FieldKind::Numeric { precision: r.precision });
    }
    for f in disguise.identity_pools.keys().chain(config.text.keys()) {
        schema = schema.field(f, FieldKind::Text);
    }
    let mut rng = derived_stream(seed, &["pool"]);
    let mut queries = Vec::with_capacity(config.size);
    let width = config.size.to_string().len().max(4);
    for i in 0..config.size {
        let group = &spec.groups()[rng.random_range(0..spec.groups().len())];
        let mut q = Query::new(format!("q{:0width$}", i + 1))
            .with(spec.attribute(), FieldValue::Categorical(group.clone()));
        for (f, r) in &config.numeric {
            let scale = 10f64.powi(r.precision as i32);
            let v = if r.max > r.min { rng.random_range(r.min..=r.max) } else { r.min };
            q = q.with(f, FieldValue::Numeric((v * scale).round() / scale));
        }
        for (f, pools) in &disguise.identity_pools {
            let pool = pools.get(group).filter(|p| !p.is_empty()).ok_or_else(|| Error::EmptyPool {
                field: f.clone(),
                group: group.clone(),
            })?;
            q = q.with(f, FieldValue::Text(pool[rng.random_range(0..pool.len())].clone()));
        }
        for (f, texts) in &config.text {
            if texts.is_empty() {
                return Err(Error::Config(format!("no candidate texts for `{f}`")));
            }
            q = q.with(f, FieldValue::Text(texts[rng.random_range(0..texts.len())].clone()));
        }
        queries.push(q);
    }
    Ok((schema, queries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub count: usize,
    #[serde(flatten)]
    pub profile: WorkerProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanShape {
    pub total_items: usize,
    pub probe_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scale: LabelScale,
    pub sensitive: SensitiveSpec,
    /// Applied to every cohort that does not list its own.
    #[serde(default)]
    pub disfavored: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolConfig>,
    pub latent: LatentModel,
    /// Let the latent model read noise-perturbed fields, so disguise noise
    /// can legitimately move labels.
    #[serde(default)]
    pub latent_uses_perturbed: bool,
    #[serde(default)]
    pub disguise: DisguiseConfig,
    pub plan: PlanShape,
    /// Only queries whose rounded latent score lies in `[min + m, max - m]`
    /// become probe originals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_margin: Option<i64>,
    pub population: Vec<Cohort>,
    pub survey: SurveyForm,
    pub policy: AggregationPolicy,
    #[serde(default = "default_min_pairs")]
    pub min_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_threshold: Option<i64>,
}

fn default_min_pairs() -> usize {
    DEFAULT_MIN_PAIRS
}

impl ExperimentConfig {
    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig::new(
            self.plan.total_items,
            self.plan.probe_pairs,
            self.plan.min_separation,
            self.seed,
        )
    }

    pub fn positive_threshold(&self) -> i64 {
        self.positive_threshold
            .unwrap_or_else(|| self.scale.default_positive_threshold())
    }

    fn effective_latent(&self) -> LatentModel {
        if self.latent_uses_perturbed {
            self.latent.clone()
        } else {
            self.latent.without(self.disguise.noise_fields.keys())
        }
    }

    fn profiles(&self) -> Vec<(String, WorkerProfile)> {
        let total: usize = self.population.iter().map(|c| c.count).sum();
        let width = total.to_string().len().max(4);
        let mut out = Vec::with_capacity(total);
        for cohort in &self.population {
            let mut profile = cohort.profile.clone();
            if profile.disfavored.is_empty() {
                profile.disfavored = self.disfavored.clone();
            }
            for _ in 0..cohort.count {
                out.push((format!("w{:0width$}", out.len() + 1), profile.clone()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRow {
    pub worker_id: String,
    pub kind: WorkerKind,
    pub bias_shift: f64,
    pub noise_sd: f64,
    pub survey: SurveyHonesty,
    pub pair_count: usize,
    pub clipped_pairs: usize,
    pub raw_bias: Option<f64>,
    pub normalized_bias: Option<f64>,
    pub reliable: bool,
    pub self_report_score: f64,
    /// Latent scores of (original, counterfactual) for each probe pair.
    pub probe_latents: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    /// Mean raw bias score per worker kind, over workers with a score.
    pub mean_score_by_kind: BTreeMap<WorkerKind, f64>,
    pub biased_workers: usize,
    pub unbiased_workers: usize,
    /// Probability that a biased worker outscores an unbiased one, ties
    /// counting half.
    pub separation_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub workers: Vec<WorkerRow>,
    pub detection: DetectionStats,
    pub comparison: ComparisonReport,
}

/// Rank-based separation (Mann-Whitney AUC) of `high` over `low`.
pub fn separation_auc(high: &[f64], low: &[f64]) -> Option<f64> {
    if high.is_empty() || low.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for h in high {
        for l in low {
            wins += if h > l {
                1.0
            } else if h == l {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (high.len() * low.len()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedResponses {
    pub responses: Vec<Response>,
    /// Pairs with at least one clipped label.
    pub clipped_pairs: BTreeSet<String>,
}

/// Labels every item of a worker's plan, in display order, from a stream
/// derived from `seed` and the worker id.
pub fn respond_to_plan(
    profile: &WorkerProfile,
    assignment: &WorkerAssignment,
    pool: &BTreeMap<String, Query>,
    latent: &LatentModel,
    spec: &SensitiveSpec,
    scale: &LabelScale,
    seed: u64,
) -> Result<SimulatedResponses> {
    let plan = &assignment.plan;
    let counterfactuals: BTreeMap<&str, &Query> = assignment
        .pairs
        .iter()
        .map(|p| (p.counterfactual.query_id.as_str(), &p.counterfactual))
        .collect();
    let mut stream = derived_stream(seed, &["respond", &plan.worker_id]);
    let mut responses = Vec::with_capacity(plan.items.len());
    let mut clipped_pairs = BTreeSet::new();
    for item in &plan.items {
        let entry = plan
            .hidden_map
            .get(&item.display_id)
            .ok_or_else(|| Error::UnknownDisplayId(item.display_id.clone()))?;
        let query = match entry.role {
            Role::Counterfactual => counterfactuals.get(entry.query_id.as_str()).copied(),
            _ => pool.get(&entry.query_id),
        }
        .ok_or_else(|| Error::Config(format!("query `{}` not found", entry.query_id)))?;
        let sim = simulate_response(profile, query, latent, spec, scale, &mut stream)?;
        if sim.clipped {
            if let Some(pid) = &entry.pair_id {
                clipped_pairs.insert(pid.clone());
            }
        }
        responses.push(Response::new(&plan.worker_id, &item.display_id, sim.label));
    }
    Ok(SimulatedResponses {
        responses,
        clipped_pairs,
    })
}

/// Plans, simulated responses and surveys, scores and pipeline comparison
/// for a synthetic population. Fully determined by the config and pool.
pub fn run_experiment(config: &ExperimentConfig, schema: &Schema, pool: &[Query]) -> Result<ExperimentReport> {
    config.sensitive.check_schema(schema)?;
    config.disguise.validate(&config.sensitive)?;
    config.latent.validate(&config.sensitive, &config.disguise)?;
    config.policy.validate()?;
    for c in &config.population {
        c.profile.validate()?;
    }
    let plan_config = config.plan_config();
    plan_config.check()?;
    let latent = config.effective_latent();
    let scale = &config.scale;

    let eligible: Vec<usize> = pool
        .iter()
        .enumerate()
        .filter_map(|(i, q)| {
            let Some(m) = config.probe_margin else {
                return Some(Ok(i));
            };
            match latent.score(q) {
                Ok(s) => {
                    let r = s.round();
                    let inside = r >= (scale.min_label() + m) as f64 && r <= (scale.max_label() - m) as f64;
                    inside.then_some(Ok(i))
                }
                Err(e) => Some(Err(e)),
            }
        })
        .collect::<Result<_>>()?;

    let queries: BTreeMap<String, Query> = pool.iter().map(|q| (q.query_id.clone(), q.clone())).collect();
    let ctx = AssemblyContext {
        schema,
        spec: &config.sensitive,
        disguise: &config.disguise,
        plan: &plan_config,
    };

    let mut plans = Vec::new();
    let mut all_responses = Vec::new();
    let mut reports: Vec<BiasReport> = Vec::new();
    let mut surveys = Vec::new();
    let mut rows = Vec::new();
    for (worker_id, profile) in config.profiles() {
        let assignment = assemble_worker_plan(&worker_id, pool, &eligible, &ctx)?;
        let simulated = respond_to_plan(
            &profile,
            &assignment,
            &queries,
            &latent,
            &config.sensitive,
            scale,
            config.seed,
        )?;
        let responses = simulated.responses;

        let paired = match_responses(&assignment.plan, &responses)?;
        let report = bias_report(&paired, scale, config.min_pairs)?;
        let survey = ingest_self_report(&worker_id, &simulate_survey(&profile, &config.survey))?;
        let probe_latents = assignment
            .pairs
            .iter()
            .map(|p| Ok((latent.score(&p.original)?, latent.score(&p.counterfactual)?)))
            .collect::<Result<Vec<_>>>()?;

        rows.push(WorkerRow {
            worker_id: worker_id.clone(),
            kind: profile.kind,
            bias_shift: profile.bias_shift,
            noise_sd: profile.noise_sd,
            survey: profile.survey,
            pair_count: report.pair_count,
            clipped_pairs: simulated.clipped_pairs.len(),
            raw_bias: report.raw_bias,
            normalized_bias: report.normalized_bias,
            reliable: report.reliable,
            self_report_score: survey.survey_score,
            probe_latents,
        });
        reports.push(report);
        surveys.push(survey);
        all_responses.extend(responses);
        plans.push(assignment.plan);
    }

    let labeled = collect_labels(&plans, &all_responses)?;
    let comparison = compare_pipelines(
        &ComparisonInput {
            responses: &labeled,
            reports: &reports,
            surveys: &surveys,
            queries: &queries,
            spec: &config.sensitive,
            scale,
            positive_threshold: config.positive_threshold(),
        },
        &config.policy,
    )?;

    let mut by_kind: BTreeMap<WorkerKind, (f64, usize)> = BTreeMap::new();
    let mut biased = Vec::new();
    let mut unbiased = Vec::new();
    for row in &rows {
        let Some(score) = row.raw_bias else { continue };
        let e = by_kind.entry(row.kind).or_default();
        e.0 += score;
        e.1 += 1;
        if row.kind == WorkerKind::Unbiased {
            unbiased.push(score);
        } else if row.kind != WorkerKind::Spammer && row.bias_shift != 0.0 {
            biased.push(score);
        }
    }
    let detection = DetectionStats {
        mean_score_by_kind: by_kind.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        biased_workers: biased.len(),
        unbiased_workers: unbiased.len(),
        separation_auc: separation_auc(&biased, &unbiased),
    };

    Ok(ExperimentReport {
        seed: config.seed,
        workers: rows,
        detection,
        comparison,
    })
}
