use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use cfprobe_core::aggregation::{
    aggregate_labels, collect_labels, demographic_parity_gap, uniform_weights, worker_weights,
    AggregatedDataset, AggregatedLabel, AggregationPolicy, FairnessSummary,
};
use cfprobe_core::counterfactual::{parse_identity_pools, parse_lexicon, DisguiseConfig};
use cfprobe_core::pipeline::{assemble_worker_plan, AssemblyContext, WorkerAssignment};
use cfprobe_core::records::{
    parse_numbered_records, read_queries, read_records, render_task_file, sha256_hex,
    write_atomic, write_records, Empty, Header, HiddenHeader, HiddenPlanRecord, RunManifest,
    TaskSpec, FORMAT_VERSION,
};
use cfprobe_core::scheduler::PlanConfig;
use cfprobe_core::scoring::{bias_report, match_responses, SurveyAnswer};
use cfprobe_core::simulator::{
    generate_pool, respond_to_plan, run_experiment, simulate_survey, Cohort, ExperimentConfig,
    ExperimentReport, LatentModel, PlanShape, SurveyForm, WorkerKind, WorkerRow,
};
use cfprobe_core::{validate_query, BiasReport, LabelScale, Query, Response};

pub const HIDDEN_FILE: &str = "plans.hidden";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFileConfig {
    seed: Option<u64>,
    #[serde(default)]
    workers: Vec<String>,
    worker_count: Option<usize>,
    plan: PlanShape,
    #[serde(default)]
    disguise: DisguiseConfig,
    /// `term<TAB>counterpart` lines; relative to the config file.
    lexicon_file: Option<PathBuf>,
    /// `group<TAB>field<TAB>value` lines; relative to the config file.
    identity_pools_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    seed: Option<u64>,
    #[serde(default)]
    disfavored: BTreeSet<String>,
    latent: LatentModel,
    #[serde(default)]
    latent_uses_perturbed: bool,
    /// Cohorts are assigned to the plan's workers in order.
    population: Vec<Cohort>,
    survey: Option<SurveyForm>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub worker_id: String,
    pub answers: Vec<SurveyAnswer>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportsHeader {
    pub scale: LabelScale,
    pub min_pairs: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub scale: LabelScale,
    pub dropped: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub query_id: String,
    #[serde(flatten)]
    pub label: AggregatedLabel,
}

#[derive(Debug, Serialize, Deserialize)]
struct Document<T> {
    format_version: u32,
    kind: String,
    manifest: RunManifest,
    #[serde(flatten)]
    body: T,
}

fn write_document<T: Serialize>(path: &Path, kind: &str, manifest: &RunManifest, body: T) -> Result<()> {
    let doc = Document {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        manifest: manifest.clone(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn check_worker_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    ensure!(ok, "worker id `{id}` must be non-empty ASCII letters, digits, `-`, `_` or `.`");
    Ok(())
}

/// Reads a query pool with line-numbered validation against its own header.
fn load_pool(path: &Path) -> Result<(TaskSpec, Vec<Query>)> {
    let source = path.display().to_string();
    let (header, records): (Header<TaskSpec>, Vec<(usize, Query)>) =
        parse_numbered_records(&read_text(path)?, "queries", &source)?;
    let task = header.body;
    task.sensitive.check_schema(&task.schema)?;
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    let mut queries = Vec::with_capacity(records.len());
    for (line, mut q) in records {
        task.schema.conform(&mut q);
        if !seen.insert(q.query_id.clone()) {
            problems.push(format!("{source}:{line}: duplicate query id `{}`", q.query_id));
        }
        for v in validate_query(&q, &task.schema, &task.scale) {
            problems.push(format!("{source}:{line}: query `{}`: {v}", q.query_id));
        }
        queries.push(q);
    }
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("{p}");
        }
        bail!("{} invalid query record(s) in {source}", problems.len());
    }
    Ok((task, queries))
}

pub fn plan(queries: &Path, config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config_text = read_text(config_path)?;
    let mut config: PlanFileConfig = serde_json::from_str(&config_text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let seed = seed
        .or(config.seed)
        .ok_or_else(|| anyhow!("no seed: set `seed` in the config or pass --seed"))?;
    let mut manifest = RunManifest::new("plan")
        .with_seed(seed)
        .with_config(config_text.as_bytes())
        .with_input(queries)?;

    if let Some(p) = &config.lexicon_file {
        ensure!(
            config.disguise.term_lexicon.is_empty(),
            "set either disguise.term_lexicon or lexicon_file, not both"
        );
        let p = relative_to(config_path, p);
        config.disguise.term_lexicon = parse_lexicon(&read_text(&p)?, &p.display().to_string())?;
        manifest = manifest.with_input(&p)?;
    }
    if let Some(p) = &config.identity_pools_file {
        ensure!(
            config.disguise.identity_pools.is_empty(),
            "set either disguise.identity_pools or identity_pools_file, not both"
        );
        let p = relative_to(config_path, p);
        config.disguise.identity_pools = parse_identity_pools(&read_text(&p)?, &p.display().to_string())?;
        manifest = manifest.with_input(&p)?;
    }
    config.disguise.rng_seed = seed;

    let workers: Vec<String> = match (config.workers.is_empty(), config.worker_count) {
        (false, None) => config.workers.clone(),
        (true, Some(n)) => {
            let width = n.to_string().len().max(4);
            (1..=n).map(|i| format!("w{i:0width$}")).collect()
        }
        _ => bail!("give exactly one of `workers` (a list of ids) or `worker_count`"),
    };
    ensure!(!workers.is_empty(), "no workers to plan for");
    let mut unique = BTreeSet::new();
    for w in &workers {
        check_worker_id(w)?;
        ensure!(unique.insert(w.as_str()), "worker id `{w}` repeated");
    }

    let (task, pool) = load_pool(queries)?;
    config.disguise.validate(&task.sensitive)?;
    let plan_config = PlanConfig::new(
        config.plan.total_items,
        config.plan.probe_pairs,
        config.plan.min_separation,
        seed,
    );
    plan_config.check()?;
    let ctx = AssemblyContext {
        schema: &task.schema,
        spec: &task.sensitive,
        disguise: &config.disguise,
        plan: &plan_config,
    };
    let eligible: Vec<usize> = (0..pool.len()).collect();
    let assignments = workers
        .iter()
        .map(|w| assemble_worker_plan(w, &pool, &eligible, &ctx))
        .collect::<cfprobe_core::Result<Vec<_>>>()?;

    let digest = manifest.digest();
    for a in &assignments {
        let path = out.join(format!("{}.plan", a.plan.worker_id));
        write_atomic(&path, render_task_file(&a.plan, &digest)?.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let header = Header::new(
        "hidden_plans",
        Some(manifest),
        HiddenHeader {
            task,
            total_items: plan_config.total_items,
            probe_pairs: plan_config.probe_pairs,
            min_separation: plan_config.separation(),
            separation_defaulted: config.plan.min_separation.is_none(),
        },
    );
    let hidden: Vec<HiddenPlanRecord> = assignments.iter().map(HiddenPlanRecord::from_assignment).collect();
    write_records(&out.join(HIDDEN_FILE), &header, &hidden)?;
    if config.plan.min_separation.is_none() {
        eprintln!(
            "note: min_separation defaulted to {} for {} items",
            plan_config.separation(),
            plan_config.total_items
        );
    }
    Ok(())
}

fn read_hidden(path: &Path) -> Result<(Header<HiddenHeader>, Vec<HiddenPlanRecord>)> {
    let (header, mut records): (Header<HiddenHeader>, Vec<HiddenPlanRecord>) =
        read_records(path, "hidden_plans").with_context(|| format!("reading {}", path.display()))?;
    for r in &mut records {
        r.conform(&header.body.task.schema);
    }
    Ok((header, records))
}

pub fn simulate(queries: &Path, hidden_map: &Path, config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config_text = read_text(config_path)?;
    let config: SimulateConfig = serde_json::from_str(&config_text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let seed = seed
        .or(config.seed)
        .ok_or_else(|| anyhow!("no seed: set `seed` in the config or pass --seed"))?;
    let manifest = RunManifest::new("simulate")
        .with_seed(seed)
        .with_config(config_text.as_bytes())
        .with_input(queries)?
        .with_input(hidden_map)?;

    let (task, pool) = load_pool(queries)?;
    let (header, hidden) = read_hidden(hidden_map)?;
    ensure!(
        header.body.task == task,
        "query pool header does not match the one the plans were built from"
    );
    let total: usize = config.population.iter().map(|c| c.count).sum();
    ensure!(
        total == hidden.len(),
        "population has {total} workers but the plan file has {}",
        hidden.len()
    );
    let pool: BTreeMap<String, Query> = pool.into_iter().map(|q| (q.query_id.clone(), q)).collect();

    let mut perturbed = BTreeSet::new();
    for r in &hidden {
        for p in &r.pairs {
            perturbed.extend(p.disguise.perturbed_fields.keys().cloned());
        }
    }
    let latent = if config.latent_uses_perturbed {
        config.latent.clone()
    } else {
        config.latent.without(perturbed.iter())
    };
    let survey_form = config.survey.clone().unwrap_or_else(|| SurveyForm::likert(2.0));

    let profiles = config.population.iter().flat_map(|c| {
        let mut p = c.profile.clone();
        if p.disfavored.is_empty() {
            p.disfavored = config.disfavored.clone();
        }
        std::iter::repeat_n(p, c.count)
    });
    let mut responses = Vec::new();
    let mut surveys = Vec::new();
    for (record, profile) in hidden.iter().zip(profiles) {
        profile.validate()?;
        let assignment = WorkerAssignment {
            plan: record.plan(&pool)?,
            pairs: record.pairs.clone(),
        };
        let sim = respond_to_plan(&profile, &assignment, &pool, &latent, &task.sensitive, &task.scale, seed)?;
        responses.extend(sim.responses);
        surveys.push(SurveyRecord {
            worker_id: record.worker_id.clone(),
            answers: simulate_survey(&profile, &survey_form),
        });
    }
    write_records(
        &out.join("responses.jsonl"),
        &Header::new("responses", Some(manifest.clone()), Empty {}),
        &responses,
    )?;
    write_records(
        &out.join("surveys.jsonl"),
        &Header::new("surveys", Some(manifest), Empty {}),
        &surveys,
    )?;
    Ok(())
}

/// Reads responses, rejecting off-scale labels, unknown workers or display
/// ids and duplicates with the offending line.
fn read_responses(path: &Path, hidden: &[HiddenPlanRecord], scale: &LabelScale) -> Result<Vec<Response>> {
    let source = path.display().to_string();
    let (_, records): (Header<Empty>, Vec<(usize, Response)>) =
        parse_numbered_records(&read_text(path)?, "responses", &source)?;
    let slots: BTreeMap<&str, BTreeSet<&str>> = hidden
        .iter()
        .map(|r| {
            (
                r.worker_id.as_str(),
                r.slots.iter().map(|s| s.display_id.as_str()).collect(),
            )
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        let at = format!("{source}:{line}");
        ensure!(
            scale.contains(r.label),
            "{at}: label {} outside scale [{}, {}]",
            r.label,
            scale.min_label(),
            scale.max_label()
        );
        let ids = slots
            .get(r.worker_id.as_str())
            .ok_or_else(|| anyhow!("{at}: worker `{}` has no plan", r.worker_id))?;
        ensure!(
            ids.contains(r.display_id.as_str()),
            "{at}: display id `{}` is not in worker `{}`'s plan",
            r.display_id,
            r.worker_id
        );
        ensure!(
            seen.insert((r.worker_id.clone(), r.display_id.clone())),
            "{at}: duplicate response from `{}` to `{}`",
            r.worker_id,
            r.display_id
        );
        out.push(r);
    }
    Ok(out)
}

pub fn score(hidden_map: &Path, responses: &Path, scale: LabelScale, n_min: usize, out: &Path) -> Result<()> {
    let manifest = RunManifest::new("score")
        .with_input(hidden_map)?
        .with_input(responses)?;
    let (_, hidden) = read_hidden(hidden_map)?;
    let responses = read_responses(responses, &hidden, &scale)?;
    let mut by_worker: BTreeMap<&str, Vec<Response>> = BTreeMap::new();
    for r in &responses {
        by_worker.entry(r.worker_id.as_str()).or_default().push(r.clone());
    }
    let mut reports = Vec::with_capacity(hidden.len());
    for record in &hidden {
        let plan = record.skeleton_plan()?;
        let mine = by_worker.get(record.worker_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let paired = match_responses(&plan, mine)?;
        reports.push(bias_report(&paired, &scale, n_min)?);
    }
    let unreliable = reports.iter().filter(|r| !r.reliable).count();
    if unreliable > 0 {
        eprintln!("note: {unreliable} of {} workers have fewer than {n_min} complete pairs", reports.len());
    }
    write_records(
        out,
        &Header::new("reports", Some(manifest), ReportsHeader { scale, min_pairs: n_min }),
        &reports,
    )?;
    Ok(())
}

pub fn aggregate(
    hidden_map: &Path,
    responses: &Path,
    reports: Option<&Path>,
    policy_path: &Path,
    scale: LabelScale,
    out: &Path,
) -> Result<()> {
    let policy_text = read_text(policy_path)?;
    let policy: AggregationPolicy = serde_json::from_str(&policy_text)
        .with_context(|| format!("parsing {}", policy_path.display()))?;
    policy.validate()?;
    let mut manifest = RunManifest::new("aggregate")
        .with_config(policy_text.as_bytes())
        .with_input(hidden_map)?
        .with_input(responses)?;

    let (_, hidden) = read_hidden(hidden_map)?;
    let responses = read_responses(responses, &hidden, &scale)?;
    let plans = hidden
        .iter()
        .map(HiddenPlanRecord::skeleton_plan)
        .collect::<cfprobe_core::Result<Vec<_>>>()?;
    let labeled = collect_labels(&plans, &responses)?;

    let weights = match reports {
        Some(path) => {
            manifest = manifest.with_input(path)?;
            let (header, reports): (Header<ReportsHeader>, Vec<BiasReport>) =
                read_records(path, "reports").with_context(|| format!("reading {}", path.display()))?;
            ensure!(
                header.body.scale == scale,
                "reports were scored on a different scale than --scale"
            );
            let have: BTreeSet<&str> = reports.iter().map(|r| r.worker_id.as_str()).collect();
            if let Some(w) = hidden.iter().find(|r| !have.contains(r.worker_id.as_str())) {
                bail!("no bias report for worker `{}`", w.worker_id);
            }
            worker_weights(&reports, &policy)
        }
        None => uniform_weights(hidden.iter().map(|r| r.worker_id.as_str())),
    };
    let dataset = aggregate_labels(&labeled, &weights, &policy, &scale)?;
    if !dataset.dropped.is_empty() {
        eprintln!("note: {} queries had no weighted contributors", dataset.dropped.len());
    }
    let records: Vec<DatasetRecord> = dataset
        .labels
        .into_iter()
        .map(|(query_id, label)| DatasetRecord { query_id, label })
        .collect();
    write_records(
        out,
        &Header::new(
            "dataset",
            Some(manifest),
            DatasetHeader {
                scale,
                dropped: dataset.dropped,
            },
        ),
        &records,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct FairnessBody {
    positive_threshold: i64,
    summary: FairnessSummary,
}

pub fn evaluate(dataset: &Path, queries: &Path, positive_threshold: Option<i64>, out: &Path) -> Result<()> {
    let manifest = RunManifest::new("evaluate")
        .with_input(dataset)?
        .with_input(queries)?;
    let (header, records): (Header<DatasetHeader>, Vec<DatasetRecord>) =
        read_records(dataset, "dataset").with_context(|| format!("reading {}", dataset.display()))?;
    let (task, pool) = read_queries(queries).with_context(|| format!("reading {}", queries.display()))?;
    let scale = header.body.scale;
    let thr = positive_threshold.unwrap_or_else(|| scale.default_positive_threshold());
    scale.check(thr)?;
    let data = AggregatedDataset {
        labels: records.into_iter().map(|r| (r.query_id, r.label)).collect(),
        dropped: header.body.dropped,
    };
    let pool: BTreeMap<String, Query> = pool.into_iter().map(|q| (q.query_id.clone(), q)).collect();
    let summary = demographic_parity_gap(&data, &pool, &task.sensitive, thr)?;
    write_document(out, "fairness", &manifest, FairnessBody { positive_threshold: thr, summary })
}

#[derive(Serialize)]
struct WorkerCsvRow<'a> {
    worker_id: &'a str,
    kind: WorkerKind,
    bias_shift: f64,
    noise_sd: f64,
    survey: cfprobe_core::simulator::SurveyHonesty,
    pair_count: usize,
    clipped_pairs: usize,
    raw_bias: Option<f64>,
    normalized_bias: Option<f64>,
    reliable: bool,
    self_report_score: f64,
}

impl<'a> From<&'a WorkerRow> for WorkerCsvRow<'a> {
    fn from(r: &'a WorkerRow) -> Self {
        Self {
            worker_id: &r.worker_id,
            kind: r.kind,
            bias_shift: r.bias_shift,
            noise_sd: r.noise_sd,
            survey: r.survey,
            pair_count: r.pair_count,
            clipped_pairs: r.clipped_pairs,
            raw_bias: r.raw_bias,
            normalized_bias: r.normalized_bias,
            reliable: r.reliable,
            self_report_score: r.self_report_score,
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ReportBody<'a> {
    report: &'a ExperimentReport,
}

#[derive(Serialize)]
struct ManifestBody {
    outputs: BTreeMap<String, String>,
}

pub fn experiment(config_path: &Path, queries: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let config_text = read_text(config_path)?;
    let mut raw: serde_json::Value = serde_json::from_str(&config_text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    if let Some(s) = seed {
        ensure!(raw.is_object(), "config must be a JSON object");
        raw["seed"] = s.into();
    }
    let config: ExperimentConfig =
        serde_json::from_value(raw).with_context(|| format!("parsing {}", config_path.display()))?;
    let mut manifest = RunManifest::new("experiment")
        .with_seed(config.seed)
        .with_config(config_text.as_bytes());

    let (schema, pool) = match (queries, &config.pool) {
        (Some(path), _) => {
            manifest = manifest.with_input(path)?;
            let (task, pool) = load_pool(path)?;
            ensure!(
                task.sensitive == config.sensitive && task.scale == config.scale,
                "query pool header disagrees with the config's sensitive attribute or scale"
            );
            (task.schema, pool)
        }
        (None, Some(pc)) => generate_pool(pc, &config.sensitive, &config.disguise, config.seed)?,
        (None, None) => bail!("no query pool: pass --queries or set `pool` in the config"),
    };
    let report = run_experiment(&config, &schema, &pool)?;

    write_document(&out.join("report.json"), "experiment_report", &manifest, ReportBody { report: &report })?;
    write_csv(&out.join("workers.csv"), report.workers.iter().map(WorkerCsvRow::from))?;
    write_csv(&out.join("scatter.csv"), &report.comparison.scatter)?;
    let outputs = ["report.json", "workers.csv", "scatter.csv"]
        .iter()
        .map(|name| {
            let bytes = fs::read(out.join(name))?;
            Ok((name.to_string(), sha256_hex(&bytes)))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    write_document(&out.join("manifest.json"), "manifest", &manifest, ManifestBody { outputs })
}
