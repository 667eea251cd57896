//! Python bindings. Structured inputs and outputs travel as JSON strings in
//! the same shapes the record files use.

use std::collections::{BTreeMap, HashMap};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use cfprobe_core::aggregation::{
    aggregate_labels as core_aggregate, demographic_parity_gap, uniform_weights, worker_weights,
    AggregatedDataset, AggregationPolicy, LabeledResponse,
};
use cfprobe_core::counterfactual::{self, DisguiseConfig, TermLexicon};
use cfprobe_core::rng::stream;
use cfprobe_core::scheduler::{self, PlanConfig};
use cfprobe_core::scoring::{self, PairedLabel, PairedLabels};
use cfprobe_core::simulator::{self, ExperimentConfig};
use cfprobe_core::{BiasReport, ProbePair, Query, Schema, SensitiveSpec, TaskPlan};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json<T: DeserializeOwned>(what: &str, text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(err)
}

fn conformed(schema: &Schema, mut q: Query) -> Query {
    schema.conform(&mut q);
    q
}

/// Ordinal label scale `[min, max]`.
#[pyclass(name = "LabelScale", frozen)]
struct PyLabelScale {
    inner: cfprobe_core::LabelScale,
}

#[pymethods]
impl PyLabelScale {
    #[new]
    fn new(min: i64, max: i64) -> PyResult<Self> {
        Ok(Self {
            inner: cfprobe_core::LabelScale::new(min, max).map_err(err)?,
        })
    }

    #[getter]
    fn min(&self) -> i64 {
        self.inner.min_label()
    }

    #[getter]
    fn max(&self) -> i64 {
        self.inner.max_label()
    }

    fn midpoint(&self) -> f64 {
        self.inner.midpoint()
    }

    fn clip_round(&self, value: f64) -> i64 {
        self.inner.clip_round(value)
    }

    fn normalize(&self, raw_bias: f64) -> f64 {
        scoring::normalized_bias(raw_bias, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("LabelScale({}, {})", self.inner.min_label(), self.inner.max_label())
    }
}

/// Mean absolute label difference over `(original, counterfactual)` pairs.
#[pyfunction]
fn worker_bias(pairs: Vec<(i64, i64)>) -> PyResult<f64> {
    let paired = PairedLabels {
        worker_id: String::new(),
        entries: pairs
            .into_iter()
            .enumerate()
            .map(|(i, (original, counterfactual))| PairedLabel {
                pair_id: i.to_string(),
                original,
                counterfactual,
            })
            .collect(),
        incomplete_pairs: 0,
    };
    scoring::worker_bias(&paired).map_err(err)
}

/// Swaps lexicon terms in `text`; `lexicon` lists one direction of each pair.
#[pyfunction]
fn flip_text_terms(text: &str, lexicon: HashMap<String, String>) -> PyResult<String> {
    let mut pairs: Vec<(String, String)> = lexicon.into_iter().collect();
    pairs.sort();
    let mut lex = TermLexicon::new();
    for (a, b) in pairs {
        // both directions may be listed
        if lex.get(&a.to_lowercase()) == Some(b.to_lowercase().as_str()) {
            continue;
        }
        lex.insert(a, b).map_err(err)?;
    }
    Ok(counterfactual::flip_text_terms(text, &lex))
}

#[pyfunction]
fn max_feasible_pairs(total_items: usize, min_separation: usize) -> usize {
    scheduler::max_feasible_pairs(total_items, min_separation)
}

/// Builds a probe pair; returns it as JSON.
#[pyfunction]
#[pyo3(signature = (query, sensitive, schema, disguise, seed, target=None))]
fn make_probe_pair(
    query: &str,
    sensitive: &str,
    schema: &str,
    disguise: &str,
    seed: u64,
    target: Option<&str>,
) -> PyResult<String> {
    let schema: Schema = from_json("schema", schema)?;
    let query = conformed(&schema, from_json("query", query)?);
    let spec: SensitiveSpec = from_json("sensitive", sensitive)?;
    let disguise: DisguiseConfig = from_json("disguise", disguise)?;
    let pair = counterfactual::make_probe_pair(&query, &spec, &schema, &disguise, target, &mut stream(seed))
        .map_err(err)?;
    to_json(&pair)
}

/// Lays out one worker's plan from JSON fillers, pairs and plan config.
#[pyfunction]
fn build_plan(worker_id: &str, fillers: &str, pairs: &str, config: &str) -> PyResult<String> {
    let fillers: Vec<Query> = from_json("fillers", fillers)?;
    let pairs: Vec<ProbePair> = from_json("pairs", pairs)?;
    let config: PlanConfig = from_json("config", config)?;
    to_json(&scheduler::build_plan(worker_id, &fillers, &pairs, &config).map_err(err)?)
}

/// Violations of a plan, as messages; empty when the plan is valid.
#[pyfunction]
fn validate_plan(plan: &str, config: &str) -> PyResult<Vec<String>> {
    let plan: TaskPlan = from_json("plan", plan)?;
    let config: PlanConfig = from_json("config", config)?;
    Ok(scheduler::validate_plan(&plan, &config)
        .iter()
        .map(ToString::to_string)
        .collect())
}

/// Aggregates `[{query_id, worker_id, label}]`. Without reports every worker
/// weighs 1.
#[pyfunction]
#[pyo3(signature = (responses, policy, scale_min, scale_max, reports=None))]
fn aggregate_labels(
    responses: &str,
    policy: &str,
    scale_min: i64,
    scale_max: i64,
    reports: Option<&str>,
) -> PyResult<String> {
    let responses: Vec<LabeledResponse> = from_json("responses", responses)?;
    let policy: AggregationPolicy = from_json("policy", policy)?;
    policy.validate().map_err(err)?;
    let scale = cfprobe_core::LabelScale::new(scale_min, scale_max).map_err(err)?;
    let weights = match reports {
        Some(r) => worker_weights(&from_json::<Vec<BiasReport>>("reports", r)?, &policy),
        None => uniform_weights(responses.iter().map(|r| r.worker_id.as_str())),
    };
    to_json(&core_aggregate(&responses, &weights, &policy, &scale).map_err(err)?)
}

/// Fairness summary of an aggregated dataset against a query pool.
#[pyfunction]
fn parity_gap(
    dataset: &str,
    queries: &str,
    schema: &str,
    sensitive: &str,
    positive_threshold: i64,
) -> PyResult<String> {
    let dataset: AggregatedDataset = from_json("dataset", dataset)?;
    let schema: Schema = from_json("schema", schema)?;
    let queries: Vec<Query> = from_json("queries", queries)?;
    let spec: SensitiveSpec = from_json("sensitive", sensitive)?;
    let by_id: BTreeMap<String, Query> = queries
        .into_iter()
        .map(|q| (q.query_id.clone(), conformed(&schema, q))).collect();
    to_json(&demographic_parity_gap(&dataset, &by_id, &spec, positive_threshold).map_err(err)?)
}

/// Runs a synthetic experiment from a JSON config with a `pool` section.
#[pyfunction]
fn run_experiment(config: &str) -> PyResult<String> {
    let config: ExperimentConfig = from_json("config", config)?;
    let pool = config
        .pool
        .as_ref()
        .ok_or_else(|| PyValueError::new_err("config has no `pool` section"))?;
    let (schema, queries) =
        simulator::generate_pool(pool, &config.sensitive, &config.disguise, config.seed).map_err(err)?;
    to_json(&simulator::run_experiment(&config, &schema, &queries).map_err(err)?)
}

#[pymodule]
fn cfprobe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLabelScale>()?;
    m.add_function(wrap_pyfunction!(worker_bias, m)?)?;
    m.add_function(wrap_pyfunction!(flip_text_terms, m)?)?;
    m.add_function(wrap_pyfunction!(max_feasible_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(make_probe_pair, m)?)?;
    m.add_function(wrap_pyfunction!(build_plan, m)?)?;
    m.add_function(wrap_pyfunction!(validate_plan, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_labels, m)?)?;
    m.add_function(wrap_pyfunction!(parity_gap, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
