//! Line-delimited record files.
//!
//! Every file starts with a header line carrying `format_version` and `kind`,
//! followed by one JSON record per line. Outputs embed the [`RunManifest`]
//! of the command that wrote them, except worker-visible task files, which
//! only carry the manifest digest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    DisplayItem, Features, HiddenEntry, LabelScale, ProbePair, Query, Role, Schema, SensitiveSpec,
    TaskPlan,
};
use crate::pipeline::WorkerAssignment;

pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Digest of an input file. A record-file header's manifest timestamp is
/// zeroed first, so reruns of an upstream command hash the same downstream.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let end = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    let Ok(mut header) = serde_json::from_slice::<serde_json::Value>(&bytes[..end]) else {
        return Ok(sha256_hex(&bytes));
    };
    match header.pointer_mut("/manifest/timestamp") {
        Some(ts) => {
            *ts = 0.into();
            let mut stable = serde_json::to_vec(&header)?;
            stable.extend_from_slice(&bytes[end..]);
            Ok(sha256_hex(&stable))
        }
        None => Ok(sha256_hex(&bytes)),
    }
}

/// Provenance of an output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Input file name -> sha256 of its contents.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Unix seconds; the only field allowed to differ between reruns.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config_hash: None,
            inputs: BTreeMap::new(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_config(mut self, bytes: &[u8]) -> Self {
        self.config_hash = Some(sha256_hex(bytes));
        self
    }

    /// Records an input under its file name, or its full path when the
    /// name is already taken.
    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        let digest = file_digest(path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| !self.inputs.contains_key(n))
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, digest);
        Ok(self)
    }

    /// Digest of everything except the timestamp.
    pub fn digest(&self) -> String {
        let mut stable = self.clone();
        stable.timestamp = 0;
        let bytes = serde_json::to_vec(&stable).expect("manifest serializes");
        sha256_hex(&bytes)[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header<T> {
    pub format_version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Header<T> {
    pub fn new(kind: &str, manifest: Option<RunManifest>, body: T) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            manifest,
            body,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Empty {}

/// Header body of a query pool: everything needed to interpret its records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub schema: Schema,
    pub scale: LabelScale,
    pub sensitive: SensitiveSpec,
}

fn record_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Record {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses header and records from text. `source` names the input in
/// diagnostics.
pub fn parse_records<H, R>(text: &str, kind: &str, source: &str) -> Result<(Header<H>, Vec<R>)>
where
    H: DeserializeOwned,
    R: DeserializeOwned,
{
    let (header, records) = parse_numbered_records(text, kind, source)?;
    Ok((header, records.into_iter().map(|(_, r)| r).collect()))
}

/// Header plus records paired with their 1-based line numbers.
pub type Numbered<H, R> = (Header<H>, Vec<(usize, R)>);

/// Like [`parse_records`], keeping each record's 1-based line number.
pub fn parse_numbered_records<H, R>(
    text: &str,
    kind: &str,
    source: &str,
) -> Result<Numbered<H, R>>
where
    H: DeserializeOwned,
    R: DeserializeOwned,
{
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines
        .next()
        .ok_or_else(|| record_error(source, 1, "empty file: missing header"))?;
    let raw: serde_json::Value =
        serde_json::from_str(htext).map_err(|e| record_error(source, hline, e.to_string()))?;
    let version = raw.get("format_version").and_then(|v| v.as_u64());
    if version != Some(u64::from(FORMAT_VERSION)) {
        return Err(record_error(
            source,
            hline,
            format!("unsupported format_version {version:?}, expected {FORMAT_VERSION}"),
        ));
    }
    let found = raw.get("kind").and_then(|v| v.as_str()).unwrap_or("");
    if found != kind {
        return Err(record_error(
            source,
            hline,
            format!("expected a `{kind}` file, found `{found}`"),
        ));
    }
    let header: Header<H> =
        serde_json::from_value(raw).map_err(|e| record_error(source, hline, e.to_string()))?;
    let records = lines
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map(|r| (n, r))
                .map_err(|e| record_error(source, n, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}

pub fn read_records<H, R>(path: &Path, kind: &str) -> Result<(Header<H>, Vec<R>)>
where
    H: DeserializeOwned,
    R: DeserializeOwned,
{
    let text = fs::read_to_string(path)?;
    parse_records(&text, kind, &path.display().to_string())
}

pub fn render_records<H: Serialize, R: Serialize>(header: &Header<H>, records: &[R]) -> Result<String> {
    let mut out = serde_json::to_string(header)?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(contents)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_records<H: Serialize, R: Serialize>(path: &Path, header: &Header<H>, records: &[R]) -> Result<()> {
    write_atomic(path, render_records(header, records)?.as_bytes())
}

/// Reads a query pool, retyping string values per the schema.
pub fn read_queries(path: &Path) -> Result<(TaskSpec, Vec<Query>)> {
    let text = fs::read_to_string(path)?;
    parse_queries(&text, &path.display().to_string())
}

pub fn parse_queries(text: &str, source: &str) -> Result<(TaskSpec, Vec<Query>)> {
    let (header, mut queries): (Header<TaskSpec>, Vec<Query>) = parse_records(text, "queries", source)?;
    for q in &mut queries {
        header.body.schema.conform(q);
    }
    Ok((header.body, queries))
}

/// Header of a worker-visible task file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHeader {
    pub worker_id: String,
    /// Digest of the run manifest that produced the file.
    pub run: String,
}

/// Worker-visible rendering of a plan: ids and features only.
pub fn render_task_file(plan: &TaskPlan, run_digest: &str) -> Result<String> {
    let header = Header::new(
        "task",
        None,
        TaskHeader {
            worker_id: plan.worker_id.clone(),
            run: run_digest.to_string(),
        },
    );
    render_records(&header, &plan.items)
}

pub fn parse_task_file(text: &str, source: &str) -> Result<(TaskHeader, Vec<DisplayItem>)> {
    let (h, items): (Header<TaskHeader>, Vec<DisplayItem>) = parse_records(text, "task", source)?;
    Ok((h.body, items))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenSlot {
    pub display_id: String,
    pub query_id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
}

/// Operator-only record for one worker: item order with roles, and the
/// probe pairs behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenPlanRecord {
    pub worker_id: String,
    pub slots: Vec<HiddenSlot>,
    pub pairs: Vec<ProbePair>,
}

impl HiddenPlanRecord {
    pub fn from_assignment(a: &WorkerAssignment) -> Self {
        let slots = a
            .plan
            .items
            .iter()
            .map(|item| {
                let e = &a.plan.hidden_map[&item.display_id];
                HiddenSlot {
                    display_id: item.display_id.clone(),
                    query_id: e.query_id.clone(),
                    role: e.role,
                    pair_id: e.pair_id.clone(),
                }
            })
            .collect();
        Self {
            worker_id: a.plan.worker_id.clone(),
            slots,
            pairs: a.pairs.clone(),
        }
    }

    /// Retypes the stored pairs' string values per the schema after
    /// deserialization.
    pub fn conform(&mut self, schema: &Schema) {
        for p in &mut self.pairs {
            schema.conform(&mut p.original);
            schema.conform(&mut p.counterfactual);
        }
    }

    fn plan_with(&self, features: impl Fn(&HiddenSlot) -> Result<Features>) -> Result<TaskPlan> {
        let mut items = Vec::with_capacity(self.slots.len());
        let mut hidden_map = BTreeMap::new();
        for s in &self.slots {
            items.push(DisplayItem {
                display_id: s.display_id.clone(),
                features: features(s)?,
            });
            let prev = hidden_map.insert(
                s.display_id.clone(),
                HiddenEntry {
                    query_id: s.query_id.clone(),
                    role: s.role,
                    pair_id: s.pair_id.clone(),
                },
            );
            if prev.is_some() {
                return Err(Error::Config(format!("display id `{}` repeated", s.display_id)));
            }
        }
        Ok(TaskPlan {
            worker_id: self.worker_id.clone(),
            items,
            hidden_map,
        })
    }

    /// The plan with empty feature maps; enough for scoring.
    pub fn skeleton_plan(&self) -> Result<TaskPlan> {
        self.plan_with(|_| Ok(Features::new()))
    }

    /// The full plan, features resolved from the pool and the stored pairs.
    pub fn plan(&self, pool: &BTreeMap<String, Query>) -> Result<TaskPlan> {
        let cfs: BTreeMap<&str, &Query> = self
            .pairs
            .iter()
            .map(|p| (p.counterfactual.query_id.as_str(), &p.counterfactual))
            .collect();
        self.plan_with(|s| {
            let q = match s.role {
                Role::Counterfactual => cfs.get(s.query_id.as_str()).copied(),
                _ => pool.get(&s.query_id),
            };
            q.map(|q| q.features.clone())
                .ok_or_else(|| Error::Config(format!("query `{}` not found", s.query_id)))
        })
    }
}

/// Header body of the operator-only plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenHeader {
    pub task: TaskSpec,
    pub total_items: usize,
    pub probe_pairs: usize,
    pub min_separation: usize,
    /// True when `min_separation` was defaulted rather than configured.
    pub separation_defaulted: bool,
}
