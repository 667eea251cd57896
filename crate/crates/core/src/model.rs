//! Shared data model: label scales, queries and their schema, probe pairs,
//! task plans, responses and bias reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Closed ordinal label scale. Binary tasks use `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScale", into = "RawScale")]
pub struct LabelScale {
    min_label: i64,
    max_label: i64,
}

#[derive(Serialize, Deserialize)]
struct RawScale {
    min: i64,
    max: i64,
}

impl TryFrom<RawScale> for LabelScale {
    type Error = Error;
    fn try_from(raw: RawScale) -> Result<Self> {
        LabelScale::new(raw.min, raw.max)
    }
}

impl From<LabelScale> for RawScale {
    fn from(s: LabelScale) -> Self {
        RawScale {
            min: s.min_label,
            max: s.max_label,
        }
    }
}

impl LabelScale {
    pub fn new(min_label: i64, max_label: i64) -> Result<Self> {
        if min_label >= max_label {
            return Err(Error::InvalidScale {
                min: min_label,
                max: max_label,
            });
        }
        Ok(Self {
            min_label,
            max_label,
        })
    }

    pub fn min_label(&self) -> i64 {
        self.min_label
    }

    pub fn max_label(&self) -> i64 {
        self.max_label
    }

    pub fn contains(&self, label: i64) -> bool {
        (self.min_label..=self.max_label).contains(&label)
    }

    pub fn check(&self, label: i64) -> Result<i64> {
        if self.contains(label) {
            Ok(label)
        } else {
            Err(Error::LabelOffScale {
                label,
                min: self.min_label,
                max: self.max_label,
            })
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.min_label + self.max_label) as f64 / 2.0
    }

    /// Smallest label counted as positive by default: the scale midpoint,
    /// rounded up for even-width scales.
    pub fn default_positive_threshold(&self) -> i64 {
        self.midpoint().ceil() as i64
    }

    /// Round half away from zero, then clamp onto the scale.
    pub fn clip_round(&self, value: f64) -> i64 {
        let r = value.round();
        if r <= self.min_label as f64 {
            self.min_label
        } else if r >= self.max_label as f64 {
            self.max_label
        } else {
            r as i64
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = i64> {
        self.min_label..=self.max_label
    }
}

/// Width of the scale; the denominator for normalized bias.
pub fn scale_range(scale: &LabelScale) -> i64 {
    scale.max_label - scale.min_label
}

impl std::str::FromStr for LabelScale {
    type Err = Error;

    /// Parses `min,max`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("scale `{s}` is not of the form min,max")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("scale bound `{t}` is not an integer")))
        };
        LabelScale::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// Number of decimal places values are rounded to; 0 for integer fields.
    Numeric {
        #[serde(default)]
        precision: u32,
    },
    Categorical {
        categories: BTreeSet<String>,
    },
    Text,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Numeric { .. } => "numeric",
            FieldKind::Categorical { .. } => "categorical",
            FieldKind::Text => "text",
        }
    }
}

/// A single feature value.
///
/// On the wire numbers are JSON numbers and both categorical and text values
/// are JSON strings; a [`Schema`] decides which of the two a string is.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Numeric(f64),
    Categorical(String),
    Text(String),
}

impl FieldValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FieldValue::Numeric(_) => "numeric",
            FieldValue::Categorical(_) => "categorical",
            FieldValue::Text(_) => "text",
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            FieldValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            FieldValue::Categorical(s) | FieldValue::Text(s) => Some(s),
            FieldValue::Numeric(_) => None,
        }
    }

    /// Same variant as `self`, carrying `value` instead.
    pub fn with_str(&self, value: impl Into<String>) -> FieldValue {
        match self {
            FieldValue::Categorical(_) => FieldValue::Categorical(value.into()),
            _ => FieldValue::Text(value.into()),
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Numeric(v) => write!(f, "{v}"),
            FieldValue::Categorical(s) | FieldValue::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for FieldValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FieldValue::Numeric(v) => serializer.serialize_f64(*v),
            FieldValue::Categorical(s) | FieldValue::Text(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for FieldValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Number(f64),
            Str(String),
        }
        Ok(match Wire::deserialize(deserializer)? {
            Wire::Number(v) => FieldValue::Numeric(v),
            Wire::Str(s) => FieldValue::Text(s),
        })
    }
}

pub type Features = BTreeMap<String, FieldValue>;

/// One labeling item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub features: Features,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<i64>,
}

impl Query {
    pub fn new(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            features: Features::new(),
            gold_label: None,
        }
    }

    pub fn with(mut self, field: impl Into<String>, value: FieldValue) -> Self {
        self.features.insert(field.into(), value);
        self
    }

    pub fn with_gold(mut self, label: i64) -> Self {
        self.gold_label = Some(label);
        self
    }

    pub fn get(&self, field: &str) -> Option<&FieldValue> {
        self.features.get(field)
    }
}

/// Field names whose values differ between `a` and `b`, including fields
/// present in only one of them.
pub fn field_diff(a: &Features, b: &Features) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (k, v) in a {
        if b.get(k) != Some(v) {
            out.insert(k.clone());
        }
    }
    for k in b.keys() {
        if !a.contains_key(k) {
            out.insert(k.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownField(String),
    MissingField(String),
    WrongKind {
        field: String,
        expected: &'static str,
        found: &'static str,
    },
    NotInCategorySet {
        field: String,
        value: String,
    },
    GoldOffScale(i64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownField(n) => write!(f, "unknown field `{n}`"),
            Violation::MissingField(n) => write!(f, "missing field `{n}`"),
            Violation::WrongKind {
                field,
                expected,
                found,
            } => write!(f, "field `{field}` is {found}, expected {expected}"),
            Violation::NotInCategorySet { field, value } => {
                write!(f, "categorical value not in set: `{field}` = `{value}`")
            }
            Violation::GoldOffScale(l) => write!(f, "gold label off-scale: {l}"),
        }
    }
}

/// Field name to kind for every field in a query pool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub fields: BTreeMap<String, FieldKind>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, name: impl Into<String>, kind: FieldKind) -> Self {
        self.fields.insert(name.into(), kind);
        self
    }

    pub fn get(&self, name: &str) -> Option<&FieldKind> {
        self.fields.get(name)
    }

    /// Retypes string values as categorical or text according to the schema.
    /// Values of unknown fields are left untouched.
    pub fn conform(&self, query: &mut Query) {
        for (name, value) in query.features.iter_mut() {
            let s = match value {
                FieldValue::Categorical(s) | FieldValue::Text(s) => std::mem::take(s),
                FieldValue::Numeric(_) => continue,
            };
            *value = match self.fields.get(name) {
                Some(FieldKind::Categorical { .. }) => FieldValue::Categorical(s),
                _ => FieldValue::Text(s),
            };
        }
    }
}

/// Checks a query against the schema and scale. Violations are data: an empty
/// vector means the query is well formed.
pub fn validate_query(query: &Query, schema: &Schema, scale: &LabelScale) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, value) in &query.features {
        let Some(kind) = schema.get(name) else {
            out.push(Violation::UnknownField(name.clone()));
            continue;
        };
        match (kind, value) {
            (FieldKind::Numeric { .. }, FieldValue::Numeric(v)) if v.is_finite() => {}
            (FieldKind::Categorical { categories }, FieldValue::Categorical(s)) => {
                if !categories.contains(s) {
                    out.push(Violation::NotInCategorySet {
                        field: name.clone(),
                        value: s.clone(),
                    });
                }
            }
            (FieldKind::Text, FieldValue::Text(_)) => {}
            _ => out.push(Violation::WrongKind {
                field: name.clone(),
                expected: kind.name(),
                found: value.kind_name(),
            }),
        }
    }
    for name in schema.fields.keys() {
        if !query.features.contains_key(name) {
            out.push(Violation::MissingField(name.clone()));
        }
    }
    if let Some(gold) = query.gold_label {
        if !scale.contains(gold) {
            out.push(Violation::GoldOffScale(gold));
        }
    }
    out
}

/// The demographic attribute bias is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSensitive", into = "RawSensitive")]
pub struct SensitiveSpec {
    attribute: String,
    groups: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawSensitive {
    attribute: String,
    groups: Vec<String>,
}

impl TryFrom<RawSensitive> for SensitiveSpec {
    type Error = Error;
    fn try_from(raw: RawSensitive) -> Result<Self> {
        SensitiveSpec::new(raw.attribute, raw.groups)
    }
}

impl From<SensitiveSpec> for RawSensitive {
    fn from(s: SensitiveSpec) -> Self {
        RawSensitive {
            attribute: s.attribute,
            groups: s.groups,
        }
    }
}

impl SensitiveSpec {
    pub fn new<S: Into<String>>(
        attribute: impl Into<String>,
        groups: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let groups: Vec<String> = groups.into_iter().map(Into::into).collect();
        let unique: BTreeSet<&String> = groups.iter().collect();
        if groups.len() < 2 || unique.len() != groups.len() {
            return Err(Error::Config(
                "sensitive attribute needs at least two distinct groups".into(),
            ));
        }
        Ok(Self {
            attribute: attribute.into(),
            groups,
        })
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.groups.iter().any(|g| g == group)
    }

    /// The two groups compared by difference and gap metrics, in order.
    pub fn reference_groups(&self) -> (&str, &str) {
        (&self.groups[0], &self.groups[1])
    }

    pub fn group_of<'q>(&self, query: &'q Query) -> Result<&'q str> {
        let value = query
            .get(&self.attribute)
            .ok_or_else(|| Error::MissingField(self.attribute.clone()))?;
        let group = match value {
            FieldValue::Categorical(s) => s.as_str(),
            other => {
                return Err(Error::WrongKind {
                    field: self.attribute.clone(),
                    expected: "categorical",
                    found: other.kind_name(),
                })
            }
        };
        if !self.has_group(group) {
            return Err(Error::UnknownGroup(group.to_string()));
        }
        Ok(group)
    }

    /// Problems with using this attribute on the given schema.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        match schema.get(&self.attribute) {
            Some(FieldKind::Categorical { categories }) => {
                for g in &self.groups {
                    if !categories.contains(g) {
                        return Err(Error::UnknownGroup(g.clone()));
                    }
                }
                Ok(())
            }
            Some(other) => Err(Error::WrongKind {
                field: self.attribute.clone(),
                expected: "categorical",
                found: other.name(),
            }),
            None => Err(Error::MissingField(self.attribute.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEdit {
    pub lexicon_hits: usize,
    pub synonym_hits: usize,
}

/// What the disguise step changed on a counterfactual, besides the
/// sensitive attribute.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisguiseRecord {
    #[serde(default)]
    pub perturbed_fields: BTreeMap<String, (f64, f64)>,
    #[serde(default)]
    pub identity_fields: BTreeMap<String, (FieldValue, FieldValue)>,
    #[serde(default)]
    pub text_fields: BTreeMap<String, TextEdit>,
}

impl DisguiseRecord {
    pub fn merge(&mut self, other: DisguiseRecord) {
        self.perturbed_fields.extend(other.perturbed_fields);
        self.identity_fields.extend(other.identity_fields);
        self.text_fields.extend(other.text_fields);
    }

    pub fn keys(&self) -> BTreeSet<&str> {
        self.perturbed_fields
            .keys()
            .chain(self.identity_fields.keys())
            .chain(self.text_fields.keys())
            .map(String::as_str)
            .collect()
    }

    /// Fields this record says were actually changed.
    pub fn changed_fields(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (k, (old, new)) in &self.perturbed_fields {
            if old != new {
                out.insert(k.clone());
            }
        }
        for (k, (old, new)) in &self.identity_fields {
            if old != new {
                out.insert(k.clone());
            }
        }
        for (k, edit) in &self.text_fields {
            if edit.lexicon_hits + edit.synonym_hits > 0 {
                out.insert(k.clone());
            }
        }
        out
    }
}

/// An original query and its disguised counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePair {
    pub pair_id: String,
    pub original: Query,
    pub counterfactual: Query,
    pub flipped_from: String,
    pub flipped_to: String,
    pub disguise: DisguiseRecord,
}

impl ProbePair {
    /// Fields the pair declares as changed: the sensitive attribute plus
    /// everything the disguise record reports as modified.
    pub fn declared_changes(&self, spec: &SensitiveSpec) -> BTreeSet<String> {
        let mut out = self.disguise.changed_fields();
        out.insert(spec.attribute().to_string());
        out
    }
}

/// Checks the probe-pair invariants, returning one message per violation.
pub fn validate_probe_pair(pair: &ProbePair, spec: &SensitiveSpec) -> Vec<String> {
    let mut out = Vec::new();
    if pair.flipped_from == pair.flipped_to {
        out.push(format!("pair `{}` flips a group onto itself", pair.pair_id));
    }
    match spec.group_of(&pair.original) {
        Ok(g) if g == pair.flipped_from => {}
        Ok(g) => out.push(format!(
            "original group `{g}` differs from flipped_from `{}`",
            pair.flipped_from
        )),
        Err(e) => out.push(format!("original: {e}")),
    }
    match spec.group_of(&pair.counterfactual) {
        Ok(g) if g == pair.flipped_to => {}
        Ok(g) => out.push(format!(
            "counterfactual group `{g}` differs from flipped_to `{}`",
            pair.flipped_to
        )),
        Err(e) => out.push(format!("counterfactual: {e}")),
    }
    if pair.disguise.keys().contains(spec.attribute()) {
        out.push("disguise record touches the sensitive attribute".into());
    }
    let diff = field_diff(&pair.original.features, &pair.counterfactual.features);
    let declared = pair.declared_changes(spec);
    for f in diff.difference(&declared) {
        out.push(format!("field `{f}` changed but is not declared"));
    }
    for f in declared.difference(&diff) {
        out.push(format!("field `{f}` declared changed but is identical"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Original,
    Counterfactual,
    Filler,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenEntry {
    pub query_id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
}

/// A worker-visible item: an opaque id and the features to label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayItem {
    pub display_id: String,
    pub features: Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub worker_id: String,
    pub items: Vec<DisplayItem>,
    pub hidden_map: BTreeMap<String, HiddenEntry>,
}

impl TaskPlan {
    pub fn position(&self, display_id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.display_id == display_id)
    }

    /// Display ids of (original, counterfactual) for each pair id.
    pub fn pair_slots(&self) -> BTreeMap<&str, (Option<&str>, Option<&str>)> {
        let mut out: BTreeMap<&str, (Option<&str>, Option<&str>)> = BTreeMap::new();
        for (display_id, entry) in &self.hidden_map {
            if let Some(pid) = entry.pair_id.as_deref() {
                let slot = out.entry(pid).or_default();
                match entry.role {
                    Role::Original => slot.0 = Some(display_id),
                    Role::Counterfactual => slot.1 = Some(display_id),
                    Role::Filler => {}
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub worker_id: String,
    pub display_id: String,
    pub label: i64,
}

impl Response {
    pub fn new(worker_id: impl Into<String>, display_id: impl Into<String>, label: i64) -> Self {
        Self {
            worker_id: worker_id.into(),
            display_id: display_id.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    /// Fewer complete pairs than the reliability minimum.
    Unreliable,
    NoUsableProbePairs,
}

/// Per-worker bias score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub worker_id: String,
    pub pair_count: usize,
    pub raw_bias: Option<f64>,
    pub normalized_bias: Option<f64>,
    pub incomplete_pairs: usize,
    pub reliable: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ReportFlag>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new()
            .field(
                "Race",
                FieldKind::Categorical {
                    categories: ["A", "B"].iter().map(|s| s.to_string()).collect(),
                },
            )
            .field("Age", FieldKind::Numeric { precision: 0 })
    }

    fn scale() -> LabelScale {
        LabelScale::new(1, 5).unwrap()
    }

    #[test]
    fn scale_range_examples() {
        assert_eq!(scale_range(&LabelScale::new(1, 5).unwrap()), 4);
        assert_eq!(scale_range(&LabelScale::new(0, 1).unwrap()), 1);
        assert_eq!(scale_range(&LabelScale::new(1, 10).unwrap()), 9);
        assert!(LabelScale::new(3, 3).is_err());
        assert!(LabelScale::new(5, 1).is_err());
    }

    #[test]
    fn scale_parses_and_clips() {
        let s: LabelScale = "1,5".parse().unwrap();
        assert_eq!(s, scale());
        assert!("1;5".parse::<LabelScale>().is_err());
        assert_eq!(s.clip_round(7.2), 5);
        assert_eq!(s.clip_round(-3.0), 1);
        assert_eq!(s.clip_round(2.5), 3);
        assert_eq!(s.default_positive_threshold(), 3);
        assert_eq!(LabelScale::new(0, 1).unwrap().default_positive_threshold(), 1);
    }

    #[test]
    fn validate_well_formed() {
        let q = Query::new("q1")
            .with("Race", FieldValue::Categorical("A".into()))
            .with("Age", FieldValue::Numeric(27.0))
            .with_gold(3);
        assert!(validate_query(&q, &schema(), &scale()).is_empty());
    }

    #[test]
    fn validate_categorical_out_of_set() {
        let q = Query::new("q1")
            .with("Race", FieldValue::Categorical("Martian".into()))
            .with("Age", FieldValue::Numeric(27.0));
        let v = validate_query(&q, &schema(), &scale());
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("categorical value not in set"));
    }

    #[test]
    fn validate_gold_off_scale() {
        let q = Query::new("q1")
            .with("Race", FieldValue::Categorical("A".into()))
            .with("Age", FieldValue::Numeric(27.0))
            .with_gold(7);
        let v = validate_query(&q, &schema(), &scale());
        assert_eq!(v, vec![Violation::GoldOffScale(7)]);
        assert!(v[0].to_string().contains("gold label off-scale"));
    }

    #[test]
    fn validate_unknown_and_wrong_kind() {
        let q = Query::new("q1")
            .with("Race", FieldValue::Categorical("A".into()))
            .with("Age", FieldValue::Text("old".into()))
            .with("Shoe", FieldValue::Numeric(9.0));
        let v = validate_query(&q, &schema(), &scale());
        assert!(v.contains(&Violation::UnknownField("Shoe".into())));
        assert!(v.iter().any(|x| matches!(x, Violation::WrongKind { field, .. } if field == "Age")));
    }

    #[test]
    fn conform_retypes_strings() {
        let mut q: Query =
            serde_json::from_str(r#"{"query_id":"q","features":{"Race":"A","Age":30}}"#).unwrap();
        assert_eq!(q.get("Race"), Some(&FieldValue::Text("A".into())));
        schema().conform(&mut q);
        assert_eq!(q.get("Race"), Some(&FieldValue::Categorical("A".into())));
        assert!(validate_query(&q, &schema(), &scale()).is_empty());
    }

    #[test]
    fn sensitive_spec_requires_two_groups() {
        assert!(SensitiveSpec::new("Race", ["A"]).is_err());
        assert!(SensitiveSpec::new("Race", ["A", "A"]).is_err());
        let s = SensitiveSpec::new("Race", ["A", "B"]).unwrap();
        assert!(s.check_schema(&schema()).is_ok());
        assert!(SensitiveSpec::new("Age", ["A", "B"])
            .unwrap()
            .check_schema(&schema())
            .is_err());
    }

    #[test]
    fn field_diff_covers_missing_keys() {
        let a = Query::new("a").with("x", FieldValue::Numeric(1.0));
        let b = Query::new("b")
            .with("x", FieldValue::Numeric(1.0))
            .with("y", FieldValue::Numeric(2.0));
        let d = field_diff(&a.features, &b.features);
        assert_eq!(d.into_iter().collect::<Vec<_>>(), vec!["y".to_string()]);
    }
}
