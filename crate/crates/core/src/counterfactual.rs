//! Counterfactual generation.
//!
//! A counterfactual copies a query, moves its sensitive attribute to another
//! group and then disguises the copy so a worker is unlikely to recognise it:
//! relative noise on selected numeric fields, fresh dummy-identity values
//! drawn for the new group, whole-word swaps of paired terms (e.g. gendered
//! words) and optional synonym substitution inside free text.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    DisguiseRecord, FieldKind, FieldValue, ProbePair, Query, Schema, SensitiveSpec, TextEdit,
};

/// Paired terms, stored in both directions. Always an involution without
/// fixed points: `get(get(t)) == t` and `get(t) != t`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct TermLexicon {
    map: BTreeMap<String, String>,
}

impl TermLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a lexicon from one-directional pairs, adding the reverse of
    /// each. Conflicting entries are rejected.
    pub fn from_pairs<A, B>(pairs: impl IntoIterator<Item = (A, B)>) -> Result<Self>
    where
        A: Into<String>,
        B: Into<String>,
    {
        let mut lex = Self::new();
        for (a, b) in pairs {
            lex.insert(a.into(), b.into())?;
        }
        Ok(lex)
    }

    pub fn insert(&mut self, a: String, b: String) -> Result<()> {
        let a = a.to_lowercase();
        let b = b.to_lowercase();
        for t in [&a, &b] {
            if t.chars().count() < 2 || !t.chars().all(char::is_alphanumeric) {
                return Err(Error::NotInvolution(format!(
                    "term `{t}` must be a single word of at least two characters"
                )));
            }
        }
        if a == b {
            return Err(Error::NotInvolution(format!("term `{a}` maps to itself")));
        }
        for (x, y) in [(&a, &b), (&b, &a)] {
            if let Some(prev) = self.map.get(x) {
                if prev != y {
                    return Err(Error::NotInvolution(format!(
                        "`{x}` maps to both `{prev}` and `{y}`"
                    )));
                }
            }
        }
        self.map.insert(a.clone(), b.clone());
        self.map.insert(b, a);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&str> {
        self.map.get(term).map(String::as_str)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.map.contains_key(term)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }
}

impl TryFrom<BTreeMap<String, String>> for TermLexicon {
    type Error = Error;
    fn try_from(map: BTreeMap<String, String>) -> Result<Self> {
        Self::from_pairs(map)
    }
}

impl From<TermLexicon> for BTreeMap<String, String> {
    fn from(l: TermLexicon) -> Self {
        l.map
    }
}

/// Term to synonyms. A term is never its own synonym.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct SynonymTable {
    map: BTreeMap<String, Vec<String>>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<S: Into<String>>(
        &mut self,
        term: impl Into<String>,
        synonyms: impl IntoIterator<Item = S>,
    ) -> Result<()> {
        let term = term.into().to_lowercase();
        let synonyms: Vec<String> = synonyms.into_iter().map(Into::into).collect();
        if synonyms.is_empty() {
            return Err(Error::Config(format!("synonym list for `{term}` is empty")));
        }
        if synonyms.iter().any(|s| s.to_lowercase() == term) {
            return Err(Error::Config(format!("`{term}` lists itself as a synonym")));
        }
        self.map.insert(term, synonyms);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&[String]> {
        self.map.get(term).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn terms(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.map.iter()
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for SynonymTable {
    type Error = Error;
    fn try_from(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut t = Self::new();
        for (k, v) in map {
            t.insert(k, v)?;
        }
        Ok(t)
    }
}

impl From<SynonymTable> for BTreeMap<String, Vec<String>> {
    fn from(t: SynonymTable) -> Self {
        t.map
    }
}

/// Field -> group -> replacement values.
pub type IdentityPools = BTreeMap<String, BTreeMap<String, Vec<String>>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisguiseConfig {
    /// Field -> relative noise magnitude, in `[0, 1)`.
    #[serde(default)]
    pub noise_fields: BTreeMap<String, f64>,
    #[serde(default)]
    pub identity_pools: IdentityPools,
    #[serde(default)]
    pub term_lexicon: TermLexicon,
    #[serde(default)]
    pub synonyms: SynonymTable,
    /// Per-word substitution probability for synonym-table hits.
    #[serde(default)]
    pub synonym_rate: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl DisguiseConfig {
    /// Checks internal consistency and that nothing touches the sensitive
    /// attribute.
    pub fn validate(&self, spec: &SensitiveSpec) -> Result<()> {
        for (field, eps) in &self.noise_fields {
            if !(0.0..1.0).contains(eps) {
                return Err(Error::Config(format!(
                    "noise magnitude for `{field}` must lie in [0, 1), got {eps}"
                )));
            }
            if self.identity_pools.contains_key(field) {
                return Err(Error::Config(format!(
                    "`{field}` is both a noise field and an identity field"
                )));
            }
        }
        for field in self.noise_fields.keys().chain(self.identity_pools.keys()) {
            if field == spec.attribute() {
                return Err(Error::Config(format!(
                    "disguise may not touch the sensitive attribute `{field}`"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.synonym_rate) {
            return Err(Error::Config(format!(
                "synonym rate must lie in [0, 1], got {}",
                self.synonym_rate
            )));
        }
        for (term, syns) in self.synonyms.terms() {
            if self.term_lexicon.contains(term)
                || syns.iter().any(|s| self.term_lexicon.contains(&s.to_lowercase()))
            {
                return Err(Error::Config(format!(
                    "synonym entry `{term}` overlaps the term lexicon"
                )));
            }
        }
        Ok(())
    }
}

/// Moves the sensitive attribute to `target_group`, keeping everything else.
/// The new query id is derived from the original id and the target.
pub fn flip_sensitive(query: &Query, spec: &SensitiveSpec, target_group: &str) -> Result<Query> {
    let current = spec.group_of(query)?;
    if !spec.has_group(target_group) {
        return Err(Error::UnknownGroup(target_group.to_string()));
    }
    if current == target_group {
        return Err(Error::SameGroup(target_group.to_string()));
    }
    let mut out = query.clone();
    out.query_id = format!("{}~{}", query.query_id, target_group);
    out.features.insert(
        spec.attribute().to_string(),
        FieldValue::Categorical(target_group.to_string()),
    );
    Ok(out)
}

/// Picks the group a query is flipped to: `explicit` when given, the only
/// other group for binary attributes, otherwise a uniform draw.
pub fn choose_target<R: Rng + ?Sized>(
    spec: &SensitiveSpec,
    current: &str,
    explicit: Option<&str>,
    stream: &mut R,
) -> Result<String> {
    if let Some(t) = explicit {
        if !spec.has_group(t) {
            return Err(Error::UnknownGroup(t.to_string()));
        }
        if t == current {
            return Err(Error::SameGroup(t.to_string()));
        }
        return Ok(t.to_string());
    }
    let others: Vec<&String> = spec.groups().iter().filter(|g| *g != current).collect();
    match others.len() {
        0 => Err(Error::SameGroup(current.to_string())),
        1 => Ok(others[0].clone()),
        n => Ok(others[stream.random_range(0..n)].clone()),
    }
}

fn precision_of(schema: &Schema, field: &str) -> Result<u32> {
    match schema.get(field) {
        Some(FieldKind::Numeric { precision }) => Ok(*precision),
        Some(other) => Err(Error::WrongKind {
            field: field.to_string(),
            expected: "numeric",
            found: other.name(),
        }),
        None => Ok(0),
    }
}

/// Bounds of the relative-noise interval around `value`.
pub fn noise_interval(value: f64, epsilon: f64) -> (f64, f64) {
    let a = value * (1.0 - epsilon);
    let b = value * (1.0 + epsilon);
    (a.min(b), a.max(b))
}

fn perturb_value<R: Rng + ?Sized>(value: f64, epsilon: f64, precision: u32, stream: &mut R) -> f64 {
    let (lo, hi) = noise_interval(value, epsilon);
    if hi <= lo {
        return value;
    }
    let scale = 10f64.powi(precision as i32);
    let drawn = stream.random_range(lo..=hi);
    // Grid points inside the interval; a value off the grid with no grid
    // point in reach stays as it is.
    let grid_lo = (lo * scale - 1e-9).ceil();
    let grid_hi = (hi * scale + 1e-9).floor();
    if grid_lo > grid_hi {
        return value;
    }
    (drawn * scale).round().clamp(grid_lo, grid_hi) / scale
}

/// Applies relative uniform noise to every configured numeric field:
/// `v' ~ U[v(1-e), v(1+e)]`, rounded to the field's precision and kept
/// inside the interval.
pub fn perturb_numeric<R: Rng + ?Sized>(
    query: &Query,
    config: &DisguiseConfig,
    schema: &Schema,
    stream: &mut R,
) -> Result<(Query, DisguiseRecord)> {
    let mut out = query.clone();
    let mut record = DisguiseRecord::default();
    for (field, &eps) in &config.noise_fields {
        let value = match query.get(field) {
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
        let precision = precision_of(schema, field)?;
        let new = perturb_value(value, eps, precision, stream);
        out.features.insert(field.clone(), FieldValue::Numeric(new));
        record.perturbed_fields.insert(field.clone(), (value, new));
    }
    Ok((out, record))
}

/// Replaces each configured dummy-identity field with a value drawn from the
/// pool for `target_group`, avoiding the current value when the pool allows.
pub fn disguise_identity<R: Rng + ?Sized>(
    query: &Query,
    config: &DisguiseConfig,
    target_group: &str,
    stream: &mut R,
) -> Result<(Query, DisguiseRecord)> {
    let mut out = query.clone();
    let mut record = DisguiseRecord::default();
    for (field, pools) in &config.identity_pools {
        let pool = pools
            .get(target_group)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| Error::EmptyPool {
                field: field.clone(),
                group: target_group.to_string(),
            })?;
        let old = query
            .get(field)
            .ok_or_else(|| Error::MissingField(field.clone()))?;
        let old_str = old.as_str().ok_or_else(|| Error::WrongKind {
            field: field.clone(),
            expected: "text",
            found: old.kind_name(),
        })?;
        let fresh: Vec<&String> = pool.iter().filter(|v| *v != old_str).collect();
        let choice = if fresh.is_empty() {
            &pool[stream.random_range(0..pool.len())]
        } else {
            fresh[stream.random_range(0..fresh.len())]
        };
        let new = old.with_str(choice.clone());
        out.features.insert(field.clone(), new.clone());
        record.identity_fields.insert(field.clone(), (old.clone(), new));
    }
    Ok((out, record))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Casing {
    Lower,
    Capitalized,
    Upper,
}

fn casing(word: &str) -> Option<Casing> {
    let mut chars = word.chars();
    let first = chars.next()?;
    let rest_upper = chars.clone().filter(|c| c.is_uppercase()).count();
    let rest_lower = chars.filter(|c| c.is_lowercase()).count();
    if !first.is_uppercase() && rest_upper == 0 {
        Some(Casing::Lower)
    } else if first.is_uppercase() && rest_upper == 0 {
        Some(Casing::Capitalized)
    } else if first.is_uppercase() && rest_lower == 0 {
        Some(Casing::Upper)
    } else {
        None
    }
}

fn apply_casing(term: &str, casing: Casing) -> String {
    match casing {
        Casing::Lower => term.to_string(),
        Casing::Upper => term.to_uppercase(),
        Casing::Capitalized => {
            let mut chars = term.chars();
            match chars.next() {
                Some(f) => f.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
    }
}

/// Splits text into alternating runs of word characters and everything else.
fn segments(text: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut in_word = None;
    for (i, c) in text.char_indices() {
        let w = c.is_alphanumeric();
        match in_word {
            Some(prev) if prev != w => {
                out.push((prev, &text[start..i]));
                start = i;
            }
            _ => {}
        }
        in_word = Some(w);
    }
    if let Some(w) = in_word {
        out.push((w, &text[start..]));
    }
    out
}

/// Lower-cased lookup key and casing of a word, when the casing is one that
/// can be reproduced on the replacement.
fn word_key(word: &str) -> Option<(String, Casing)> {
    let c = casing(word)?;
    let key = word.to_lowercase();
    // Round-trip check: only words whose casing is exactly reproducible.
    (apply_casing(&key, c) == word).then_some((key, c))
}

/// Swaps every whole-word lexicon term for its counterpart in one
/// left-to-right pass. Capitalized and all-caps words keep their casing.
pub fn flip_text_terms(text: &str, lexicon: &TermLexicon) -> String {
    flip_text_terms_counted(text, lexicon).0
}

pub(crate) fn flip_text_terms_counted(text: &str, lexicon: &TermLexicon) -> (String, usize) {
    let mut out = String::with_capacity(text.len());
    let mut hits = 0;
    for (is_word, seg) in segments(text) {
        if is_word {
            if let Some((key, c)) = word_key(seg) {
                if let Some(counterpart) = lexicon.get(&key) {
                    out.push_str(&apply_casing(counterpart, c));
                    hits += 1;
                    continue;
                }
            }
        }
        out.push_str(seg);
    }
    (out, hits)
}

/// Replaces each synonym-table word, independently with probability `rate`,
/// by a uniformly drawn synonym.
pub fn substitute_synonyms<R: Rng + ?Sized>(
    text: &str,
    table: &SynonymTable,
    rate: f64,
    stream: &mut R,
) -> String {
    substitute_synonyms_counted(text, table, rate, stream).0
}

pub(crate) fn substitute_synonyms_counted<R: Rng + ?Sized>(
    text: &str,
    table: &SynonymTable,
    rate: f64,
    stream: &mut R,
) -> (String, usize) {
    if rate <= 0.0 || table.is_empty() {
        return (text.to_string(), 0);
    }
    let mut out = String::with_capacity(text.len());
    let mut hits = 0;
    for (is_word, seg) in segments(text) {
        if is_word {
            if let Some((key, c)) = word_key(seg) {
                if let Some(syns) = table.get(&key) {
                    if stream.random_bool(rate.min(1.0)) {
                        let pick = &syns[stream.random_range(0..syns.len())];
                        out.push_str(&apply_casing(&pick.to_lowercase(), c));
                        hits += 1;
                        continue;
                    }
                }
            }
        }
        out.push_str(seg);
    }
    (out, hits)
}

/// Builds a disguised probe pair from `query`.
///
/// Order of operations: choose target, flip the sensitive attribute, perturb
/// numeric fields, swap dummy identities, then rewrite the remaining text
/// fields (term flip, then synonyms). The counterfactual carries no gold
/// label.
pub fn make_probe_pair<R: Rng + ?Sized>(
    query: &Query,
    spec: &SensitiveSpec,
    schema: &Schema,
    config: &DisguiseConfig,
    target_group: Option<&str>,
    stream: &mut R,
) -> Result<ProbePair> {
    config.validate(spec)?;
    let current = spec.group_of(query)?.to_string();
    let target = choose_target(spec, &current, target_group, stream)?;

    let flipped = flip_sensitive(query, spec, &target)?;
    let (noised, mut record) = perturb_numeric(&flipped, config, schema, stream)?;
    let (mut cf, identity) = disguise_identity(&noised, config, &target, stream)?;
    record.merge(identity);

    let skip: BTreeSet<&str> = config
        .noise_fields
        .keys()
        .chain(config.identity_pools.keys())
        .map(String::as_str)
        .chain(std::iter::once(spec.attribute()))
        .collect();
    for (field, value) in cf.features.iter_mut() {
        if skip.contains(field.as_str()) {
            continue;
        }
        let FieldValue::Text(text) = value else {
            continue;
        };
        let (flipped_text, lexicon_hits) = flip_text_terms_counted(text, &config.term_lexicon);
        let (rewritten, synonym_hits) =
            substitute_synonyms_counted(&flipped_text, &config.synonyms, config.synonym_rate, stream);
        if lexicon_hits + synonym_hits > 0 {
            *text = rewritten;
            record.text_fields.insert(
                field.clone(),
                TextEdit {
                    lexicon_hits,
                    synonym_hits,
                },
            );
        }
    }
    cf.gold_label = None;

    Ok(ProbePair {
        pair_id: format!("{}>{}", query.query_id, target),
        original: query.clone(),
        counterfactual: cf,
        flipped_from: current,
        flipped_to: target,
        disguise: record,
    })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Parses `term<TAB>counterpart` lines.
pub fn parse_lexicon(text: &str, source: &str) -> Result<TermLexicon> {
    let mut lex = TermLexicon::new();
    for (line, l) in data_lines(text) {
        let err = |message: String| Error::Record {
            path: source.to_string(),
            line,
            message,
        };
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 2 {
            return Err(err(format!("expected 2 tab-separated columns, got {}", cols.len())));
        }
        lex.insert(cols[0].trim().into(), cols[1].trim().into())
            .map_err(|e| err(e.to_string()))?;
    }
    Ok(lex)
}

/// Parses `group<TAB>field<TAB>value` lines.
pub fn parse_identity_pools(text: &str, source: &str) -> Result<IdentityPools> {
    let mut pools = IdentityPools::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
        if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Record {
                path: source.to_string(),
                line,
                message: format!("expected 3 non-empty tab-separated columns, got {}", cols.len()),
            });
        }
        pools
            .entry(cols[1].to_string())
            .or_default()
            .entry(cols[0].to_string())
            .or_default()
            .push(cols[2].to_string());
    }
    Ok(pools)
}
