#![allow(dead_code)]

use std::collections::BTreeMap;

use cfprobe_core::counterfactual::{make_probe_pair, parse_lexicon, DisguiseConfig, IdentityPools, TermLexicon};
use cfprobe_core::rng::stream;
use cfprobe_core::{FieldKind, FieldValue, LabelScale, ProbePair, Query, Schema, SensitiveSpec};

pub const SENTENCES: &str = include_str!("../fixtures/sentences.txt");
pub const LEXICON: &str = include_str!("../fixtures/lexicon.tsv");

pub fn lexicon() -> TermLexicon {
    parse_lexicon(LEXICON, "lexicon.tsv").unwrap()
}

pub fn scale() -> LabelScale {
    LabelScale::new(1, 5).unwrap()
}

pub fn spec() -> SensitiveSpec {
    SensitiveSpec::new("Race", ["A", "B", "C"]).unwrap()
}

pub fn schema() -> Schema {
    Schema::new()
        .field(
            "Race",
            FieldKind::Categorical {
                categories: ["A", "B", "C"].iter().map(|s| s.to_string()).collect(),
            },
        )
        .field("Age", FieldKind::Numeric { precision: 0 })
        .field("Income", FieldKind::Numeric { precision: 2 })
        .field("FirstName", FieldKind::Text)
        .field("Note", FieldKind::Text)
}

pub fn pools() -> IdentityPools {
    let mut names = BTreeMap::new();
    names.insert("A".to_string(), vec!["Alden".to_string(), "Brett".to_string()]);
    names.insert("B".to_string(), vec!["Jamal".to_string()]);
    names.insert("C".to_string(), vec!["Wei".to_string(), "Hiro".to_string(), "Min".to_string()]);
    [("FirstName".to_string(), names)].into()
}

pub fn query(id: &str, group: &str) -> Query {
    Query::new(id)
        .with("Race", FieldValue::Categorical(group.into()))
        .with("Age", FieldValue::Numeric(34.0))
        .with("Income", FieldValue::Numeric(41250.5))
        .with("FirstName", FieldValue::Text("Alden".into()))
        .with("Note", FieldValue::Text("No remarks.".into()))
}

/// A plain probe pair between groups A and B, no disguise.
pub fn simple_pair(i: usize) -> ProbePair {
    let spec = spec();
    let q = query(&format!("p{i:03}"), "A");
    make_probe_pair(&q, &spec, &schema(), &DisguiseConfig::default(), Some("B"), &mut stream(i as u64)).unwrap()
}

pub fn filler(i: usize) -> Query {
    query(&format!("f{i:03}"), if i.is_multiple_of(2) { "A" } else { "B" })
}
