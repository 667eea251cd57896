mod common;

use std::collections::BTreeSet;

use cfprobe_core::counterfactual::{
    flip_text_terms, make_probe_pair, noise_interval, perturb_numeric, DisguiseConfig, SynonymTable,
};
use cfprobe_core::rng::stream;
use cfprobe_core::{validate_probe_pair, FieldKind, FieldValue, Query, Schema};
use proptest::prelude::*;

use common::*;

/// Field-by-field comparison written out independently of the library.
fn changed_fields(a: &Query, b: &Query) -> BTreeSet<String> {
    let keys: BTreeSet<&String> = a.features.keys().chain(b.features.keys()).collect();
    keys.into_iter()
        .filter(|k| a.features.get(*k) != b.features.get(*k))
        .cloned()
        .collect()
}

const NOTES: &[&str] = &[
    "No remarks.",
    "The man was calm.",
    "He was with his brother and a large dog.",
    "Quick review, big file.",
    "WOMEN present; a big crowd.",
];

fn arb_query() -> impl Strategy<Value = Query> {
    (
        prop::sample::select(vec!["A", "B", "C"]),
        0u32..100,
        0u32..10_000_000,
        prop::sample::select(vec!["Alden", "Brett", "Jamal", "Wei", "Nobody"]),
        prop::sample::select(NOTES.to_vec()),
    )
        .prop_map(|(g, age, cents, name, note)| {
            Query::new("q")
                .with("Race", FieldValue::Categorical(g.into()))
                .with("Age", FieldValue::Numeric(age as f64))
                .with("Income", FieldValue::Numeric(cents as f64 / 100.0))
                .with("FirstName", FieldValue::Text(name.into()))
                .with("Note", FieldValue::Text(note.into()))
        })
}

fn arb_config() -> impl Strategy<Value = DisguiseConfig> {
    (
        prop::option::of(0.0f64..0.5),
        prop::option::of(0.0f64..0.5),
        any::<bool>(),
        any::<bool>(),
        prop::sample::select(vec![0.0, 0.3, 1.0]),
    )
        .prop_map(|(age_eps, income_eps, identity, lexicon, rate)| {
            let mut c = DisguiseConfig::default();
            if let Some(e) = age_eps {
                c.noise_fields.insert("Age".into(), e);
            }
            if let Some(e) = income_eps {
                c.noise_fields.insert("Income".into(), e);
            }
            if identity {
                c.identity_pools = pools();
            }
            if lexicon {
                c.term_lexicon = common::lexicon();
            }
            let mut syn = SynonymTable::new();
            syn.insert("big", ["large", "huge"]).unwrap();
            syn.insert("quick", ["fast"]).unwrap();
            c.synonyms = syn;
            c.synonym_rate = rate;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn declared_diff_is_exact(q in arb_query(), config in arb_config(), seed in any::<u64>()) {
        let spec = spec();
        let pair = make_probe_pair(&q, &spec, &schema(), &config, None, &mut stream(seed)).unwrap();
        let actual = changed_fields(&pair.original, &pair.counterfactual);
        prop_assert_eq!(&actual, &pair.declared_changes(&spec));
        prop_assert!(actual.contains("Race"));
        prop_assert!(validate_probe_pair(&pair, &spec).is_empty());
        prop_assert_eq!(&pair.original, &q);
        prop_assert_eq!(pair.counterfactual.gold_label, None);
        // never touched: fields outside the disguise configuration
        for f in ["Age", "Income"] {
            if !config.noise_fields.contains_key(f) {
                prop_assert!(!actual.contains(f));
            }
        }
        if config.identity_pools.is_empty() {
            prop_assert!(!actual.contains("FirstName"));
        }
    }

    #[test]
    fn noise_stays_in_interval(v in -1.0e6f64..1.0e6, eps in 0.0f64..0.99, precision in 0u32..4, seed in any::<u64>()) {
        let scale = 10f64.powi(precision as i32);
        let v = (v * scale).round() / scale;
        let schema = Schema::new().field("x", FieldKind::Numeric { precision });
        let q = Query::new("q").with("x", FieldValue::Numeric(v));
        let mut config = DisguiseConfig::default();
        config.noise_fields.insert("x".into(), eps);
        let (out, record) = perturb_numeric(&q, &config, &schema, &mut stream(seed)).unwrap();
        let new = out.get("x").and_then(FieldValue::as_number).unwrap();
        let (lo, hi) = noise_interval(v, eps);
        let tol = 1e-9 * v.abs().max(1.0);
        prop_assert!(new >= lo - tol && new <= hi + tol, "{} outside [{}, {}]", new, lo, hi);
        prop_assert!(((new * scale).round() - new * scale).abs() < 1e-6);
        prop_assert_eq!(record.perturbed_fields["x"], (v, new));
    }

    #[test]
    fn flip_is_involution_on_arbitrary_text(words in prop::collection::vec(
        prop::sample::select(vec!["men", "Women", "HE", "she", "The", "mEn", "dog", "boys'", ",", " ", "!", "king"]), 0..20)) {
        let text: String = words.concat();
        let lex = common::lexicon();
        prop_assert_eq!(flip_text_terms(&flip_text_terms(&text, &lex), &lex), text);
    }
}

#[test]
fn flip_is_involution_on_sentence_fixture() {
    let lex = common::lexicon();
    let sentences: Vec<&str> = SENTENCES.lines().collect();
    assert_eq!(sentences.len(), 50);
    for s in &sentences {
        let once = flip_text_terms(s, &lex);
        assert_eq!(flip_text_terms(&once, &lex), *s, "not an involution on {s:?}");
    }
    assert_eq!(flip_text_terms("Women are such hypocrites", &lex), "Men are such hypocrites");
    assert_eq!(flip_text_terms("WOMEN ARE SUCH HYPOCRITES", &lex), "MEN ARE SUCH HYPOCRITES");
    assert_eq!(flip_text_terms("That mEn typo stays as it is.", &lex), "That mEn typo stays as it is.");
    assert_eq!(flip_text_terms("The manager is not a man.", &lex), "The manager is not a woman.");
    assert_eq!(flip_text_terms("A woman-owned business", &lex), "A man-owned business");
    assert_eq!(flip_text_terms("He, him, she, her.", &lex), "She, her, he, him.");
    assert_eq!(
        flip_text_terms("No gendered words appear in this sentence.", &lex),
        "No gendered words appear in this sentence."
    );
}

#[test]
fn recidivism_style_diff() {
    let spec = cfprobe_core::SensitiveSpec::new("Race", ["White", "Black"]).unwrap();
    let schema = Schema::new()
        .field(
            "Race",
            FieldKind::Categorical {
                categories: ["White", "Black"].iter().map(|s| s.to_string()).collect(),
            },
        )
        .field("Age", FieldKind::Numeric { precision: 0 })
        .field("Priors", FieldKind::Numeric { precision: 0 })
        .field("FirstName", FieldKind::Text)
        .field("LastName", FieldKind::Text);
    let q = Query::new("d1")
        .with("Race", FieldValue::Categorical("White".into()))
        .with("Age", FieldValue::Numeric(40.0))
        .with("Priors", FieldValue::Numeric(2.0))
        .with("FirstName", FieldValue::Text("Connor".into()))
        .with("LastName", FieldValue::Text("Walsh".into()));
    let mut config = DisguiseConfig::default();
    config.noise_fields.insert("Age".into(), 0.2);
    for (field, name) in [("FirstName", "Darnell"), ("LastName", "Washington")] {
        config
            .identity_pools
            .insert(field.into(), [("Black".to_string(), vec![name.to_string()])].into());
    }
    // seed chosen so Age actually moves
    let pair = (0..)
        .map(|s| make_probe_pair(&q, &spec, &schema, &config, None, &mut stream(s)).unwrap())
        .find(|p| p.counterfactual.get("Age") != q.get("Age"))
        .unwrap();
    let want: BTreeSet<String> = ["Race", "Age", "FirstName", "LastName"].iter().map(|s| s.to_string()).collect();
    assert_eq!(changed_fields(&pair.original, &pair.counterfactual), want);
    assert_eq!(pair.counterfactual.get("Priors"), q.get("Priors"));
}
