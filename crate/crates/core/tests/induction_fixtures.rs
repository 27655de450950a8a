//! Rule induction over the handcrafted training sets in
//! `tests/fixtures/induce/<marketplace>/<example>/`.

use std::collections::BTreeMap;
use std::path::Path;

use adtrace_core::extract::parse_html;
use adtrace_core::induce::{apply_rules, induce_rules, Induction, Step, TrainingExample, ValueSource};
use chrono::{TimeZone, Utc};

fn load(set: &str) -> Vec<TrainingExample> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/induce").join(set);
    let mut names: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let body = std::fs::read(p.join("page.html")).unwrap();
            let expected: BTreeMap<String, String> =
                serde_json::from_str(&std::fs::read_to_string(p.join("expected.json")).unwrap()).unwrap();
            TrainingExample {
                page: parse_html(&format!("https://www.{set}.test/{name}"), &body, None),
                expected,
            }
        })
        .collect()
}

fn induce(set: &str) -> (Vec<TrainingExample>, Induction) {
    let examples = load(set);
    let out = induce_rules(&examples, Utc.with_ymd_and_hms(2023, 8, 8, 0, 0, 0).unwrap()).unwrap();
    (examples, out)
}

fn step(tag: &str, classes: &[&str], index: Option<u32>) -> Step {
    Step {
        tag: tag.into(),
        classes: classes.iter().map(|c| c.to_string()).collect(),
        id: None,
        index,
    }
}

#[test]
fn rules_reproduce_training_values() {
    for set in ["bazaar", "curio-tables", "exotics", "gridshop", "idmarket"] {
        let (examples, induction) = induce(set);
        assert_eq!(induction.rules.domain, format!("{set}.test"));
        for ex in &examples {
            let applied = apply_rules(&induction.rules, &ex.page);
            for (field, rule_value) in &applied.values {
                if let Some(want) = ex.expected.get(field) {
                    assert_eq!(rule_value, want, "{set}/{field}");
                }
            }
            for field in induction.rules.rules.keys() {
                if ex.expected.contains_key(field) {
                    assert!(applied.values.contains_key(field), "{set}/{field} not applied");
                }
            }
        }
    }
}

#[test]
fn bazaar_prefers_class_chains() {
    let (_, induction) = induce("bazaar");
    let r = &induction.rules.rules;
    // div.item moves behind a banner on one page, so its index is dropped
    assert_eq!(
        r["price"].path,
        vec![
            step("div", &["item"], None),
            step("div", &["meta"], Some(2)),
            step("span", &["price"], Some(2)),
        ]
    );
    assert_eq!(
        r["location"].path,
        vec![
            step("div", &["item"], None),
            step("div", &["meta"], Some(4)),
            step("span", &[], Some(2)),
        ]
    );
    assert_eq!(r["product"].path, vec![step("div", &["item"], None), step("h1", &["item-title"], Some(1))]);
    assert!(induction.diagnostics.is_empty());
}

#[test]
fn attribute_values() {
    let (_, induction) = induce("exotics");
    let r = &induction.rules.rules;
    assert_eq!(r["price"].value_source, ValueSource::Attribute("data-price".into()));
    assert_eq!(r["image"].value_source, ValueSource::Attribute("src".into()));
    assert_eq!(r["seller"].value_source, ValueSource::Attribute("title".into()));
}

#[test]
fn position_without_markers_is_not_learnable() {
    let (_, induction) = induce("idmarket");
    assert!(induction.rules.rules.contains_key("product"));
    assert!(!induction.rules.rules.contains_key("condition"));
    assert_eq!(induction.diagnostics.len(), 1);
    assert_eq!(induction.diagnostics[0].field, "condition");
}

#[test]
fn rule_set_round_trips_through_json() {
    let (_, induction) = induce("curio-tables");
    let json = induction.rules.to_json();
    let back = adtrace_core::induce::SelectorRuleSet::from_json(&json).unwrap();
    assert_eq!(back, induction.rules);
}
