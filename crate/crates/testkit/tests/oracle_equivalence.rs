//! The library's branch-and-bound induction against the exhaustive search.

use std::path::Path;

use adtrace_core::extract::parse_html;
use adtrace_core::induce::{induce_rules, TrainingExample};
use adtrace_testkit::fixtures::random_training_set;
use adtrace_testkit::oracle::brute_force_rules;
use chrono::{TimeZone, Utc};

fn examples(pages: Vec<(String, std::collections::BTreeMap<String, String>)>) -> Vec<TrainingExample> {
    pages
        .into_iter()
        .enumerate()
        .map(|(i, (html, expected))| TrainingExample {
            page: parse_html(&format!("https://www.rand.test/{i}"), html.as_bytes(), None),
            expected,
        })
        .collect()
}

fn same_rules(ex: &[TrainingExample]) -> Result<(), String> {
    let lib = induce_rules(ex, Utc.with_ymd_and_hms(2023, 8, 8, 0, 0, 0).unwrap()).map_err(|e| e.to_string())?;
    let oracle = brute_force_rules(ex);
    if lib.rules.rules != oracle {
        return Err(format!("library {:?}\noracle  {:?}", lib.rules.rules, oracle));
    }
    Ok(())
}

#[test]
fn random_sets_match() {
    let mut learned = 0;
    for seed in 0..150 {
        let ex = examples(random_training_set(seed));
        if let Err(e) = same_rules(&ex) {
            panic!("seed {seed}: {e}");
        }
        learned += usize::from(!brute_force_rules(&ex).is_empty());
    }
    // the generator must produce both learnable and unlearnable sets
    assert!(learned > 30 && learned < 150, "{learned} learnable");
}

#[test]
fn handcrafted_sets_match() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/induce");
    let mut sets: Vec<_> = std::fs::read_dir(&root).unwrap().map(|e| e.unwrap().path()).collect();
    sets.sort();
    assert!(sets.len() >= 5);
    for set in sets {
        let name = set.file_name().unwrap().to_string_lossy().into_owned();
        let ex = adtrace_core::pipeline::load_examples(&format!("www.{name}.test"), &set).unwrap();
        same_rules(&ex).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
