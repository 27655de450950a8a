//! Label distribution and top-domain summaries over classified records.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelDistribution {
    /// Candidate labels first, in their given order (zeros included), then
    /// any other label seen, sorted.
    pub counts: Vec<(String, u64)>,
    pub total: u64,
}

impl LabelDistribution {
    pub fn count(&self, label: &str) -> u64 {
        self.counts
            .iter()
            .find(|(l, _)| l == label)
            .map_or(0, |(_, c)| *c)
    }
}

pub fn label_distribution<'a>(labels_of_records: impl IntoIterator<Item = &'a str>, labels: &[String]) -> LabelDistribution {
    let mut seen: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total = 0;
    for l in labels_of_records {
        *seen.entry(l).or_default() += 1;
        total += 1;
    }
    let mut counts: Vec<(String, u64)> = labels
        .iter()
        .map(|l| (l.clone(), seen.remove(l.as_str()).unwrap_or(0)))
        .collect();
    counts.extend(seen.into_iter().map(|(l, c)| (l.to_string(), c)));
    LabelDistribution { counts, total }
}

/// Domains with the most records whose label is in `filter`, by count
/// descending then name.
pub fn top_domains<'a>(
    records: impl IntoIterator<Item = (&'a str, &'a str)>,
    filter: &HashSet<String>,
    k: usize,
) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (domain, label) in records {
        if filter.contains(label) {
            *counts.entry(domain).or_default() += 1;
        }
    }
    let mut out: Vec<(String, u64)> = counts.into_iter().map(|(d, c)| (d.to_string(), c)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

fn table(header: (&str, &str), rows: &[(String, u64)]) -> String {
    let width = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .chain([header.0.len()])
        .max()
        .unwrap_or(0);
    let num_width = rows
        .iter()
        .map(|(_, c)| c.to_string().len())
        .chain([header.1.len()])
        .max()
        .unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>num_width$}", header.0, header.1);
    let _ = writeln!(s, "{}  {}", "-".repeat(width), "-".repeat(num_width));
    for (l, c) in rows {
        let _ = writeln!(s, "{l:<width$}  {c:>num_width$}");
    }
    s
}

fn csv_rows(header: [&str; 2], rows: &[(String, u64)]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for (l, c) in rows {
        w.write_record([l.as_str(), &c.to_string()]).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 input")
}

pub fn distribution_table(d: &LabelDistribution) -> String {
    let mut rows = d.counts.clone();
    rows.push(("total".into(), d.total));
    table(("label", "count"), &rows)
}

pub fn distribution_csv(d: &LabelDistribution) -> String {
    csv_rows(["label", "count"], &d.counts)
}

pub fn domains_table(rows: &[(String, u64)]) -> String {
    table(("domain", "count"), rows)
}

pub fn domains_csv(rows: &[(String, u64)]) -> String {
    csv_rows(["domain", "count"], rows)
}
