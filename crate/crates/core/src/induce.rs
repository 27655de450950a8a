//! Example-based scraper induction.
//!
//! Training pages are annotated with the exact value a field should have.
//! Every element of the first annotated page carrying that value yields a
//! locator (the root-to-node step chain); candidate rules are suffixes of a
//! locator with each step relaxed independently:
//!
//! | level | keeps                   |
//! |-------|-------------------------|
//! | 0     | tag, classes, id, index |
//! | 1     | tag, classes, id        |
//! | 2     | tag, classes            |
//! | 3     | tag                     |
//!
//! A candidate is valid when it selects exactly one element on every page
//! annotating the field and that element carries the expected value. Among
//! valid candidates the smallest [`CandidateKey`] wins.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use scraper::ElementRef;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::registrable_domain;
use crate::extract::html::{collapse_ws, ParsedPage};

pub const RELAXATION_LEVELS: u8 = 4;

/// Attributes never used as value sources.
const SKIPPED_ATTRIBUTES: &[&str] = &["class", "id", "style"];

/// Upper bound on search nodes visited per field before giving up on
/// optimality.
const SEARCH_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// 1-based position among element siblings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u32>,
}

impl Step {
    /// This step with the constraints dropped by relaxation `level`.
    pub fn relaxed(&self, level: u8) -> Step {
        Step {
            tag: self.tag.clone(),
            classes: if level < 3 { self.classes.clone() } else { Vec::new() },
            id: if level < 2 { self.id.clone() } else { None },
            index: if level < 1 { self.index } else { None },
        }
    }

    /// Retained class set and id, one each. The sibling index is not
    /// counted: structural positions near the root are stable on every page
    /// and would otherwise favour the longest possible path.
    pub fn constraints(&self) -> u32 {
        u32::from(!self.classes.is_empty()) + u32::from(self.id.is_some())
    }
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tag)?;
        if let Some(id) = &self.id {
            write!(f, "#{id}")?;
        }
        for c in &self.classes {
            write!(f, ".{c}")?;
        }
        if let Some(i) = self.index {
            write!(f, ":nth-child({i})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSource {
    TextContent,
    Attribute(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectorRule {
    pub path: Vec<Step>,
    pub value_source: ValueSource,
}

impl SelectorRule {
    pub fn display_path(&self) -> String {
        self.path.iter().map(Step::to_string).collect::<Vec<_>>().join(" > ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorRuleSet {
    pub domain: String,
    pub trained_at: DateTime<Utc>,
    pub rules: BTreeMap<String, SelectorRule>,
}

impl SelectorRuleSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule sets always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, InduceError> {
        let s = std::fs::read_to_string(path).map_err(|source| InduceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s).map_err(|e| InduceError::BadRules(e.to_string()))
    }
}

pub struct TrainingExample {
    pub page: ParsedPage,
    pub expected: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum InduceError {
    #[error("no training examples")]
    NoExamples,
    #[error("training pages span several domains: {0:?}")]
    MixedDomains(Vec<String>),
    #[error("training page {0} has no registrable domain")]
    NoDomain(String),
    #[error("empty expected value for field {field:?}")]
    EmptyExpected { field: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid rule set: {0}")]
    BadRules(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldDiagnostic {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Induction {
    pub rules: SelectorRuleSet,
    pub diagnostics: Vec<FieldDiagnostic>,
}

// ------------------------------------------------------------ page index

#[derive(Debug)]
struct Node {
    step: Step,
    parent: Option<usize>,
    text: String,
    attrs: Vec<(String, String)>,
}

/// Flat element table of a page in document order.
#[derive(Debug)]
pub struct PageIndex {
    nodes: Vec<Node>,
}

fn full_step(el: &ElementRef<'_>) -> Step {
    let e = el.value();
    let mut classes: Vec<String> = e.classes().map(str::to_string).collect();
    classes.sort();
    classes.dedup();
    let index = el.prev_siblings().filter(|n| n.value().is_element()).count() as u32 + 1;
    Step {
        tag: e.name().to_string(),
        classes,
        id: e.id().filter(|s| !s.is_empty()).map(str::to_string),
        index: Some(index),
    }
}

impl PageIndex {
    pub fn new(page: &ParsedPage) -> Self {
        let root = page.root();
        let mut nodes = Vec::new();
        let mut ids = std::collections::HashMap::new();
        for el in std::iter::once(root).chain(root.descendent_elements().skip(1)) {
            let parent = el
                .parent()
                .and_then(|p| ids.get(&p.id()).copied());
            ids.insert(el.id(), nodes.len());
            let mut attrs: Vec<(String, String)> = el
                .value()
                .attrs()
                .filter(|(k, _)| !SKIPPED_ATTRIBUTES.contains(k))
                .map(|(k, v)| (k.to_string(), collapse_ws(v)))
                .collect();
            attrs.sort();
            nodes.push(Node {
                step: full_step(&el),
                parent,
                text: collapse_ws(&el.text().collect::<String>()),
                attrs,
            });
        }
        PageIndex { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn value(&self, node: usize, source: &ValueSource) -> Option<&str> {
        let n = &self.nodes[node];
        match source {
            ValueSource::TextContent => Some(&n.text),
            ValueSource::Attribute(name) => n
                .attrs
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str()),
        }
    }

    fn chain(&self, node: usize) -> Vec<Step> {
        let mut out = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            out.push(self.nodes[i].step.clone());
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }

    fn step_matches(&self, node: usize, step: &Step) -> bool {
        let have = &self.nodes[node].step;
        have.tag == step.tag
            && step.classes.iter().all(|c| have.classes.binary_search(c).is_ok())
            && (step.id.is_none() || step.id == have.id)
            && (step.index.is_none() || step.index == have.index)
    }

    fn path_matches(&self, node: usize, path: &[Step]) -> bool {
        let mut cur = Some(node);
        for step in path.iter().rev() {
            match cur {
                Some(i) if self.step_matches(i, step) => cur = self.nodes[i].parent,
                _ => return false,
            }
        }
        true
    }

    /// Elements selected by `path`, in document order.
    pub fn select(&self, path: &[Step]) -> Vec<usize> {
        if path.is_empty() {
            return Vec::new();
        }
        (0..self.nodes.len())
            .filter(|&i| self.path_matches(i, path))
            .collect()
    }
}

// --------------------------------------------------------------- locators

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Locator {
    /// Root-to-node steps at full precision.
    pub steps: Vec<Step>,
    pub value_source: ValueSource,
}

fn locators_in(index: &PageIndex, value: &str) -> Vec<(usize, Locator)> {
    let target = collapse_ws(value);
    if target.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, node) in index.nodes.iter().enumerate() {
        let mut sources = Vec::new();
        if node.text == target {
            sources.push(ValueSource::TextContent);
        }
        for (k, v) in &node.attrs {
            if *v == target {
                sources.push(ValueSource::Attribute(k.clone()));
            }
        }
        for value_source in sources {
            out.push((
                i,
                Locator {
                    steps: index.chain(i),
                    value_source,
                },
            ));
        }
    }
    out
}

/// Every element whose normalized text content or attribute value equals
/// the normalized `value`, in document order (text before attributes).
pub fn find_value_nodes(page: &ParsedPage, value: &str) -> Vec<Locator> {
    locators_in(&PageIndex::new(page), value)
        .into_iter()
        .map(|(_, l)| l)
        .collect()
}

// ------------------------------------------------------------- tie-break

/// Sort key of a valid candidate; smaller is better.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateKey {
    /// Matches summed over all training pages.
    pub total_matches: usize,
    /// Retained class sets and ids.
    pub constraints: u32,
    pub length: usize,
    /// Position of the originating locator on the first page.
    pub locator: usize,
    /// Relaxation level per step, leaf first.
    pub levels: Vec<u8>,
}

impl Ord for CandidateKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_matches
            .cmp(&other.total_matches)
            .then(other.constraints.cmp(&self.constraints))
            .then(self.length.cmp(&other.length))
            .then(self.locator.cmp(&other.locator))
            .then(self.levels.cmp(&other.levels))
    }
}

impl PartialOrd for CandidateKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// ---------------------------------------------------------------- search

struct Partial {
    /// Per page: (leaf, element matched by the topmost step so far).
    pairs: Vec<Vec<(usize, usize)>>,
    /// Steps leaf-first.
    steps: Vec<Step>,
    levels: Vec<u8>,
    constraints: u32,
}

fn page_domain(page: &ParsedPage) -> Result<String, InduceError> {
    url::Url::parse(&page.url)
        .ok()
        .and_then(|u| u.host_str().and_then(registrable_domain))
        .ok_or_else(|| InduceError::NoDomain(page.url.clone()))
}

pub fn induce_rules(examples: &[TrainingExample], trained_at: DateTime<Utc>) -> Result<Induction, InduceError> {
    if examples.is_empty() {
        return Err(InduceError::NoExamples);
    }
    let mut domains: Vec<String> = examples
        .iter()
        .map(|e| page_domain(&e.page))
        .collect::<Result<_, _>>()?;
    domains.sort();
    domains.dedup();
    if domains.len() > 1 {
        return Err(InduceError::MixedDomains(domains));
    }
    for e in examples {
        if let Some((field, _)) = e.expected.iter().find(|(_, v)| collapse_ws(v).is_empty()) {
            return Err(InduceError::EmptyExpected { field: field.clone() });
        }
    }

    let indexes: Vec<PageIndex> = examples.iter().map(|e| PageIndex::new(&e.page)).collect();
    let mut fields: Vec<&String> = examples.iter().flat_map(|e| e.expected.keys()).collect();
    fields.sort();
    fields.dedup();

    let mut rules = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for field in fields {
        let annotated: Vec<usize> = (0..examples.len())
            .filter(|&i| examples[i].expected.contains_key(field))
            .collect();
        let values: Vec<String> = annotated
            .iter()
            .map(|&i| collapse_ws(&examples[i].expected[field]))
            .collect();
        // each page is searched for its own expected value
        let result = induce_field(&annotated.iter().map(|&i| &indexes[i]).collect::<Vec<_>>(), &values);
        match result {
            Ok(rule) => {
                let consistent = annotated.iter().zip(&values).all(|(&i, v)| {
                    apply_rule(&rule, &indexes[i]).as_deref() == Ok(v.as_str())
                });
                if consistent {
                    rules.insert(field.clone(), rule);
                } else {
                    diagnostics.push(FieldDiagnostic {
                        field: field.clone(),
                        message: "induced rule disagrees with a training page".into(),
                    });
                }
            }
            Err(message) => diagnostics.push(FieldDiagnostic {
                field: field.clone(),
                message,
            }),
        }
    }
    Ok(Induction {
        rules: SelectorRuleSet {
            domain: domains.remove(0),
            trained_at,
            rules,
        },
        diagnostics,
    })
}

/// Search with a (possibly different) expected value per page.
pub fn induce_field(pages: &[&PageIndex], values: &[String]) -> Result<SelectorRule, String> {
    induce_field_keyed(pages, values).map(|(r, _)| r)
}

pub fn induce_field_keyed(pages: &[&PageIndex], values: &[String]) -> Result<(SelectorRule, CandidateKey), String> {
    let first = pages.first().ok_or("no training pages")?;
    let locators = locators_in(first, &values[0]);
    if locators.is_empty() {
        return Err("value not found on training page".into());
    }
    let mut best: Option<(CandidateKey, SelectorRule)> = None;
    let mut exhausted = false;
    for (pos, (_, locator)) in locators.iter().enumerate() {
        let mut search = FieldSearch {
            pages,
            values,
            best: best.take(),
            visited: 0,
        };
        search.run(pos, locator);
        exhausted |= search.visited >= SEARCH_BUDGET;
        best = search.best;
    }
    if exhausted {
        tracing::warn!("induction search budget exhausted; result may not be optimal");
    }
    best.map(|(k, r)| (r, k))
        .ok_or_else(|| "no candidate path selects the expected value on every training page".into())
}

struct FieldSearch<'a> {
    pages: &'a [&'a PageIndex],
    values: &'a [String],
    best: Option<(CandidateKey, SelectorRule)>,
    visited: usize,
}

impl FieldSearch<'_> {
    fn run(&mut self, locator_pos: usize, locator: &Locator) {
        let n = locator.steps.len();
        let mut remaining = vec![0u32; n + 1];
        for d in (0..n).rev() {
            remaining[d] = remaining[d + 1] + locator.steps[n - 1 - d].constraints();
        }
        let start = Partial {
            pairs: Vec::new(),
            steps: Vec::new(),
            levels: Vec::new(),
            constraints: 0,
        };
        self.extend(locator_pos, locator, &remaining, &start);
    }

    fn hopeless(&self, locator_pos: usize, constraints_bound: u32, min_len: usize) -> bool {
        let Some((best, _)) = &self.best else { return false };
        match best.constraints.cmp(&constraints_bound) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match min_len.cmp(&best.length) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => locator_pos > best.locator,
            },
        }
    }

    fn extend(&mut self, locator_pos: usize, locator: &Locator, remaining: &[u32], partial: &Partial) {
        let depth = partial.steps.len();
        let n = locator.steps.len();
        if depth == n || self.visited >= SEARCH_BUDGET {
            return;
        }
        let full = &locator.steps[n - 1 - depth];
        let mut tried: Vec<Step> = Vec::new();
        for level in 0..RELAXATION_LEVELS {
            let step = full.relaxed(level);
            if tried.contains(&step) {
                continue;
            }
            tried.push(step.clone());
            let constraints = partial.constraints + step.constraints();
            if self.hopeless(locator_pos, constraints + remaining[depth + 1], depth + 1) {
                continue;
            }
            self.visited += 1;

            let pairs: Vec<Vec<(usize, usize)>> = if depth == 0 {
                self.pages
                    .iter()
                    .map(|p| {
                        (0..p.len())
                            .filter(|&i| p.step_matches(i, &step))
                            .map(|i| (i, i))
                            .collect()
                    })
                    .collect()
            } else {
                self.pages
                    .iter()
                    .zip(&partial.pairs)
                    .map(|(p, pairs)| {
                        pairs
                            .iter()
                            .filter_map(|&(leaf, top)| {
                                let up = p.nodes[top].parent?;
                                p.step_matches(up, &step).then_some((leaf, up))
                            })
                            .collect()
                    })
                    .collect()
            };

            // Extensions only shrink the match sets; stop once a page has
            // lost every element carrying its expected value.
            let reachable = self.pages.iter().zip(&pairs).zip(self.values).all(|((p, pairs), v)| {
                pairs
                    .iter()
                    .any(|&(leaf, _)| p.value(leaf, &locator.value_source) == Some(v.as_str()))
            });
            if !reachable {
                continue;
            }

            let mut steps = partial.steps.clone();
            steps.push(step);
            let mut levels = partial.levels.clone();
            levels.push(level);
            let next = Partial {
                pairs,
                steps,
                levels,
                constraints,
            };

            if next.pairs.iter().all(|p| p.len() == 1) {
                let key = CandidateKey {
                    total_matches: next.pairs.iter().map(Vec::len).sum(),
                    constraints,
                    length: depth + 1,
                    locator: locator_pos,
                    levels: next.levels.clone(),
                };
                if self.best.as_ref().is_none_or(|(b, _)| key < *b) {
                    let mut path = next.steps.clone();
                    path.reverse();
                    self.best = Some((
                        key,
                        SelectorRule {
                            path,
                            value_source: locator.value_source.clone(),
                        },
                    ));
                }
            }
            self.extend(locator_pos, locator, remaining, &next);
        }
    }
}

// ----------------------------------------------------------------- apply

fn apply_rule(rule: &SelectorRule, index: &PageIndex) -> Result<String, String> {
    let hits = index.select(&rule.path);
    match hits.as_slice() {
        [] => Err("no match".into()),
        [one] => index
            .value(*one, &rule.value_source)
            .map(str::to_string)
            .ok_or_else(|| "attribute missing on matched element".into()),
        many => Err(format!("ambiguous match ({})", many.len())),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Applied {
    pub values: BTreeMap<String, String>,
    pub diagnostics: Vec<FieldDiagnostic>,
}

pub fn apply_rules(rules: &SelectorRuleSet, page: &ParsedPage) -> Applied {
    let mut out = Applied::default();
    let page_domain = page_domain(page).ok();
    if page_domain.as_deref() != Some(rules.domain.as_str()) {
        out.diagnostics.push(FieldDiagnostic {
            field: "*".into(),
            message: format!(
                "rules for {} applied to page from {}",
                rules.domain,
                page_domain.as_deref().unwrap_or("unknown domain")
            ),
        });
    }
    let index = PageIndex::new(page);
    for (field, rule) in &rules.rules {
        match apply_rule(rule, &index) {
            Ok(v) => {
                out.values.insert(field.clone(), v);
            }
            Err(message) => out.diagnostics.push(FieldDiagnostic {
                field: field.clone(),
                message,
            }),
        }
    }
    out
}
