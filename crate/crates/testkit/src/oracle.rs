//! Exhaustive reference for rule induction. Enumerates every suffix of every
//! value locator on the first page under every per-step relaxation, keeps
//! the candidates selecting exactly the right element on every page and
//! returns the best under the tie-break:
//!
//! 1. more retained constraints (class sets and ids);
//! 2. shorter path;
//! 3. earlier locator on the first page;
//! 4. lexicographically smaller relaxation levels, leaf first.
//!
//! Built straight on the HTML tree; shares only the rule data types with the
//! library. Cost is exponential in path length, so keep fixtures shallow.

use std::collections::BTreeMap;

use adtrace_core::induce::{SelectorRule, Step, TrainingExample, ValueSource};
use scraper::{ElementRef, Html};

struct El {
    tag: String,
    classes: Vec<String>,
    id: Option<String>,
    index: u32,
    parent: Option<usize>,
    text: String,
    attrs: BTreeMap<String, String>,
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn elements(html: &Html) -> Vec<El> {
    let mut out: Vec<El> = Vec::new();
    let mut node_ids = Vec::new();
    let mut stack: Vec<ElementRef<'_>> = vec![html.root_element()];
    // explicit preorder walk, children pushed in reverse
    while let Some(el) = stack.pop() {
        let parent = el.parent().and_then(|p| node_ids.iter().position(|id| *id == p.id()));
        let v = el.value();
        let mut classes: Vec<String> = v.classes().map(String::from).collect();
        classes.sort();
        classes.dedup();
        let index = 1 + el
            .prev_siblings()
            .filter(|s| s.value().as_element().is_some())
            .count() as u32;
        out.push(El {
            tag: v.name().to_string(),
            classes,
            id: v.id().filter(|s| !s.is_empty()).map(String::from),
            index,
            parent,
            text: squash(&el.text().collect::<String>()),
            attrs: v
                .attrs()
                .filter(|(k, _)| !matches!(*k, "class" | "id" | "style"))
                .map(|(k, v)| (k.to_string(), squash(v)))
                .collect(),
        });
        node_ids.push(el.id());
        let kids: Vec<ElementRef<'_>> = el.children().filter_map(ElementRef::wrap).collect();
        stack.extend(kids.into_iter().rev());
    }
    out
}

fn step_of(e: &El, level: u8) -> Step {
    Step {
        tag: e.tag.clone(),
        classes: if level < 3 { e.classes.clone() } else { vec![] },
        id: if level < 2 { e.id.clone() } else { None },
        index: if level < 1 { Some(e.index) } else { None },
    }
}

fn matches(e: &El, s: &Step) -> bool {
    e.tag == s.tag
        && s.classes.iter().all(|c| e.classes.contains(c))
        && s.id.as_ref().is_none_or(|id| e.id.as_ref() == Some(id))
        && s.index.is_none_or(|i| i == e.index)
}

fn selects(els: &[El], i: usize, path: &[Step]) -> bool {
    let mut cur = Some(i);
    for s in path.iter().rev() {
        match cur {
            Some(j) if matches(&els[j], s) => cur = els[j].parent,
            _ => return false,
        }
    }
    true
}

fn value_of<'a>(e: &'a El, src: &ValueSource) -> Option<&'a str> {
    match src {
        ValueSource::TextContent => Some(&e.text),
        ValueSource::Attribute(a) => e.attrs.get(a).map(String::as_str),
    }
}

fn valid(pages: &[Vec<El>], values: &[String], path: &[Step], src: &ValueSource) -> bool {
    pages.iter().zip(values).all(|(els, want)| {
        let mut hit = None;
        for i in 0..els.len() {
            if selects(els, i, path) {
                if hit.is_some() {
                    return false;
                }
                hit = Some(i);
            }
        }
        hit.and_then(|i| value_of(&els[i], src)) == Some(want.as_str())
    })
}

type Key = (std::cmp::Reverse<u32>, usize, usize, Vec<u8>);

/// Best rule for one field, each page with its own expected value.
pub fn brute_force_field(pages: &[&Html], values: &[String]) -> Option<SelectorRule> {
    let tables: Vec<Vec<El>> = pages.iter().map(|h| elements(h)).collect();
    let values: Vec<String> = values.iter().map(|v| squash(v)).collect();
    let first = &tables[0];
    let mut locators: Vec<(usize, ValueSource)> = Vec::new();
    for (i, e) in first.iter().enumerate() {
        if values[0].is_empty() {
            break;
        }
        if e.text == values[0] {
            locators.push((i, ValueSource::TextContent));
        }
        for (k, v) in &e.attrs {
            if *v == values[0] {
                locators.push((i, ValueSource::Attribute(k.clone())));
            }
        }
    }
    let mut best: Option<(Key, SelectorRule)> = None;
    for (pos, (node, src)) in locators.iter().enumerate() {
        let mut chain = Vec::new();
        let mut cur = Some(*node);
        while let Some(i) = cur {
            chain.push(i);
            cur = first[i].parent;
        }
        // chain is leaf first
        for len in 1..=chain.len() {
            for code in 0..4usize.pow(len as u32) {
                let levels: Vec<u8> = (0..len).map(|k| ((code >> (2 * k)) & 3) as u8).collect();
                let mut path: Vec<Step> = (0..len).map(|k| step_of(&first[chain[k]], levels[k])).collect();
                path.reverse();
                let constraints: u32 = path
                    .iter()
                    .map(|s| u32::from(!s.classes.is_empty()) + u32::from(s.id.is_some()))
                    .sum();
                let key: Key = (std::cmp::Reverse(constraints), len, pos, levels);
                if best.as_ref().is_some_and(|(b, _)| *b <= key) {
                    continue;
                }
                if valid(&tables, &values, &path, src) {
                    best = Some((
                        key,
                        SelectorRule {
                            path,
                            value_source: src.clone(),
                        },
                    ));
                }
            }
        }
    }
    best.map(|(_, r)| r)
}

/// Best rule per annotated field; fields without a valid candidate are absent.
pub fn brute_force_rules(examples: &[TrainingExample]) -> BTreeMap<String, SelectorRule> {
    let mut fields: Vec<&String> = examples.iter().flat_map(|e| e.expected.keys()).collect();
    fields.sort();
    fields.dedup();
    let mut out = BTreeMap::new();
    for field in fields {
        let annotated: Vec<&TrainingExample> = examples.iter().filter(|e| e.expected.contains_key(field)).collect();
        let pages: Vec<&Html> = annotated.iter().map(|e| &e.page.html).collect();
        let values: Vec<String> = annotated.iter().map(|e| e.expected[field].clone()).collect();
        if let Some(rule) = brute_force_field(&pages, &values) {
            out.insert(field.clone(), rule);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefers_class_over_position() {
        let a = Html::parse_document("<div><span>x</span><span class=\"p\">12</span></div>");
        let b = Html::parse_document("<div><span class=\"p\">7</span><span>y</span></div>");
        let rule = brute_force_field(&[&a, &b], &["12".into(), "7".into()]).unwrap();
        assert_eq!(rule.path.len(), 1);
        assert_eq!(rule.path[0].classes, vec!["p".to_string()]);
        assert_eq!(rule.path[0].index, None);
    }

    #[test]
    fn no_candidate() {
        let a = Html::parse_document("<p>1</p><p>3</p>");
        let b = Html::parse_document("<i>2</i><p>4</p>");
        assert!(brute_force_field(&[&a, &b], &["1".into(), "2".into()]).is_none());
    }
}
