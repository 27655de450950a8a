//! Product fields from fetched pages: page content, induced rules and
//! embedded metadata.

pub mod html;
pub mod merge;
pub mod metadata;
pub mod price;

use std::collections::BTreeMap;

use serde::Serialize;

pub use html::{extract_title_text, parse_html, ParsedPage};
pub use merge::{merge_product_fields, Diagnostic, FieldSource, ProductFields};
pub use metadata::{extract_embedded_metadata, MetadataEntry, MetadataSet, Syntax};

use crate::crawl::FetchedPage;
use crate::induce::{apply_rules, FieldDiagnostic, SelectorRuleSet};

/// Everything learned from one page.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageExtraction {
    pub fields: ProductFields,
    pub skipped_metadata_blocks: usize,
    pub rule_diagnostics: Vec<FieldDiagnostic>,
}

/// Runs the three strategies on a page and merges their output.
/// `rules` is the rule set for the page's domain, if one was trained.
pub fn extract_page(page: &FetchedPage, rules: Option<&SelectorRuleSet>) -> PageExtraction {
    let parsed = parse_html(&page.final_url, &page.body, page.declared_charset());
    extract_parsed(&parsed, rules)
}

pub fn extract_parsed(parsed: &ParsedPage, rules: Option<&SelectorRuleSet>) -> PageExtraction {
    let (title, text) = extract_title_text(parsed);
    let meta = extract_embedded_metadata(parsed);
    let (scraped, rule_diagnostics) = match rules {
        Some(r) => {
            let applied = apply_rules(r, parsed);
            (applied.values, applied.diagnostics)
        }
        None => (BTreeMap::new(), Vec::new()),
    };
    PageExtraction {
        fields: merge_product_fields(&meta, &scraped, title.as_deref(), &text),
        skipped_metadata_blocks: meta.skipped_blocks,
        rule_diagnostics,
    }
}
