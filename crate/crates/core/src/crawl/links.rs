use std::collections::HashSet;

use scraper::Selector;
use url::Url;

use super::page::FetchedPage;
use crate::domain::normalize_url;
use crate::extract::html::parse_html;

/// Absolute, normalized anchor targets of an HTML page in document order.
///
/// Targets are resolved against `final_url`; fragments are dropped, so
/// in-page anchors collapse onto the page itself and are removed.
pub fn extract_links(page: &FetchedPage) -> Vec<Url> {
    if !page.is_html() {
        return Vec::new();
    }
    let Ok(base) = Url::parse(&page.final_url) else {
        return Vec::new();
    };
    let parsed = parse_html(&page.final_url, &page.body, page.declared_charset());
    let anchors = Selector::parse("a[href], area[href]").expect("static selector");

    let mut seen = HashSet::new();
    if let Some(own) = normalize_url(&base) {
        seen.insert(own);
    }
    let mut out = Vec::new();
    for el in parsed.html.select(&anchors) {
        let Some(href) = el.value().attr("href") else { continue };
        let Some(url) = base.join(href.trim()).ok().and_then(|u| normalize_url(&u)) else {
            continue;
        };
        if seen.insert(url.clone()) {
            out.push(url);
        }
    }
    out
}
