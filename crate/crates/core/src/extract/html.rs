//! Charset resolution, error-tolerant parsing and visible-text extraction.

use std::sync::LazyLock;

use encoding_rs::{Encoding, UTF_8};
use regex::bytes::Regex;
use scraper::{ElementRef, Html, Node};

/// A parsed document. html5ever recovers from any input, so construction
/// never fails; an empty body parses to the bare `html/head/body` skeleton.
pub struct ParsedPage {
    pub url: String,
    pub html: Html,
    pub charset: &'static Encoding,
}

impl std::fmt::Debug for ParsedPage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParsedPage")
            .field("url", &self.url)
            .field("charset", &self.charset.name())
            .finish_non_exhaustive()
    }
}

impl ParsedPage {
    pub fn root(&self) -> ElementRef<'_> {
        self.html.root_element()
    }

    /// Elements in the document, including the implied `html/head/body`.
    pub fn element_count(&self) -> usize {
        self.html
            .tree
            .nodes()
            .filter(|n| n.value().is_element())
            .count()
    }

    /// True when the document has no text and no elements beyond the skeleton.
    pub fn is_empty(&self) -> bool {
        let skeleton = self.html.tree.nodes().all(|n| match n.value() {
            Node::Element(e) => matches!(e.name(), "html" | "head" | "body"),
            Node::Text(t) => t.trim().is_empty(),
            _ => true,
        });
        skeleton
    }
}

static META_CHARSET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)<meta\b[^>]*?charset\s*=\s*["']?\s*([a-z0-9_\-:.]+)"#).unwrap()
});

/// Charset from a `<meta charset>` or `http-equiv` declaration in the first
/// kilobyte.
pub fn sniff_meta_charset(body: &[u8]) -> Option<&'static Encoding> {
    let head = &body[..body.len().min(1024)];
    let caps = META_CHARSET.captures(head)?;
    let enc = Encoding::for_label(caps.get(1)?.as_bytes())?;
    // A meta declaration of UTF-16 is read as UTF-8 by browsers.
    if enc == encoding_rs::UTF_16LE || enc == encoding_rs::UTF_16BE {
        return Some(UTF_8);
    }
    Some(enc)
}

/// Resolution order: byte-order mark, HTTP header charset, meta declaration,
/// then UTF-8.
pub fn resolve_charset(body: &[u8], declared: Option<&str>) -> &'static Encoding {
    if let Some((enc, _)) = Encoding::for_bom(body) {
        return enc;
    }
    declared
        .and_then(|l| Encoding::for_label(l.trim().as_bytes()))
        .or_else(|| sniff_meta_charset(body))
        .unwrap_or(UTF_8)
}

pub fn decode(body: &[u8], declared: Option<&str>) -> (String, &'static Encoding) {
    let enc = resolve_charset(body, declared);
    let (text, actual, _) = enc.decode(body);
    (text.into_owned(), actual)
}

/// Total function: any byte string produces a page.
pub fn parse_html(url: &str, body: &[u8], declared_charset: Option<&str>) -> ParsedPage {
    let (text, charset) = decode(body, declared_charset);
    ParsedPage {
        url: url.to_string(),
        html: Html::parse_document(&text),
        charset,
    }
}

const SKIPPED: &[&str] = &[
    "head", "title", "script", "style", "template", "noscript", "iframe", "object", "svg",
];

const BLOCK: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "details", "dialog", "div",
    "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4",
    "h5", "h6", "header", "hr", "html", "li", "main", "nav", "ol", "option", "p", "pre",
    "section", "summary", "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul",
];

#[derive(Default)]
struct TextBuf {
    lines: Vec<String>,
    current: String,
    pending_space: bool,
}

impl TextBuf {
    fn push(&mut self, text: &str) {
        for c in text.chars() {
            if c.is_whitespace() {
                self.pending_space = true;
            } else {
                if self.pending_space && !self.current.is_empty() {
                    self.current.push(' ');
                }
                self.pending_space = false;
                self.current.push(c);
            }
        }
    }

    fn line_break(&mut self) {
        if !self.current.is_empty() {
            self.lines.push(std::mem::take(&mut self.current));
        }
        self.pending_space = false;
    }

    fn finish(mut self) -> String {
        self.line_break();
        self.lines.join("\n")
    }
}

fn walk(node: ego_tree::NodeRef<'_, Node>, buf: &mut TextBuf) {
    match node.value() {
        Node::Text(t) => buf.push(t),
        Node::Element(e) => {
            let name = e.name();
            if SKIPPED.contains(&name) {
                return;
            }
            let block = BLOCK.contains(&name);
            if block {
                buf.line_break();
            }
            for child in node.children() {
                walk(child, buf);
            }
            if block {
                buf.line_break();
            }
        }
        _ => {
            for child in node.children() {
                walk(child, buf);
            }
        }
    }
}

/// Whitespace-collapsed visible text of a subtree, blocks on separate lines.
pub fn visible_text(node: ego_tree::NodeRef<'_, Node>) -> String {
    let mut buf = TextBuf::default();
    walk(node, &mut buf);
    buf.finish()
}

pub fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `<title>` (whitespace-collapsed) and the page's visible text.
pub fn extract_title_text(page: &ParsedPage) -> (Option<String>, String) {
    let title = page
        .html
        .tree
        .nodes()
        .filter_map(ElementRef::wrap)
        .find(|e| e.value().name() == "title")
        .map(|e| collapse_ws(&e.text().collect::<String>()))
        .filter(|t| !t.is_empty());
    let text = visible_text(page.html.tree.root());
    (title, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> ParsedPage {
        parse_html("https://shop.test/", s.as_bytes(), None)
    }

    #[test]
    fn title_and_text() {
        let p = parse("<title>Blue Parrot</title><p>Rare  bird</p>");
        assert_eq!(
            extract_title_text(&p),
            (Some("Blue Parrot".to_string()), "Rare bird".to_string())
        );
    }

    #[test]
    fn script_style_excluded() {
        let p = parse("<script>var x=1;</script><style>p{}</style><p>hi</p><noscript>js off</noscript>");
        assert_eq!(extract_title_text(&p).1, "hi");
    }

    #[test]
    fn empty_body() {
        let p = parse_html("u", b"", None);
        assert!(p.is_empty());
        assert_eq!(extract_title_text(&p), (None, String::new()));
    }

    #[test]
    fn element_count_includes_skeleton() {
        let p = parse("<div><p>a</p><p>b<span>c</span></p></div>");
        // html, head, body, div, p, p, span
        assert_eq!(p.element_count(), 7);
        assert!(!p.is_empty());
    }

    #[test]
    fn block_boundaries_and_inline_runs() {
        let p = parse("<div>Price: <b>US $5</b></div><ul><li>one</li><li>two</li></ul>a<br>b");
        assert_eq!(extract_title_text(&p).1, "Price: US $5\none\ntwo\na\nb");
    }

    #[test]
    fn latin1_meta_charset() {
        let mut body = b"<html><head><meta charset=\"iso-8859-1\"></head><body><p>Pr".to_vec();
        body.extend_from_slice(&[0xEA, b's']); // ê
        body.extend_from_slice(b" 12 \xA3</p></body></html>"); // £
        let p = parse_html("u", &body, None);
        assert_eq!(p.charset.name(), "windows-1252");
        assert_eq!(extract_title_text(&p).1, "Prês 12 £");
    }

    #[test]
    fn header_charset_beats_meta() {
        let body = b"<meta charset=\"utf-8\"><p>\xE9t\xE9</p>";
        let p = parse_html("u", body, Some("latin1"));
        assert_eq!(extract_title_text(&p).1, "été");
        let p = parse_html("u", "<p>été</p>".as_bytes(), None);
        assert_eq!(p.charset, UTF_8);
        assert_eq!(extract_title_text(&p).1, "été");
    }

    #[test]
    fn http_equiv_charset() {
        let body = b"<meta http-equiv=\"Content-Type\" content=\"text/html; charset=windows-1252\"><p>\x80 5</p>";
        let p = parse_html("u", body, None);
        assert_eq!(extract_title_text(&p).1, "€ 5");
    }

    #[test]
    fn malformed_markup_recovers() {
        let p = parse("<div><p>unclosed <b>bold<div>next</p></span>");
        assert_eq!(extract_title_text(&p).1, "unclosed bold\nnext");
    }
}
