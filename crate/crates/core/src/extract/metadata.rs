//! Embedded product metadata: JSON-LD, microdata, OpenGraph and RDFa,
//! each flattened into a small fixed key set.

use std::collections::BTreeMap;
use std::str::FromStr;

use rust_decimal::Decimal;

use scraper::{ElementRef, Selector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::html::{collapse_ws, ParsedPage};
use super::price::{normalize_currency, parse_amount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Syntax {
    JsonLd,
    Microdata,
    Rdfa,
    Opengraph,
}

impl Syntax {
    pub fn as_str(self) -> &'static str {
        match self {
            Syntax::JsonLd => "json-ld",
            Syntax::Microdata => "microdata",
            Syntax::Rdfa => "rdfa",
            Syntax::Opengraph => "opengraph",
        }
    }
}

/// Keys every syntax is normalized onto.
pub const KEYS: &[&str] = &[
    "name",
    "description",
    "price",
    "priceCurrency",
    "image",
    "seller",
    "category",
    "productionDate",
    "availability",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataEntry {
    pub syntax: Syntax,
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataSet {
    pub entries: Vec<MetadataEntry>,
    /// JSON-LD blocks that failed to parse.
    pub skipped_blocks: usize,
}

impl MetadataSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First value for `key`, scanning syntaxes in precedence order
    /// (JSON-LD, microdata, RDFa, OpenGraph) and entries in document order.
    pub fn lookup(&self, key: &str) -> Option<(&str, Syntax)> {
        let mut best: Option<(&str, Syntax)> = None;
        for e in &self.entries {
            if let Some(v) = e.properties.get(key) {
                if best.is_none_or(|(_, s)| e.syntax < s) {
                    best = Some((v, e.syntax));
                }
            }
        }
        best
    }
}

/// Machine-formatted amount (`1500`, `12.50`), the form schema.org asks for.
fn plain_decimal(raw: &str) -> Option<Decimal> {
    let t = raw.trim();
    let (int, frac) = t.split_once('.').unwrap_or((t, "0"));
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if digits(int) && digits(frac) {
        Decimal::from_str(t).ok().map(|d| d.normalize())
    } else {
        None
    }
}

/// Inserts a normalized value if the key is not already set.
fn put(props: &mut BTreeMap<String, String>, key: &str, raw: &str) {
    if props.contains_key(key) {
        return;
    }
    let value = match key {
        "price" => match plain_decimal(raw)
            .or_else(|| parse_amount(raw, props.get("priceCurrency").map(String::as_str)))
        {
            Some(d) => d.to_string(),
            None => return,
        },
        "priceCurrency" => match normalize_currency(raw) {
            Some(c) => c,
            None => return,
        },
        _ => collapse_ws(raw),
    };
    if !value.is_empty() {
        props.insert(key.to_string(), value);
    }
}

fn finish(props: BTreeMap<String, String>, syntax: Syntax, out: &mut Vec<MetadataEntry>) {
    if !props.is_empty() {
        out.push(MetadataEntry { syntax, properties: props });
    }
}

pub fn extract_embedded_metadata(page: &ParsedPage) -> MetadataSet {
    let mut set = MetadataSet::default();
    json_ld(page, &mut set);
    scoped(page, &MICRODATA, &mut set.entries);
    scoped(page, &RDFA, &mut set.entries);
    opengraph(page, &mut set.entries);
    set
}

// ---------------------------------------------------------------- JSON-LD

fn type_names(v: &Value) -> Vec<String> {
    let short = |s: &str| s.rsplit(['/', ':', '#']).next().unwrap_or(s).to_string();
    match v.get("@type") {
        Some(Value::String(s)) => vec![short(s)],
        Some(Value::Array(a)) => a.iter().filter_map(Value::as_str).map(short).collect(),
        _ => Vec::new(),
    }
}

fn has_type(v: &Value, names: &[&str]) -> bool {
    type_names(v).iter().any(|t| names.contains(&t.as_str()))
}

/// Scalar view of a JSON-LD value: strings, numbers, the `name`/`url`/`@id`
/// of nested nodes, or the first element of an array.
fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(a) => a.iter().find_map(scalar),
        Value::Object(o) => ["name", "url", "contentUrl", "@id", "@value"]
            .iter()
            .find_map(|k| o.get(*k).and_then(scalar)),
        _ => None,
    }
}

fn offer_props(offer: &Value, props: &mut BTreeMap<String, String>) {
    let offer = match offer {
        Value::Array(a) => match a.first() {
            Some(first) => first,
            None => return,
        },
        other => other,
    };
    // currency first so the price can use its separator convention
    for (src, key) in [("priceCurrency", "priceCurrency"), ("price", "price"), ("lowPrice", "price")] {
        if let Some(v) = offer.get(src).and_then(scalar) {
            put(props, key, &v);
        }
    }
    if let Some(spec) = offer.get("priceSpecification") {
        let spec = if let Value::Array(a) = spec { a.first().unwrap_or(spec) } else { spec };
        for k in ["priceCurrency", "price"] {
            if let Some(v) = spec.get(k).and_then(scalar) {
                put(props, k, &v);
            }
        }
    }
    for k in ["availability", "seller"] {
        if let Some(v) = offer.get(k).and_then(scalar) {
            put(props, k, &v);
        }
    }
}

fn product_props(product: &Value, props: &mut BTreeMap<String, String>) {
    for k in ["name", "description", "image", "category", "productionDate"] {
        if let Some(v) = product.get(k).and_then(scalar) {
            put(props, k, &v);
        }
    }
}

fn walk_json_ld(v: &Value, out: &mut Vec<MetadataEntry>) {
    match v {
        Value::Array(items) => items.iter().for_each(|i| walk_json_ld(i, out)),
        Value::Object(obj) => {
            if has_type(v, &["Product", "IndividualProduct", "ProductModel"]) {
                let mut props = BTreeMap::new();
                product_props(v, &mut props);
                if let Some(offers) = v.get("offers") {
                    offer_props(offers, &mut props);
                }
                finish(props, Syntax::JsonLd, out);
            } else if has_type(v, &["Offer", "AggregateOffer"]) {
                let mut props = BTreeMap::new();
                offer_props(v, &mut props);
                if let Some(item) = v.get("itemOffered") {
                    product_props(item, &mut props);
                }
                finish(props, Syntax::JsonLd, out);
            } else {
                for value in obj.values() {
                    if value.is_object() || value.is_array() {
                        walk_json_ld(value, out);
                    }
                }
            }
        }
        _ => {}
    }
}

fn json_ld(page: &ParsedPage, set: &mut MetadataSet) {
    let sel = Selector::parse("script").expect("static selector");
    for script in page.html.select(&sel) {
        let ty = script.value().attr("type").unwrap_or_default();
        if !ty.trim().eq_ignore_ascii_case("application/ld+json") {
            continue;
        }
        let body: String = script.text().collect();
        match serde_json::from_str::<Value>(body.trim()) {
            Ok(v) => walk_json_ld(&v, &mut set.entries),
            Err(_) => set.skipped_blocks += 1,
        }
    }
}

// ------------------------------------------------------ microdata / RDFa

struct ScopeSyntax {
    syntax: Syntax,
    scope_attr: &'static str,
    type_attr: &'static str,
    prop_attr: &'static str,
}

const MICRODATA: ScopeSyntax = ScopeSyntax {
    syntax: Syntax::Microdata,
    scope_attr: "itemscope",
    type_attr: "itemtype",
    prop_attr: "itemprop",
};

const RDFA: ScopeSyntax = ScopeSyntax {
    syntax: Syntax::Rdfa,
    scope_attr: "typeof",
    type_attr: "typeof",
    prop_attr: "property",
};

fn short_names(attr: &str) -> impl Iterator<Item = &str> {
    attr.split_whitespace()
        .map(|t| t.rsplit(['/', ':', '#']).next().unwrap_or(t))
}

fn is_product(el: &ElementRef<'_>, s: &ScopeSyntax) -> bool {
    el.value().attr(s.scope_attr).is_some()
        && el
            .value()
            .attr(s.type_attr)
            .is_some_and(|t| short_names(t).any(|n| n == "Product"))
}

/// Value of a property-bearing element, following the microdata rules with
/// an explicit `content` attribute taking precedence.
fn element_value(el: &ElementRef<'_>) -> String {
    let e = el.value();
    if let Some(c) = e.attr("content") {
        return c.to_string();
    }
    let attr = match e.name() {
        "a" | "area" | "link" => "href",
        "img" | "audio" | "embed" | "iframe" | "source" | "track" | "video" => "src",
        "object" => "data",
        "data" | "meter" => "value",
        "time" => "datetime",
        _ => "",
    };
    if !attr.is_empty() {
        if let Some(v) = e.attr(attr) {
            return v.to_string();
        }
    }
    el.text().collect()
}

fn map_key(prop: &str) -> Option<&'static str> {
    Some(match prop {
        "name" => "name",
        "description" => "description",
        "price" | "lowPrice" => "price",
        "priceCurrency" => "priceCurrency",
        "image" => "image",
        "seller" => "seller",
        "category" => "category",
        "productionDate" => "productionDate",
        "availability" => "availability",
        _ => return None,
    })
}

/// Properties declared directly in the scope of `root` (not in nested scopes).
fn direct_props<'a>(root: ElementRef<'a>, s: &ScopeSyntax) -> Vec<(String, ElementRef<'a>)> {
    fn visit<'a>(el: ElementRef<'a>, s: &ScopeSyntax, out: &mut Vec<(String, ElementRef<'a>)>) {
        for child in el.children().filter_map(ElementRef::wrap) {
            if let Some(p) = child.value().attr(s.prop_attr) {
                for name in short_names(p) {
                    out.push((name.to_string(), child));
                }
            }
            if child.value().attr(s.scope_attr).is_none() {
                visit(child, s, out);
            }
        }
    }
    let mut out = Vec::new();
    visit(root, s, &mut out);
    out
}

fn scoped_item(root: ElementRef<'_>, s: &ScopeSyntax) -> BTreeMap<String, String> {
    let mut props = BTreeMap::new();
    let direct = direct_props(root, s);
    let nested = |el: &ElementRef<'_>| el.value().attr(s.scope_attr).is_some();

    // Currency before price so the amount uses the right separators.
    let ordered = direct
        .iter()
        .filter(|(n, _)| n == "priceCurrency")
        .chain(direct.iter().filter(|(n, _)| n != "priceCurrency"));
    for (name, el) in ordered {
        match name.as_str() {
            "offers" if nested(el) => {
                let inner = direct_props(*el, s);
                let inner = inner
                    .iter()
                    .filter(|(n, _)| n == "priceCurrency")
                    .chain(inner.iter().filter(|(n, _)| n != "priceCurrency"));
                for (n, e) in inner {
                    match n.as_str() {
                        "seller" if nested(e) => {
                            if let Some((_, name_el)) =
                                direct_props(*e, s).into_iter().find(|(n, _)| n == "name")
                            {
                                put(&mut props, "seller", &element_value(&name_el));
                            }
                        }
                        other => {
                            if let Some(k) = map_key(other) {
                                put(&mut props, k, &element_value(e));
                            }
                        }
                    }
                }
            }
            "seller" | "brand" if nested(el) => {
                if name == "seller" {
                    if let Some((_, name_el)) = direct_props(*el, s).into_iter().find(|(n, _)| n == "name") {
                        put(&mut props, "seller", &element_value(&name_el));
                    }
                }
            }
            other => {
                if let Some(k) = map_key(other) {
                    if !nested(el) {
                        put(&mut props, k, &element_value(el));
                    }
                }
            }
        }
    }
    props
}

fn scoped(page: &ParsedPage, s: &ScopeSyntax, out: &mut Vec<MetadataEntry>) {
    for el in page.html.root_element().descendent_elements() {
        if !is_product(&el, s) {
            continue;
        }
        // Products nested inside another product are part of the outer one.
        let inside_product = el
            .ancestors()
            .filter_map(ElementRef::wrap)
            .any(|a| is_product(&a, s));
        if inside_product {
            continue;
        }
        finish(scoped_item(el, s), s.syntax, out);
    }
}

// -------------------------------------------------------------- OpenGraph

fn og_key(property: &str) -> Option<&'static str> {
    Some(match property {
        "og:title" => "name",
        "og:description" => "description",
        "og:image" | "og:image:url" | "og:image:secure_url" => "image",
        "product:price:amount" | "og:price:amount" => "price",
        "product:price:currency" | "og:price:currency" => "priceCurrency",
        "product:availability" | "og:availability" => "availability",
        "product:category" => "category",
        "product:retailer" | "product:retailer_title" => "seller",
        _ => return None,
    })
}

fn opengraph(page: &ParsedPage, out: &mut Vec<MetadataEntry>) {
    let sel = Selector::parse("meta").expect("static selector");
    let mut pairs = Vec::new();
    for meta in page.html.select(&sel) {
        let e = meta.value();
        let Some(property) = e.attr("property").or_else(|| e.attr("name")) else {
            continue;
        };
        let property = property.trim().to_ascii_lowercase();
        if !(property.starts_with("og:") || property.starts_with("product:")) {
            continue;
        }
        if let (Some(key), Some(content)) = (og_key(&property), e.attr("content")) {
            pairs.push((key, content.to_string()));
        }
    }
    let mut props = BTreeMap::new();
    for (k, v) in pairs.iter().filter(|(k, _)| *k == "priceCurrency") {
        put(&mut props, k, v);
    }
    for (k, v) in pairs.iter().filter(|(k, _)| *k != "priceCurrency") {
        put(&mut props, k, v);
    }
    finish(props, Syntax::Opengraph, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::html::parse_html;

    fn meta(html: &str) -> MetadataSet {
        extract_embedded_metadata(&parse_html("https://shop.test/p", html.as_bytes(), None))
    }

    fn props(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn json_ld_product_with_offer() {
        let m = meta(
            r#"<script type="application/ld+json">
            {"@context":"https://schema.org","@type":"Product","name":"Tiger claw",
             "offers":{"@type":"Offer","price":"1500.00","priceCurrency":"USD",
                       "seller":{"@type":"Organization","name":"wilddeals99"}}}
            </script>"#,
        );
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].syntax, Syntax::JsonLd);
        assert_eq!(
            m.entries[0].properties,
            props(&[
                ("name", "Tiger claw"),
                ("price", "1500"),
                ("priceCurrency", "USD"),
                ("seller", "wilddeals99")
            ])
        );
    }

    #[test]
    fn json_ld_graph_offer_and_malformed() {
        let m = meta(
            r#"<script type="application/ld+json">{ not json </script>
               <script type="application/ld+json">
               {"@graph":[{"@type":"WebPage","name":"x"},
                          {"@type":["Offer"],"price":12.5,"priceCurrency":"eur",
                           "itemOffered":{"@type":"Product","name":"Ivory comb","image":["https://x/1.jpg","https://x/2.jpg"]}}]}
               </script>"#,
        );
        assert_eq!(m.skipped_blocks, 1);
        assert_eq!(m.entries.len(), 1);
        assert_eq!(
            m.entries[0].properties,
            props(&[
                ("name", "Ivory comb"),
                ("image", "https://x/1.jpg"),
                ("price", "12.5"),
                ("priceCurrency", "EUR")
            ])
        );
    }

    #[test]
    fn opengraph_image() {
        let m = meta(r#"<meta property="og:image" content="https://x/img.jpg"><meta property="og:type" content="product">"#);
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].syntax, Syntax::Opengraph);
        assert_eq!(m.entries[0].properties, props(&[("image", "https://x/img.jpg")]));
    }

    #[test]
    fn no_metadata() {
        assert!(meta("<p>plain page</p>").is_empty());
    }

    #[test]
    fn microdata_product() {
        let m = meta(
            r#"<div itemscope itemtype="https://schema.org/Product">
                 <h1 itemprop="name">Stuffed  parrot</h1>
                 <img itemprop="image" src="/img/p.jpg">
                 <div itemprop="offers" itemscope itemtype="https://schema.org/Offer">
                   <meta itemprop="priceCurrency" content="GBP">
                   <span itemprop="price" content="45.00">£45.00</span>
                   <div itemprop="seller" itemscope itemtype="https://schema.org/Person"><span itemprop="name">Jo</span></div>
                 </div>
                 <div itemprop="review" itemscope itemtype="https://schema.org/Review"><span itemprop="name">nice</span></div>
               </div>"#,
        );
        assert_eq!(m.entries.len(), 1);
        assert_eq!(
            m.entries[0].properties,
            props(&[
                ("name", "Stuffed parrot"),
                ("image", "/img/p.jpg"),
                ("price", "45"),
                ("priceCurrency", "GBP"),
                ("seller", "Jo")
            ])
        );
    }

    #[test]
    fn rdfa_product() {
        let m = meta(
            r#"<div vocab="https://schema.org/" typeof="Product">
                 <span property="name">Crocodile skin bag</span>
                 <div property="offers" typeof="Offer">
                   <span property="priceCurrency" content="EUR">€</span>
                   <span property="price" content="1.250,00">1.250,00</span>
                 </div>
               </div>"#,
        );
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].syntax, Syntax::Rdfa);
        assert_eq!(
            m.entries[0].properties,
            props(&[("name", "Crocodile skin bag"), ("price", "1250"), ("priceCurrency", "EUR")])
        );
    }

    #[test]
    fn lookup_prefers_json_ld() {
        let m = meta(
            r#"<meta property="og:title" content="OG name">
               <script type="application/ld+json">{"@type":"Product","name":"LD name"}</script>"#,
        );
        assert_eq!(m.lookup("name"), Some(("LD name", Syntax::JsonLd)));
        assert_eq!(m.lookup("price"), None);
    }
}
