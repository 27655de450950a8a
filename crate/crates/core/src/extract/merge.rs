use std::collections::BTreeMap;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::html::collapse_ws;
use super::metadata::{MetadataSet, Syntax};
use super::price::{normalize_currency, parse_price};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "syntax", rename_all = "kebab-case")]
pub enum FieldSource {
    Metadata(Syntax),
    Scraper,
    PageContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    PriceConflict { metadata: Decimal, scraped: Decimal },
    AmbiguousCurrencySymbol { raw: String, assumed: String },
    UnparseablePrice { raw: String },
    UnparseableProductionDate { raw: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductFields {
    pub title: Option<String>,
    pub text: String,
    pub product: Option<String>,
    pub description: Option<String>,
    pub category: Option<String>,
    pub production_date: Option<String>,
    #[serde(with = "crate::extract::price::decimal_str")]
    pub price: Option<Decimal>,
    pub currency: Option<String>,
    pub seller: Option<String>,
    pub seller_type: Option<String>,
    pub location: Option<String>,
    pub image: Option<String>,
    pub provenance: BTreeMap<String, FieldSource>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

/// Relative difference above which metadata and scraped prices disagree.
pub const PRICE_CONFLICT_TOLERANCE: &str = "0.01";

fn price_conflict(metadata: Decimal, scraped: Decimal) -> bool {
    let tol = Decimal::from_str(PRICE_CONFLICT_TOLERANCE).expect("constant");
    let diff = (metadata - scraped).abs();
    if metadata.is_zero() {
        !diff.is_zero()
    } else {
        diff / metadata.abs() > tol
    }
}

/// ISO-8601 calendar date, year-month, full timestamp, or a bare year.
pub fn valid_production_date(s: &str) -> bool {
    let s = s.trim();
    let year = |y: &str| y.len() == 4 && y.bytes().all(|b| b.is_ascii_digit());
    if year(s) {
        return true;
    }
    if let Some((y, m)) = s.split_once('-') {
        if year(y) && m.len() == 2 && m.parse::<u32>().is_ok_and(|m| (1..=12).contains(&m)) {
            return true;
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok() || DateTime::parse_from_rfc3339(s).is_ok()
}

struct Picker<'a> {
    meta: &'a MetadataSet,
    scraped: &'a BTreeMap<String, String>,
    provenance: BTreeMap<String, FieldSource>,
}

impl Picker<'_> {
    fn meta(&self, key: &str) -> Option<(String, Syntax)> {
        self.meta.lookup(key).map(|(v, s)| (v.to_string(), s))
    }

    fn scraped(&self, key: &str) -> Option<String> {
        self.scraped
            .get(key)
            .map(|v| collapse_ws(v))
            .filter(|v| !v.is_empty())
    }

    /// Metadata first, then the scraper.
    fn pick(&mut self, field: &str, meta_key: Option<&str>) -> Option<String> {
        if let Some((v, syntax)) = meta_key.and_then(|k| self.meta(k)) {
            self.provenance.insert(field.into(), FieldSource::Metadata(syntax));
            return Some(v);
        }
        let v = self.scraped(field)?;
        self.provenance.insert(field.into(), FieldSource::Scraper);
        Some(v)
    }
}

pub fn merge_product_fields(
    meta: &MetadataSet,
    scraped: &BTreeMap<String, String>,
    page_title: Option<&str>,
    page_text: &str,
) -> ProductFields {
    let mut p = Picker {
        meta,
        scraped,
        provenance: BTreeMap::new(),
    };
    let mut diagnostics = Vec::new();
    let page_title = page_title.map(collapse_ws).filter(|t| !t.is_empty());

    let title = match p.pick("title", None) {
        Some(t) => Some(t),
        None => page_title.clone().inspect(|_| {
            p.provenance.insert("title".into(), FieldSource::PageContent);
        }),
    };
    p.provenance.insert("text".into(), FieldSource::PageContent);

    let product = match p.pick("product", Some("name")) {
        Some(v) => Some(v),
        None => page_title.clone().inspect(|_| {
            p.provenance.insert("product".into(), FieldSource::PageContent);
        }),
    };
    let description = p.pick("description", Some("description"));
    let category = p.pick("category", Some("category"));
    let image = p.pick("image", Some("image"));
    let seller = p.pick("seller", Some("seller"));
    let seller_type = p.pick("seller_type", None);
    let location = p.pick("location", None);

    let production_date = match p.pick("production_date", Some("productionDate")) {
        Some(d) if valid_production_date(&d) => Some(d),
        Some(d) => {
            p.provenance.remove("production_date");
            diagnostics.push(Diagnostic::UnparseableProductionDate { raw: d });
            None
        }
        None => None,
    };

    // Price and currency.
    let meta_price = p
        .meta("price")
        .and_then(|(v, s)| Decimal::from_str(&v).ok().map(|d| (d, s)));
    let meta_currency = p.meta("priceCurrency");
    let scraped_currency = p.scraped("currency").and_then(|c| normalize_currency(&c));
    let hint = meta_currency
        .as_ref()
        .map(|(c, _)| c.clone())
        .or_else(|| scraped_currency.clone());
    let scraped_price = match p.scraped("price") {
        Some(raw) => match parse_price(&raw, hint.as_deref()) {
            Some(parsed) => Some((raw, parsed)),
            None => {
                diagnostics.push(Diagnostic::UnparseablePrice { raw });
                None
            }
        },
        None => None,
    };

    let mut price = None;
    let mut currency = None;
    match (meta_price, &scraped_price) {
        (Some((m, syntax)), scraped) => {
            price = Some(m);
            p.provenance.insert("price".into(), FieldSource::Metadata(syntax));
            if let Some((_, s)) = scraped {
                if price_conflict(m, s.amount) {
                    diagnostics.push(Diagnostic::PriceConflict {
                        metadata: m,
                        scraped: s.amount,
                    });
                }
            }
        }
        (None, Some((_, s))) => {
            price = Some(s.amount);
            p.provenance.insert("price".into(), FieldSource::Scraper);
        }
        (None, None) => {}
    }
    if let Some((c, syntax)) = meta_currency {
        currency = Some(c);
        p.provenance.insert("currency".into(), FieldSource::Metadata(syntax));
    } else if let Some(c) = scraped_currency {
        currency = Some(c);
        p.provenance.insert("currency".into(), FieldSource::Scraper);
    } else if let Some((raw, s)) = &scraped_price {
        if let Some(c) = &s.currency {
            currency = Some(c.clone());
            p.provenance.insert("currency".into(), FieldSource::Scraper);
            if s.ambiguous {
                diagnostics.push(Diagnostic::AmbiguousCurrencySymbol {
                    raw: raw.clone(),
                    assumed: c.clone(),
                });
            }
        }
    }

    ProductFields {
        title,
        text: page_text.to_string(),
        product,
        description,
        category,
        production_date,
        price,
        currency,
        seller,
        seller_type,
        location,
        image,
        provenance: p.provenance,
        diagnostics,
    }
}
