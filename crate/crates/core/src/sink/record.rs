use chrono::{DateTime, SubsecRound, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::classify::{Annotated, Annotation};
use crate::clock::IdSource;
use crate::crawl::FetchedPage;
use crate::domain::{canonical_str, registrable_domain};
use crate::extract::ProductFields;

/// Digits kept after the decimal point in stored prices.
pub const PRICE_SCALE: u32 = 4;

/// One marketplace ad, the 18 exported attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdRecord {
    pub url: String,
    pub title: Option<String>,
    pub text: String,
    pub product: String,
    pub description: Option<String>,
    pub domain: String,
    pub image: Option<String>,
    pub retrieved: DateTime<Utc>,
    pub category: Option<String>,
    pub production_date: Option<String>,
    #[serde(with = "crate::extract::price::decimal_str")]
    pub price: Option<Decimal>,
    pub currency: Option<String>,
    pub seller: Option<String>,
    pub seller_type: Option<String>,
    pub location: Option<String>,
    pub zero_shot_label: String,
    pub zero_shot_prob: f64,
    pub id: String,
}

impl Annotated for AdRecord {
    fn zero_shot_label(&self) -> &str {
        &self.zero_shot_label
    }

    fn zero_shot_prob(&self) -> f64 {
        self.zero_shot_prob
    }
}

/// Registrable domain of a URL's host, or the bare host when it has none.
pub fn record_domain(url: &str) -> String {
    let host = url::Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(str::to_string))
        .unwrap_or_default();
    registrable_domain(&host).unwrap_or(host)
}

/// Prices are kept at most to [`PRICE_SCALE`] places, without trailing zeros.
pub fn store_price(p: Decimal) -> Decimal {
    p.round_dp(PRICE_SCALE).normalize()
}

/// Builds the exported record. The id comes from `ids` keyed by the
/// canonical ad URL, so seeded sources give stable ids.
pub fn assemble_record(page: &FetchedPage, fields: &ProductFields, cls: &Annotation, ids: &IdSource) -> AdRecord {
    let url = page.final_url.clone();
    let product = fields
        .product
        .clone()
        .or_else(|| fields.title.clone())
        .unwrap_or_default();
    AdRecord {
        domain: record_domain(&url),
        id: ids.id_for(&canonical_str(&url)).to_string(),
        url,
        title: fields.title.clone(),
        text: fields.text.clone(),
        product,
        description: fields.description.clone(),
        image: fields.image.clone(),
        retrieved: page.retrieved_at.trunc_subsecs(3),
        category: fields.category.clone(),
        production_date: fields.production_date.clone(),
        price: fields.price.map(store_price),
        currency: fields.currency.clone(),
        seller: fields.seller.clone(),
        seller_type: fields.seller_type.clone(),
        location: fields.location.clone(),
        zero_shot_label: cls.label.clone(),
        zero_shot_prob: cls.prob,
    }
}
