//! A deterministic multi-shop marketplace served from one loopback port.
//!
//! Shops are virtual hosts (`www.shop-a.test`, …) reached through the
//! crawler's static resolve table. Every page links to foreign hosts as
//! well, exactly 30% of its links, and the server logs each request by
//! `Host` so tests can check that none of them was ever fetched.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;

use crate::{serve, Running};

pub const SPECIES: &[&str] = &[
    "Scarlet Macaw",
    "Amur Tiger",
    "Hyacinth Macaw",
    "Sumatran Rhino",
    "Hawksbill Turtle",
    "Snow Leopard",
    "Sunda Pangolin",
    "Philippine Eagle",
    "Komodo Dragon",
    "Asian Elephant",
    "Palm Cockatoo",
    "Radiated Tortoise",
];

/// What a product listing offers; decides its ground-truth relevance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    LiveAnimal,
    Claw,
    Skin,
    Toy,
    Print,
    Object,
    Replica,
    Neutral,
}

pub const KINDS: [Kind; 8] = [
    Kind::LiveAnimal,
    Kind::Toy,
    Kind::Claw,
    Kind::Print,
    Kind::Object,
    Kind::Skin,
    Kind::Replica,
    Kind::Neutral,
];

impl Kind {
    /// Live animals and body parts are what the pipeline keeps.
    pub fn relevant(self) -> bool {
        matches!(self, Kind::LiveAnimal | Kind::Claw | Kind::Skin)
    }

    pub fn product_name(self, species: &str) -> String {
        match self {
            Kind::LiveAnimal => format!("Live {species} chick"),
            Kind::Claw => format!("{species} claw pendant"),
            Kind::Skin => format!("{species} skin rug"),
            Kind::Toy => format!("Plush {species} toy"),
            Kind::Print => format!("{species} poster print"),
            Kind::Object => format!("Carved {species} statue"),
            Kind::Replica => format!("Resin replica {species} figure"),
            Kind::Neutral => format!("{species} field guide"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Product {
    pub id: usize,
    pub name: String,
    pub kind: Kind,
    pub price: String,
    pub currency: &'static str,
    pub seller: String,
}

#[derive(Debug, Clone)]
pub struct Shop {
    pub host: String,
    pub title: String,
    pub products: Vec<Product>,
}

#[derive(Debug, Clone)]
pub struct Market {
    pub shops: Vec<Shop>,
    pub foreign_hosts: Vec<String>,
}

/// In-scope related links per product page (one more goes to a
/// robots-disallowed path); foreign links make up the remaining 30%.
const RELATED: usize = 6;
const FOREIGN_PER_PRODUCT: usize = 3;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Foreign links needed so they are 30% of `in_scope + foreign`.
pub fn foreign_count(in_scope: usize) -> usize {
    (in_scope * 3 + 3) / 7
}

impl Market {
    pub fn generate(shops: usize, products_per_shop: usize) -> Self {
        const CURRENCIES: [&str; 3] = ["EUR", "USD", "GBP"];
        let shops = (0..shops)
            .map(|s| {
                let letter = (b'a' + s as u8) as char;
                let products = (0..products_per_shop)
                    .map(|id| {
                        let kind = KINDS[id % KINDS.len()];
                        let species = SPECIES[(id / KINDS.len() + s * 5) % SPECIES.len()];
                        Product {
                            id,
                            name: kind.product_name(species),
                            kind,
                            price: format!("{}.{:02}", 10 + (id * 37 + s * 11) % 400, (id * 53) % 100),
                            currency: CURRENCIES[(id + s) % CURRENCIES.len()],
                            seller: format!("seller{}", (id * 7 + s) % 13),
                        }
                    })
                    .collect();
                Shop {
                    host: format!("www.shop-{letter}.test"),
                    title: format!("Shop {}", letter.to_ascii_uppercase()),
                    products,
                }
            })
            .collect();
        Market {
            shops,
            foreign_hosts: vec![
                "partner-bazaar.test".into(),
                "ads.tracker-net.test".into(),
                "cdn.socialshare.test".into(),
            ],
        }
    }

    /// Pattern-file lines (`domain<TAB>template`) for the shops' search forms.
    pub fn patterns_tsv(&self) -> String {
        self.shops
            .iter()
            .map(|s| format!("{}\thttp://{}/search?q=KEYWORD\n", s.host, s.host))
            .collect()
    }

    /// Host → `ip:port` table sending every shop and foreign host to `addr`.
    pub fn resolve(&self, addr: std::net::SocketAddr) -> BTreeMap<String, String> {
        self.shops
            .iter()
            .map(|s| &s.host)
            .chain(&self.foreign_hosts)
            .map(|h| (h.clone(), addr.to_string()))
            .collect()
    }

    pub fn product_count(&self) -> usize {
        self.shops.iter().map(|s| s.products.len()).sum()
    }

    pub fn relevant_count(&self) -> usize {
        self.shops
            .iter()
            .flat_map(|s| &s.products)
            .filter(|p| p.kind.relevant())
            .count()
    }

    pub fn is_foreign(&self, host: &str) -> bool {
        self.foreign_hosts.iter().any(|h| h == host)
    }

    fn foreign_links(&self, salt: usize, n: usize) -> String {
        (0..n)
            .map(|k| {
                let host = &self.foreign_hosts[(salt + k) % self.foreign_hosts.len()];
                format!("<a href=\"http://{host}/p/{}\">partner offer</a>\n", salt * 10 + k)
            })
            .collect()
    }

    fn search_page(&self, shop: &Shop, query: &str) -> String {
        let items: String = shop
            .products
            .iter()
            .map(|p| format!("<li><a href=\"/item/{}\">{}</a></li>\n", p.id, escape(&p.name)))
            .collect();
        let foreign = self.foreign_links(query.len(), foreign_count(shop.products.len()));
        format!(
            "<!doctype html>\n<html><head><title>{} search</title></head>\n<body>\n<h1>Results</h1>\n<ul class=\"results\">\n{items}</ul>\n<aside>\n{foreign}</aside>\n</body></html>\n",
            escape(&shop.title)
        )
    }

    fn product_page(&self, shop: &Shop, p: &Product) -> String {
        let n = shop.products.len();
        let related: String = (1..=RELATED.min(n.saturating_sub(1)))
            .map(|k| {
                let q = &shop.products[(p.id + k) % n];
                format!("<li><a href=\"/item/{}\">{}</a></li>\n", q.id, escape(&q.name))
            })
            .collect();
        let ld = serde_json::json!({
            "@context": "https://schema.org",
            "@type": "Product",
            "name": p.name,
            "offers": {
                "@type": "Offer",
                "price": p.price,
                "priceCurrency": p.currency,
                "seller": { "@type": "Organization", "name": p.seller },
            },
        });
        format!(
            "<!doctype html>\n<html><head><title>{name} | {shop}</title>\n<script type=\"application/ld+json\">{ld}</script>\n</head>\n<body>\n<div class=\"listing\">\n<h1 class=\"title\">{name}</h1>\n<span class=\"price\">{price} {cur}</span>\n<p class=\"seller\">{seller}</p>\n</div>\n<ul class=\"related\">\n{related}</ul>\n<a href=\"/private/watch?item={id}\">watch</a>\n<aside>\n{foreign}</aside>\n</body></html>\n",
            name = escape(&p.name),
            shop = escape(&shop.title),
            price = p.price,
            cur = p.currency,
            seller = escape(&p.seller),
            id = p.id,
            foreign = self.foreign_links(p.id, FOREIGN_PER_PRODUCT),
        )
    }

    /// Response body for a request, `None` for 404.
    pub fn render(&self, host: &str, path: &str, query: &str) -> Option<(&'static str, String)> {
        let shop = self.shops.iter().find(|s| s.host == host)?;
        if path == "/robots.txt" {
            return Some(("text/plain", "User-agent: *\nDisallow: /private\n".into()));
        }
        if path == "/search" {
            return Some(("text/html; charset=utf-8", self.search_page(shop, query)));
        }
        let id: usize = path.strip_prefix("/item/")?.parse().ok()?;
        let p = shop.products.get(id)?;
        Some(("text/html; charset=utf-8", self.product_page(shop, p)))
    }

    pub async fn start(self) -> MarketServer {
        let state = Arc::new(MarketState {
            market: self,
            log: Mutex::new(Vec::new()),
        });
        let router = Router::new().fallback(handle).with_state(state.clone());
        MarketServer {
            running: serve(router).await,
            state,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoggedRequest {
    pub host: String,
    pub path: String,
    pub at: Instant,
}

struct MarketState {
    market: Market,
    log: Mutex<Vec<LoggedRequest>>,
}

async fn handle(State(state): State<Arc<MarketState>>, req: Request) -> Response {
    let host = req
        .headers()
        .get(header::HOST)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .split(':')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    let path = req.uri().path().to_string();
    let query = req.uri().query().unwrap_or("").to_string();
    state.log.lock().unwrap().push(LoggedRequest {
        host: host.clone(),
        path: path.clone(),
        at: Instant::now(),
    });
    match state.market.render(&host, &path, &query) {
        Some((ct, body)) => ([(header::CONTENT_TYPE, ct)], body).into_response(),
        None => (StatusCode::NOT_FOUND, "not found").into_response(),
    }
}

pub struct MarketServer {
    pub running: Running,
    state: Arc<MarketState>,
}

impl MarketServer {
    pub fn market(&self) -> &Market {
        &self.state.market
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.state.log.lock().unwrap().clone()
    }

    /// Logged requests whose host is not one of the shops.
    pub fn out_of_scope_requests(&self) -> Vec<LoggedRequest> {
        let m = &self.state.market;
        self.requests()
            .into_iter()
            .filter(|r| !m.shops.iter().any(|s| s.host == r.host))
            .collect()
    }

    pub fn resolve(&self) -> BTreeMap<String, String> {
        self.state.market.resolve(self.running.addr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn foreign_share_is_thirty_percent() {
        assert_eq!(foreign_count(7), 3);
        assert_eq!(foreign_count(350), 150);
        let m = Market::generate(1, 40);
        let (_, body) = m.render("www.shop-a.test", "/item/3", "").unwrap();
        let links = body.matches("<a href=").count();
        let foreign = body.matches("href=\"http://").count();
        assert_eq!((links, foreign), (10, 3));
    }

    #[test]
    fn ground_truth() {
        let m = Market::generate(2, 16);
        assert_eq!(m.product_count(), 32);
        assert_eq!(m.relevant_count(), 12);
        assert!(m.render("www.shop-a.test", "/item/99", "").is_none());
        assert!(m.render("partner-bazaar.test", "/p/1", "").is_none());
    }
}
