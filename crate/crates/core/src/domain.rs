//! Host and URL helpers shared by the crawler, extractor and sink.
//!
//! Registrable domains come from the public-suffix snapshot compiled into
//! the `psl` crate, so `www.ebay.co.uk` reduces to `ebay.co.uk` rather than
//! `co.uk`.

use std::net::IpAddr;

use sha2::{Digest, Sha256};
use url::Url;

/// Registrable ("site") domain of a host name.
///
/// IP literals and single-label hosts (`localhost`) are their own site.
/// A host that is itself a public suffix (`co.uk`) has none.
pub fn registrable_domain(host: &str) -> Option<String> {
    let host = host.trim().trim_end_matches('.').to_ascii_lowercase();
    if host.is_empty() {
        return None;
    }
    let bare = host.trim_start_matches('[').trim_end_matches(']');
    if bare.parse::<IpAddr>().is_ok() {
        return Some(bare.to_string());
    }
    if let Some(domain) = psl::domain_str(&host) {
        return Some(domain.to_string());
    }
    if !host.contains('.') {
        return Some(host);
    }
    None
}

/// Registrable domain of a URL's host.
pub fn url_domain(url: &Url) -> Option<String> {
    url.host_str().and_then(registrable_domain)
}

/// Lowercased scheme and host, default port dropped, fragment removed.
///
/// `url::Url` already performs the first three during parsing; this only
/// strips the fragment and rejects anything that is not HTTP(S).
pub fn normalize_url(url: &Url) -> Option<Url> {
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
        return None;
    }
    let mut url = url.clone();
    url.set_fragment(None);
    Some(url)
}

/// Canonical form used for deduplication: normalized URL with query
/// parameters stably sorted by key.
pub fn canonical_url(url: &Url) -> String {
    let mut url = normalize_url(url).unwrap_or_else(|| url.clone());
    if url.query().is_some() {
        let mut pairs: Vec<(String, String)> = url
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        if pairs.is_empty() {
            url.set_query(None);
        } else {
            url.query_pairs_mut().clear().extend_pairs(pairs);
        }
    }
    url.to_string()
}

/// Canonicalizes a URL given as a string. Unparseable input is returned trimmed.
pub fn canonical_str(url: &str) -> String {
    match Url::parse(url.trim()) {
        Ok(u) => canonical_url(&u),
        Err(_) => url.trim().to_string(),
    }
}

/// 128-bit digest of the canonical URL.
pub fn url_digest(url: &Url) -> [u8; 16] {
    let hash = Sha256::digest(canonical_url(url).as_bytes());
    let mut out = [0u8; 16];
    out.copy_from_slice(&hash[..16]);
    out
}
