//! HTTP fetching with manual redirect handling and body caps.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use reqwest::header::{CONTENT_TYPE, LOCATION};
use url::Url;

use super::frontier::DomainScope;
use super::page::FetchedPage;
use crate::clock::Clock;

#[derive(Debug, Clone)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub max_body_bytes: usize,
    pub max_redirects: usize,
}

impl Default for FetchLimits {
    fn default() -> Self {
        FetchLimits {
            timeout: Duration::from_secs(30),
            max_body_bytes: 5 * 1024 * 1024,
            max_redirects: 5,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum FetchError {
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("too many redirects (more than {0})")]
    TooManyRedirects(usize),
    #[error("redirect without a usable Location header")]
    BadRedirect,
    #[error("redirect leaves crawl scope: {0}")]
    RedirectOutOfScope(String),
    #[error("request failed: {0}")]
    Other(String),
}

impl From<reqwest::Error> for FetchError {
    fn from(e: reqwest::Error) -> Self {
        if e.is_timeout() {
            FetchError::Timeout(Duration::ZERO)
        } else if e.is_connect() {
            FetchError::Connect(e.to_string())
        } else {
            FetchError::Other(e.to_string())
        }
    }
}

/// Shared HTTP client. Redirects are followed by hand so every hop can be
/// checked against the crawl scope.
#[derive(Clone)]
pub struct Fetcher {
    client: reqwest::Client,
    limits: FetchLimits,
    clock: Arc<dyn Clock>,
}

impl Fetcher {
    pub fn new(
        user_agent: &str,
        limits: FetchLimits,
        resolve: &BTreeMap<String, SocketAddr>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, FetchError> {
        let mut builder = reqwest::Client::builder()
            .user_agent(user_agent)
            .redirect(reqwest::redirect::Policy::none())
            .timeout(limits.timeout)
            .no_proxy();
        for (host, addr) in resolve {
            builder = builder.resolve(host, *addr);
        }
        let client = builder.build().map_err(|e| FetchError::Other(e.to_string()))?;
        Ok(Fetcher {
            client,
            limits,
            clock,
        })
    }

    pub fn limits(&self) -> &FetchLimits {
        &self.limits
    }

    /// Fetches `url`, following at most `max_redirects` in-scope redirects.
    pub async fn fetch(&self, url: &Url, scope: Option<&DomainScope>) -> Result<FetchedPage, FetchError> {
        let start = Instant::now();
        let timeout = self.limits.timeout;
        match tokio::time::timeout(timeout, self.fetch_inner(url, scope, start)).await {
            Ok(result) => result.map_err(|e| match e {
                FetchError::Timeout(_) => FetchError::Timeout(timeout),
                other => other,
            }),
            Err(_) => Err(FetchError::Timeout(timeout)),
        }
    }

    async fn fetch_inner(
        &self,
        url: &Url,
        scope: Option<&DomainScope>,
        start: Instant,
    ) -> Result<FetchedPage, FetchError> {
        let mut current = url.clone();
        let mut hops = 0;
        loop {
            let mut resp = self.client.get(current.clone()).send().await?;
            let status = resp.status();
            if status.is_redirection() {
                if let Some(loc) = resp.headers().get(LOCATION) {
                    let target = loc
                        .to_str()
                        .ok()
                        .and_then(|l| current.join(l).ok())
                        .ok_or(FetchError::BadRedirect)?;
                    hops += 1;
                    if hops > self.limits.max_redirects {
                        return Err(FetchError::TooManyRedirects(self.limits.max_redirects));
                    }
                    if let Some(scope) = scope {
                        if !scope.contains(&target) {
                            return Err(FetchError::RedirectOutOfScope(target.to_string()));
                        }
                    }
                    current = target;
                    continue;
                }
            }

            let content_type = resp
                .headers()
                .get(CONTENT_TYPE)
                .and_then(|v| v.to_str().ok())
                .unwrap_or_default()
                .to_string();
            let mut body = Vec::new();
            let mut truncated = false;
            while let Some(chunk) = resp.chunk().await? {
                let room = self.limits.max_body_bytes - body.len();
                if chunk.len() > room {
                    body.extend_from_slice(&chunk[..room]);
                    truncated = true;
                    break;
                }
                body.extend_from_slice(&chunk);
            }
            return Ok(FetchedPage {
                url: url.to_string(),
                final_url: current.to_string(),
                status: status.as_u16(),
                body,
                content_type,
                retrieved_at: self.clock.now(),
                elapsed_ms: start.elapsed().as_millis() as u64,
                truncated,
                error: None,
            });
        }
    }

    /// Plain GET used for robots.txt: status and (capped) body.
    pub async fn get_small(&self, url: &Url) -> Result<(u16, Vec<u8>), FetchError> {
        let page = self.fetch(url, None).await?;
        Ok((page.status, page.body))
    }

    /// Page record for a failed fetch.
    pub fn failure_page(&self, url: &Url, err: &FetchError, started: Instant) -> FetchedPage {
        FetchedPage::failed(
            url.as_str(),
            err.to_string(),
            self.clock.now(),
            started.elapsed().as_millis() as u64,
        )
    }
}
