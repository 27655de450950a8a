//! The fetch / extract-links / enqueue loop driven by a pool of workers
//! sharing one frontier.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::Notify;
use url::Url;

use super::fetch::{FetchError, FetchLimits, Fetcher};
use super::frontier::{scope_of, Dispatch, DomainScope, EnqueueOutcome, Frontier, ScopeError};
use super::links::extract_links;
use super::page::{FetchedPage, PageStore, StoreError};
use super::robots::RobotsPolicy;
use crate::clock::{Clock, SystemClock};
use crate::domain::url_domain;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlConfig {
    pub workers: usize,
    pub min_delay_ms: u64,
    pub timeout_ms: u64,
    pub max_body_bytes: usize,
    pub max_redirects: usize,
    pub page_budget: usize,
    pub respect_robots: bool,
    pub user_agent: String,
    /// Static host → `ip:port` overrides, bypassing DNS.
    pub resolve: BTreeMap<String, String>,
    /// Keep the scheduler's dispatch log in the returned report.
    pub record_decisions: bool,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            workers: 8,
            min_delay_ms: 2000,
            timeout_ms: 30_000,
            max_body_bytes: 5 * 1024 * 1024,
            max_redirects: 5,
            page_budget: 100_000,
            respect_robots: true,
            user_agent: concat!("adtrace/", env!("CARGO_PKG_VERSION")).to_string(),
            resolve: BTreeMap::new(),
            record_decisions: false,
        }
    }
}

impl CrawlConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.workers == 0 {
            return Err("crawl.workers must be >= 1".into());
        }
        if self.min_delay_ms == 0 {
            return Err("crawl.min_delay_ms must be > 0".into());
        }
        if self.page_budget == 0 {
            return Err("crawl.page_budget must be >= 1".into());
        }
        if self.timeout_ms == 0 {
            return Err("crawl.timeout_ms must be > 0".into());
        }
        if self.max_body_bytes == 0 {
            return Err("crawl.max_body_bytes must be > 0".into());
        }
        self.resolve_map()?;
        Ok(())
    }

    pub fn resolve_map(&self) -> Result<BTreeMap<String, SocketAddr>, String> {
        self.resolve
            .iter()
            .map(|(h, a)| {
                a.parse::<SocketAddr>()
                    .map(|a| (h.clone(), a))
                    .map_err(|e| format!("crawl.resolve.{h}: {e}"))
            })
            .collect()
    }

    pub fn limits(&self) -> FetchLimits {
        FetchLimits {
            timeout: Duration::from_millis(self.timeout_ms),
            max_body_bytes: self.max_body_bytes,
            max_redirects: self.max_redirects,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrawlStats {
    /// Requests that produced an HTTP response (any status).
    pub fetched: usize,
    /// Requests that failed at the transport level.
    pub errored: usize,
    pub admitted: usize,
    pub rejected_out_of_scope: usize,
    pub deduped: usize,
    pub disallowed_by_robots: usize,
    pub robots_fetched: usize,
    pub mean_elapsed_ms: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("invalid crawl config: {0}")]
    Config(String),
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error("http client: {0}")]
    Client(FetchError),
    #[error("page store write failed after {fetched} pages: {source}")]
    Store {
        fetched: usize,
        #[source]
        source: StoreError,
        stats: Box<CrawlStats>,
    },
}

#[derive(Debug)]
pub struct CrawlReport {
    pub stats: CrawlStats,
    pub decisions: Vec<Dispatch>,
    pub scope: DomainScope,
}

#[derive(Default)]
struct Shared {
    stats: CrawlStats,
    elapsed_total: u64,
    dispatched: usize,
    in_flight: usize,
    robots: HashMap<String, Arc<RobotsPolicy>>,
    store_error: Option<StoreError>,
}

/// A crawl over a seed set. Pages already present in an earlier page store
/// can be loaded with [`Crawler::resume_from`] so they are not fetched again.
pub struct Crawler {
    config: CrawlConfig,
    scope: DomainScope,
    fetcher: Fetcher,
    frontier: Mutex<Frontier>,
    shared: Mutex<Shared>,
    notify: Notify,
}

enum Step {
    Fetch(Url),
    Robots(Url, String),
    Wait(Option<Instant>),
    Done,
}

fn origin_key(url: &Url) -> String {
    url.origin().ascii_serialization()
}

fn path_and_query(url: &Url) -> String {
    match url.query() {
        Some(q) => format!("{}?{}", url.path(), q),
        None => url.path().to_string(),
    }
}

impl Crawler {
    pub fn new<S: AsRef<str>>(
        seeds: &[S],
        config: CrawlConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, CrawlError> {
        config.validate().map_err(CrawlError::Config)?;
        let scope = scope_of(seeds)?;
        let resolve = config.resolve_map().map_err(CrawlError::Config)?;
        let fetcher = Fetcher::new(&config.user_agent, config.limits(), &resolve, clock)
            .map_err(CrawlError::Client)?;
        let mut frontier = Frontier::new(Duration::from_millis(config.min_delay_ms));
        if config.record_decisions {
            frontier = frontier.with_decision_log();
        }
        let seed_urls: Vec<Url> = seeds.iter().filter_map(|s| Url::parse(s.as_ref()).ok()).collect();
        let crawler = Crawler {
            config,
            scope,
            fetcher,
            frontier: Mutex::new(frontier),
            shared: Mutex::new(Shared::default()),
            notify: Notify::new(),
        };
        crawler.enqueue(&seed_urls);
        Ok(crawler)
    }

    pub fn with_system_clock<S: AsRef<str>>(seeds: &[S], config: CrawlConfig) -> Result<Self, CrawlError> {
        Self::new(seeds, config, Arc::new(SystemClock))
    }

    pub fn scope(&self) -> &DomainScope {
        &self.scope
    }

    /// Marks previously stored pages as seen and queues the unseen in-scope
    /// links they contain. Returns how many stored pages were recognized.
    pub fn resume_from(&self, pages: &[FetchedPage]) -> usize {
        let mut frontier = self.frontier.lock().unwrap();
        let fetched: std::collections::HashSet<[u8; 16]> = pages
            .iter()
            .filter_map(|p| Url::parse(&p.url).ok())
            .map(|u| crate::domain::url_digest(&u))
            .collect();
        let known = fetched.len();
        // Seeds that were already fetched leave the queue.
        frontier.retain_pending(|u| !fetched.contains(&crate::domain::url_digest(u)));
        for page in pages {
            if let Ok(u) = Url::parse(&page.url) {
                frontier.mark_seen(&u);
            }
            if let Ok(u) = Url::parse(&page.final_url) {
                frontier.mark_seen(&u);
            }
        }
        for page in pages.iter().filter(|p| p.is_success()) {
            let links = extract_links(page);
            frontier.enqueue(links.iter(), &self.scope);
        }
        known
    }

    fn enqueue(&self, urls: &[Url]) -> EnqueueOutcome {
        let out = self.frontier.lock().unwrap().enqueue(urls.iter(), &self.scope);
        let mut sh = self.shared.lock().unwrap();
        sh.stats.admitted += out.admitted;
        sh.stats.rejected_out_of_scope += out.out_of_scope;
        sh.stats.deduped += out.duplicate;
        out
    }

    fn next_step(&self) -> Step {
        let mut frontier = self.frontier.lock().unwrap();
        let mut sh = self.shared.lock().unwrap();
        if sh.store_error.is_some() || sh.dispatched >= self.config.page_budget {
            return if sh.in_flight == 0 { Step::Done } else { Step::Wait(None) };
        }
        let respect = self.config.respect_robots;
        let robots = &sh.robots;
        let (next, disallowed) = frontier.next_fetchable_where(Instant::now(), |url| {
            // unknown policies are fetched first, below
            !respect || robots.get(&origin_key(url)).is_none_or(|p| p.allowed(&path_and_query(url)))
        });
        sh.stats.disallowed_by_robots += disallowed;
        match next {
            Some(url) => {
                if respect && !sh.robots.contains_key(&origin_key(&url)) {
                    // This dispatch slot is spent on robots.txt; the page
                    // goes back to the head of its queue.
                    let origin = origin_key(&url);
                    sh.in_flight += 1;
                    frontier.requeue_front(url.clone());
                    return Step::Robots(url, origin);
                }
                sh.dispatched += 1;
                sh.in_flight += 1;
                Step::Fetch(url)
            }
            None if frontier.is_empty() && sh.in_flight == 0 => Step::Done,
            None if frontier.is_empty() => Step::Wait(None),
            None => Step::Wait(frontier.next_ready_at()),
        }
    }

    async fn load_robots(&self, url: &Url, origin: String) {
        let policy = match url.join("/robots.txt") {
            Ok(robots_url) => match self.fetcher.get_small(&robots_url).await {
                Ok((status, body)) if (200..300).contains(&status) => {
                    RobotsPolicy::parse(&String::from_utf8_lossy(&body), &self.config.user_agent)
                }
                // Missing, erroring or unreachable robots.txt: no restrictions.
                _ => RobotsPolicy::allow_all(),
            },
            Err(_) => RobotsPolicy::allow_all(),
        };
        if let (Some(delay), Some(domain)) = (policy.crawl_delay(), url_domain(url)) {
            self.frontier.lock().unwrap().raise_min_delay(&domain, delay);
        }
        let mut sh = self.shared.lock().unwrap();
        sh.stats.robots_fetched += 1;
        sh.robots.insert(origin, Arc::new(policy));
        sh.in_flight -= 1;
    }

    async fn process(&self, url: Url, store: &PageStore) {
        let started = Instant::now();
        let page = match self.fetcher.fetch(&url, Some(&self.scope)).await {
            Ok(page) => page,
            Err(e) => self.fetcher.failure_page(&url, &e, started),
        };
        let write = store.append(&page);
        {
            let mut sh = self.shared.lock().unwrap();
            if page.error.is_some() {
                sh.stats.errored += 1;
            } else {
                sh.stats.fetched += 1;
                sh.elapsed_total += page.elapsed_ms;
            }
            if let Err(e) = write {
                sh.store_error.get_or_insert(e);
            }
        }
        if page.is_success() {
            let links = extract_links(&page);
            if let Ok(final_url) = Url::parse(&page.final_url) {
                self.frontier.lock().unwrap().mark_seen(&final_url);
            }
            self.enqueue(&links);
        }
        self.shared.lock().unwrap().in_flight -= 1;
    }

    async fn worker(&self, store: &PageStore) {
        loop {
            match self.next_step() {
                Step::Done => break,
                Step::Fetch(url) => self.process(url, store).await,
                Step::Robots(url, origin) => self.load_robots(&url, origin).await,
                Step::Wait(until) => {
                    let cap = Instant::now() + Duration::from_millis(50);
                    let until = until.map_or(cap, |u| u.min(cap));
                    tokio::select! {
                        _ = tokio::time::sleep_until(until.into()) => {}
                        _ = self.notify.notified() => {}
                    }
                    continue;
                }
            }
            self.notify.notify_waiters();
        }
        self.notify.notify_waiters();
    }

    /// Runs workers until the frontier drains or the page budget is spent.
    pub async fn run(&self, store: &PageStore) -> Result<CrawlReport, CrawlError> {
        let workers = (0..self.config.workers).map(|_| self.worker(store));
        futures::future::join_all(workers).await;
        let flushed = store.flush();

        let mut sh = self.shared.lock().unwrap();
        sh.stats.mean_elapsed_ms = if sh.stats.fetched == 0 {
            0.0
        } else {
            sh.elapsed_total as f64 / sh.stats.fetched as f64
        };
        let stats = sh.stats.clone();
        if let Some(source) = sh.store_error.take().or(flushed.err()) {
            return Err(CrawlError::Store {
                fetched: stats.fetched,
                source,
                stats: Box::new(stats),
            });
        }
        let decisions = self.frontier.lock().unwrap().take_decision_log();
        Ok(CrawlReport {
            stats,
            decisions,
            scope: self.scope.clone(),
        })
    }
}

/// Convenience wrapper: crawl `seeds` into `store` with the system clock.
pub async fn run_crawl<S: AsRef<str>>(
    seeds: &[S],
    config: CrawlConfig,
    store: &PageStore,
) -> Result<CrawlReport, CrawlError> {
    Crawler::with_system_clock(seeds, config)?.run(store).await
}
