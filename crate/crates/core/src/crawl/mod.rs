//! Scoped, polite crawling of seed URLs into an append-only page store.

pub mod fetch;
pub mod frontier;
pub mod links;
pub mod page;
pub mod robots;
pub mod run;

pub use fetch::{FetchError, FetchLimits, Fetcher};
pub use frontier::{politeness_violations, scope_of, DomainScope, EnqueueOutcome, Frontier};
pub use links::extract_links;
pub use page::{read_all_pages, FetchedPage, PageStore, PageStoreReader, StoreError};
pub use robots::RobotsPolicy;
pub use run::{run_crawl, CrawlConfig, CrawlError, CrawlReport, CrawlStats, Crawler};
