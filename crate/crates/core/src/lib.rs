//! Wildlife-trade ad collection: seed generation, scoped crawling, product
//! extraction, zero-shot relevance filtering and columnar export.

pub mod classify;
pub mod clock;
pub mod config;
pub mod crawl;
pub mod domain;
pub mod extract;
pub mod induce;
pub mod pipeline;
pub mod report;
pub mod seeds;
pub mod sink;
