//! Stage commands over a shared configuration. Stages hand off through
//! files in the work directory:
//!
//! ```text
//! seeds.txt -> pages.store -> extracted.jsonl -> classified.jsonl -> <output>/ads/date=…/part-NNNN.parquet
//! ```
//!
//! Every stage skips inputs it already processed (keyed by canonical URL),
//! so re-running a stage adds nothing downstream.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions, TryLockError};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, SubsecRound, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{annotate_all, is_relevant, Backend, ClassifyError, RetryPolicy};
use crate::clock::{Clock, FixedClock, IdSource, SystemClock};
use crate::config::{ConfigError, PipelineConfig, TextAttribute};
use crate::crawl::{CrawlError, CrawlStats, Crawler, PageStore, PageStoreReader, StoreError};
use crate::domain::canonical_str;
use crate::extract::{extract_page, html::parse_html, Diagnostic, ProductFields};
use crate::induce::{induce_rules, FieldDiagnostic, InduceError, SelectorRuleSet, TrainingExample};
use crate::report::{label_distribution, top_domains, LabelDistribution};
use crate::seeds::{self, SeedError};
use crate::sink::record::{record_domain, store_price};
use crate::sink::{self, partition_key, AdRecord, ObjectStore, ObjectStoreError, SinkError, StoreSettings};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("required input {0} does not exist")]
    MissingInput(PathBuf),
    #[error("another command holds the work directory lock {0}")]
    Locked(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    BadLine { path: String, line: usize, message: String },
    #[error(transparent)]
    Seeds(#[from] SeedError),
    #[error(transparent)]
    Crawl(#[from] CrawlError),
    #[error(transparent)]
    PageStore(#[from] StoreError),
    #[error(transparent)]
    Induce(#[from] InduceError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error("{stage}: {processed} processed, {failed} failed: {source}")]
    Upload {
        stage: &'static str,
        processed: usize,
        failed: usize,
        #[source]
        source: ObjectStoreError,
    },
}

impl PipelineError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingInput(_) => 2,
            PipelineError::Crawl(CrawlError::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// Exclusive hold on a work directory for the lifetime of the value.
#[derive(Debug)]
pub struct WorkLock {
    _file: File,
}

impl WorkLock {
    pub fn acquire(path: &Path) -> Result<Self, PipelineError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path)
            .map_err(|e| PipelineError::io(path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(WorkLock { _file: file }),
            Err(TryLockError::WouldBlock) => Err(PipelineError::Locked(path.to_path_buf())),
            Err(TryLockError::Error(e)) => Err(PipelineError::io(path, e)),
        }
    }
}

// ------------------------------------------------------------------ jsonl

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(PipelineError::io(path, e)),
    };
    let mut out = Vec::new();
    let mut lines = BufReader::new(file).lines().enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            // an interrupted append can leave a partial final line
            Err(e) if lines.peek().is_none() => {
                tracing::warn!("{}:{}: ignoring partial final line: {e}", path.display(), i + 1);
            }
            Err(e) => {
                return Err(PipelineError::BadLine {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    if items.is_empty() {
        return Ok(());
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| PipelineError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("records serialize");
        w.write_all(b"\n").map_err(|e| PipelineError::io(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

fn require(path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput(path.to_path_buf()))
    }
}

// ----------------------------------------------------------------- types

/// One extracted page, as handed from `extract` to `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPage {
    pub url: String,
    pub canonical: String,
    pub retrieved: DateTime<Utc>,
    pub fields: ProductFields,
}

/// A classified record and whether it passed the relevance filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    pub relevant: bool,
    #[serde(flatten)]
    pub record: AdRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenSeedsSummary {
    pub patterns: usize,
    pub keywords: usize,
    pub seeds: usize,
    pub skipped: usize,
    pub path: PathBuf,
}

impl std::fmt::Display for GenSeedsSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} patterns, {} keywords, {} seeds", self.patterns, self.keywords, self.seeds)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrawlSummary {
    pub stage: &'static str,
    pub seeds: usize,
    pub resumed_pages: usize,
    pub domains: usize,
    #[serde(flatten)]
    pub stats: CrawlStats,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExtractSummary {
    pub stage: &'static str,
    pub pages_read: usize,
    /// HTML pages turned into new records.
    pub pages_parsed: usize,
    pub already_processed: usize,
    pub skipped_not_html: usize,
    pub skipped_failed: usize,
    pub metadata_blocks_skipped: usize,
    pub price_conflicts: usize,
    pub rule_misses: usize,
    pub with_rules: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClassifySummary {
    pub stage: &'static str,
    pub input: usize,
    pub already_processed: usize,
    pub classified: usize,
    pub unclassified: usize,
    pub relevant: usize,
    pub label_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SinkSummary {
    pub stage: &'static str,
    pub relevant_records: usize,
    pub already_processed: usize,
    pub written: usize,
    pub files: Vec<sink::BatchManifest>,
    pub uploaded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InduceSummary {
    pub stage: &'static str,
    pub domain: String,
    pub examples: usize,
    pub fields: Vec<String>,
    pub diagnostics: Vec<FieldDiagnostic>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub distribution: LabelDistribution,
    pub top_domains: Vec<(String, u64)>,
    pub domain_labels: Vec<String>,
}

// --------------------------------------------------------------- pipeline

pub struct Pipeline {
    pub config: PipelineConfig,
    clock: Arc<dyn Clock>,
    ids: IdSource,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        let (clock, ids): (Arc<dyn Clock>, IdSource) = if config.run.test_mode {
            (Arc::new(FixedClock::test_default()), IdSource::seeded(config.run.id_seed))
        } else {
            (Arc::new(SystemClock), IdSource::Random)
        };
        Pipeline { config, clock, ids }
    }

    pub fn lock(&self) -> Result<WorkLock, PipelineError> {
        WorkLock::acquire(&self.config.lock_path())
    }

    pub fn gen_seeds(&self) -> Result<GenSeedsSummary, PipelineError> {
        let p = &self.config.paths;
        require(&p.patterns)?;
        require(&p.species)?;
        let patterns = seeds::load_patterns(&p.patterns)?;
        let species = seeds::load_species(&p.species)?;
        if species.is_empty() {
            tracing::warn!("species file {} is empty; no seeds generated", p.species.display());
        }
        let keywords = seeds::expand_keywords(&species);
        let set = seeds::generate_seeds(&patterns, &keywords);
        let path = self.config.seeds_path();
        std::fs::create_dir_all(&p.work_dir).map_err(|e| PipelineError::io(&p.work_dir, e))?;
        let file = File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        set.write_to(&mut w).map_err(|e| PipelineError::io(&path, e))?;
        w.flush().map_err(|e| PipelineError::io(&path, e))?;
        Ok(GenSeedsSummary {
            patterns: patterns.len(),
            keywords: keywords.len(),
            seeds: set.len(),
            skipped: set.skipped.len(),
            path,
        })
    }

    pub async fn crawl(&self) -> Result<CrawlSummary, PipelineError> {
        let seeds_path = self.config.seeds_path();
        require(&seeds_path)?;
        let text = std::fs::read_to_string(&seeds_path).map_err(|e| PipelineError::io(&seeds_path, e))?;
        let seed_urls = seeds::read_seed_lines(&text);
        let store_path = self.config.page_store_path();
        let previous: Vec<_> = if store_path.exists() {
            PageStoreReader::open(&store_path)?
                .filter_map(|r| match r {
                    Ok(p) => Some(p),
                    Err(e) => {
                        tracing::warn!("page store: {e}");
                        None
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let crawler = Crawler::new(&seed_urls, self.config.crawl.clone(), self.clock.clone())?;
        let resumed = crawler.resume_from(&previous);
        let store = PageStore::open(&store_path)?;
        let report = crawler.run(&store).await?;
        Ok(CrawlSummary {
            stage: "crawl",
            seeds: seed_urls.len(),
            resumed_pages: resumed,
            domains: report.scope.len(),
            stats: report.stats,
        })
    }

    fn load_rules(&self) -> Result<HashMap<String, SelectorRuleSet>, PipelineError> {
        let dir = &self.config.paths.rules_dir;
        let mut out = HashMap::new();
        let Ok(entries) = std::fs::read_dir(dir) else {
            return Ok(out);
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            let rules = SelectorRuleSet::load(&p)?;
            out.insert(rules.domain.clone(), rules);
        }
        Ok(out)
    }

    pub fn extract(&self) -> Result<ExtractSummary, PipelineError> {
        let store_path = self.config.page_store_path();
        require(&store_path)?;
        let out_path = self.config.extracted_path();
        let mut done: HashSet<String> = read_jsonl::<ExtractedPage>(&out_path)?
            .into_iter()
            .map(|e| e.canonical)
            .collect();
        let rules = self.load_rules()?;
        let mut summary = ExtractSummary {
            stage: "extract",
            ..Default::default()
        };
        let mut fresh = Vec::new();
        for page in PageStoreReader::open(&store_path)? {
            let page = match page {
                Ok(p) => p,
                Err(StoreError::TruncatedTail { .. }) => break,
                Err(e) => return Err(e.into()),
            };
            summary.pages_read += 1;
            if !page.is_success() {
                summary.skipped_failed += 1;
                continue;
            }
            if !page.is_html() {
                summary.skipped_not_html += 1;
                continue;
            }
            let canonical = canonical_str(&page.final_url);
            if !done.insert(canonical.clone()) {
                summary.already_processed += 1;
                continue;
            }
            let domain = record_domain(&page.final_url);
            let page_rules = rules.get(&domain);
            let ex = extract_page(&page, page_rules);
            summary.pages_parsed += 1;
            summary.with_rules += usize::from(page_rules.is_some());
            summary.metadata_blocks_skipped += ex.skipped_metadata_blocks;
            summary.rule_misses += ex.rule_diagnostics.len();
            summary.price_conflicts += ex
                .fields
                .diagnostics
                .iter()
                .filter(|d| matches!(d, Diagnostic::PriceConflict { .. }))
                .count();
            fresh.push(ExtractedPage {
                url: page.final_url.clone(),
                canonical,
                retrieved: page.retrieved_at.trunc_subsecs(3),
                fields: ex.fields,
            });
        }
        append_jsonl(&out_path, &fresh)?;
        Ok(summary)
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.config.classify.retries.max(1),
            base_delay: Duration::from_millis(self.config.classify.retry_base_ms),
        }
    }

    /// Classifies extracted pages (or the records of a Parquet/JSONL file
    /// given as `input`) and appends them to the classified file.
    pub async fn classify(&self, input: Option<&Path>) -> Result<ClassifySummary, PipelineError> {
        let cfg = &self.config.classify;
        let labels = self.config.labels()?;
        let backend = Backend::from_spec(&cfg.backend, Duration::from_millis(cfg.timeout_ms))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let relevant: HashSet<String> = cfg.relevant_labels.iter().cloned().collect();

        let records: Vec<(String, AdRecord, String)> = match input {
            None => {
                let path = self.config.extracted_path();
                require(&path)?;
                read_jsonl::<ExtractedPage>(&path)?
                    .into_iter()
                    .map(|e| {
                        let text = match cfg.attribute {
                            TextAttribute::Product => e.fields.product.clone().or(e.fields.title.clone()),
                            TextAttribute::Title => e.fields.title.clone(),
                            TextAttribute::Text => Some(e.fields.text.clone()),
                        }
                        .unwrap_or_default();
                        let rec = self.unannotated(&e);
                        (e.canonical, rec, text)
                    })
                    .collect()
            }
            Some(path) => {
                require(path)?;
                self.read_records(path)?
                    .into_iter()
                    .map(|r| {
                        let text = match cfg.attribute {
                            TextAttribute::Product => r.product.clone(),
                            TextAttribute::Title => r.title.clone().unwrap_or_default(),
                            TextAttribute::Text => r.text.clone(),
                        };
                        (canonical_str(&r.url), r, text)
                    })
                    .collect()
            }
        };

        let out_path = self.config.classified_path();
        let mut done: HashSet<String> = read_jsonl::<ClassifiedRecord>(&out_path)?
            .into_iter()
            .map(|c| canonical_str(&c.record.url))
            .collect();
        let mut summary = ClassifySummary {
            stage: "classify",
            input: records.len(),
            ..Default::default()
        };
        let mut todo = Vec::new();
        for (canonical, rec, text) in records {
            if done.insert(canonical) {
                todo.push((rec, text));
            } else {
                summary.already_processed += 1;
            }
        }
        let texts: Vec<String> = todo.iter().map(|(_, t)| t.clone()).collect();
        let annotations = annotate_all(texts, &labels, &backend, self.retry_policy(), cfg.concurrency).await;
        let mut out = Vec::with_capacity(todo.len());
        for ((mut rec, _), a) in todo.into_iter().zip(annotations) {
            rec.zero_shot_label = a.label;
            rec.zero_shot_prob = a.prob;
            let rel = is_relevant(&rec, &relevant, cfg.min_prob);
            if rec.zero_shot_label == crate::classify::UNCLASSIFIED {
                summary.unclassified += 1;
            } else {
                summary.classified += 1;
            }
            summary.relevant += usize::from(rel);
            *summary.label_counts.entry(rec.zero_shot_label.clone()).or_default() += 1;
            out.push(ClassifiedRecord {
                relevant: rel,
                record: rec,
            });
        }
        append_jsonl(&out_path, &out)?;
        Ok(summary)
    }

    /// Record for an extracted page before classification.
    fn unannotated(&self, e: &ExtractedPage) -> AdRecord {
        let f = &e.fields;
        AdRecord {
            url: e.url.clone(),
            title: f.title.clone(),
            text: f.text.clone(),
            product: f.product.clone().or(f.title.clone()).unwrap_or_default(),
            description: f.description.clone(),
            domain: record_domain(&e.url),
            image: f.image.clone(),
            retrieved: e.retrieved,
            category: f.category.clone(),
            production_date: f.production_date.clone(),
            price: f.price.map(store_price),
            currency: f.currency.clone(),
            seller: f.seller.clone(),
            seller_type: f.seller_type.clone(),
            location: f.location.clone(),
            zero_shot_label: String::new(),
            zero_shot_prob: 0.0,
            id: self.ids.id_for(&e.canonical).to_string(),
        }
    }

    /// Records from a Parquet file, a directory of Parquet files, or a
    /// classified JSONL file.
    pub fn read_records(&self, path: &Path) -> Result<Vec<AdRecord>, PipelineError> {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = walk_parquet(path).map_err(|e| PipelineError::io(path, e))?;
            files.sort();
            let mut out = Vec::new();
            for f in files {
                out.extend(sink::read_batch(&f)?.0);
            }
            return Ok(out);
        }
        if path.extension().is_some_and(|x| x == "parquet") {
            return Ok(sink::read_batch(path)?.0);
        }
        Ok(read_jsonl::<ClassifiedRecord>(path)?
            .into_iter()
            .map(|c| c.record)
            .collect())
    }

    /// Writes relevant, not yet exported records as Parquet partitions and
    /// uploads them when a bucket is configured.
    pub async fn sink(&self) -> Result<SinkSummary, PipelineError> {
        let in_path = self.config.classified_path();
        require(&in_path)?;
        let ledger_path = self.config.sink_ledger_path();
        let mut done: HashSet<String> = match std::fs::read_to_string(&ledger_path) {
            Ok(s) => s.lines().map(str::to_string).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => HashSet::new(),
            Err(e) => return Err(PipelineError::io(&ledger_path, e)),
        };
        let mut summary = SinkSummary {
            stage: "sink",
            ..Default::default()
        };
        let mut fresh: Vec<AdRecord> = Vec::new();
        for c in read_jsonl::<ClassifiedRecord>(&in_path)? {
            if !c.relevant {
                continue;
            }
            summary.relevant_records += 1;
            if done.insert(canonical_str(&c.record.url)) {
                fresh.push(c.record);
            } else {
                summary.already_processed += 1;
            }
        }
        fresh.sort_by(|a, b| a.retrieved.cmp(&b.retrieved).then_with(|| a.url.cmp(&b.url)));

        let mut by_date: BTreeMap<chrono::NaiveDate, Vec<AdRecord>> = BTreeMap::new();
        for r in fresh {
            by_date.entry(r.retrieved.date_naive()).or_default().push(r);
        }

        let store = self.object_store()?;
        let root = &self.config.paths.output;
        let template = &self.config.store.partition_template;
        for (date, records) in by_date {
            let mut part = 0;
            let key = loop {
                let k = partition_key(template, date, part);
                if !root.join(&k).exists() {
                    break k;
                }
                part += 1;
            };
            let Some(manifest) = sink::write_batch(&records, root, &key, self.clock.now())? else {
                continue;
            };
            if let Some(store) = &store {
                let bytes = std::fs::read(root.join(&key)).map_err(|e| PipelineError::io(&root.join(&key), e))?;
                if let Err(source) = store.put_object(&key, &bytes).await {
                    return Err(PipelineError::Upload {
                        stage: "sink",
                        processed: summary.written,
                        failed: records.len(),
                        source,
                    });
                }
                summary.uploaded += 1;
            }
            let lines: String = records
                .iter()
                .map(|r| canonical_str(&r.url) + "\n")
                .collect();
            let mut ledger = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&ledger_path)
                .map_err(|e| PipelineError::io(&ledger_path, e))?;
            ledger
                .write_all(lines.as_bytes())
                .map_err(|e| PipelineError::io(&ledger_path, e))?;
            summary.written += manifest.record_count;
            summary.files.push(manifest);
        }
        Ok(summary)
    }

    fn object_store(&self) -> Result<Option<ObjectStore>, PipelineError> {
        let s = &self.config.store;
        let Some(bucket) = &s.bucket else {
            return Ok(None);
        };
        let env = |k: &str| std::env::var(k).ok();
        let pick = |v: &Option<String>, var: &str| {
            v.clone()
                .or_else(|| env(var))
                .ok_or_else(|| ConfigError::Invalid(format!("store.bucket is set but {var} is not")))
        };
        let settings = StoreSettings {
            endpoint: pick(&s.endpoint, sink::s3::ENV_ENDPOINT)?,
            bucket: bucket.clone(),
            region: s.region.clone(),
            access_key: pick(&s.access_key, sink::s3::ENV_ACCESS_KEY)?,
            secret_key: pick(&s.secret_key, sink::s3::ENV_SECRET_KEY)?,
        };
        ObjectStore::new(&settings)
            .map(Some)
            .map_err(|e| ConfigError::Invalid(e.to_string()).into())
    }

    /// Trains a rule set from `examples_dir`, whose subdirectories each hold
    /// `page.html` and `expected.json` (field → exact value).
    pub fn induce(&self, domain: &str, examples_dir: &Path) -> Result<InduceSummary, PipelineError> {
        require(examples_dir)?;
        let examples = load_examples(domain, examples_dir)?;
        let induction = induce_rules(&examples, self.clock.now())?;
        let dir = &self.config.paths.rules_dir;
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        let path = dir.join(format!("{}.json", induction.rules.domain));
        induction.rules.save(&path).map_err(|e| PipelineError::io(&path, e))?;
        Ok(InduceSummary {
            stage: "induce",
            domain: induction.rules.domain.clone(),
            examples: examples.len(),
            fields: induction.rules.rules.keys().cloned().collect(),
            diagnostics: induction.diagnostics,
            path,
        })
    }

    /// Label distribution over all records, plus the `top_k` domains among
    /// records labelled with one of `domain_labels` (default: the relevant
    /// labels).
    pub fn report(
        &self,
        input: Option<&Path>,
        domain_labels: Option<Vec<String>>,
        top_k: usize,
    ) -> Result<Report, PipelineError> {
        let path = input.map(Path::to_path_buf).unwrap_or_else(|| self.config.classified_path());
        let records = if path.exists() {
            self.read_records(&path)?
        } else if input.is_some() {
            return Err(PipelineError::MissingInput(path));
        } else {
            Vec::new()
        };
        let labels = self.config.labels()?;
        let distribution = label_distribution(records.iter().map(|r| r.zero_shot_label.as_str()), &labels);
        let domain_labels = domain_labels.unwrap_or_else(|| self.config.classify.relevant_labels.clone());
        let filter: HashSet<String> = domain_labels.iter().cloned().collect();
        let top = top_domains(
            records.iter().map(|r| (r.domain.as_str(), r.zero_shot_label.as_str())),
            &filter,
            top_k,
        );
        Ok(Report {
            distribution,
            top_domains: top,
            domain_labels,
        })
    }
}

fn walk_parquet(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            out.extend(walk_parquet(&p)?);
        } else if p.extension().is_some_and(|x| x == "parquet") {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn load_examples(domain: &str, dir: &Path) -> Result<Vec<TrainingExample>, PipelineError> {
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for sub in subdirs {
        let html_path = sub.join("page.html");
        let expected_path = sub.join("expected.json");
        if !html_path.exists() || !expected_path.exists() {
            continue;
        }
        let body = std::fs::read(&html_path).map_err(|e| PipelineError::io(&html_path, e))?;
        let expected_text =
            std::fs::read_to_string(&expected_path).map_err(|e| PipelineError::io(&expected_path, e))?;
        let expected: BTreeMap<String, String> =
            serde_json::from_str(&expected_text).map_err(|e| PipelineError::BadLine {
                path: expected_path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
        let name = sub.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let url = format!("https://{domain}/{name}");
        out.push(TrainingExample {
            page: parse_html(&url, &body, None),
            expected,
        });
    }
    Ok(out)
}
