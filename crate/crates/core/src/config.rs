//! Pipeline configuration: a TOML file whose string values may reference
//! environment variables as `${NAME}`.
//!
//! ```toml
//! [paths]
//! patterns = "data/patterns.tsv"
//! species = "data/species.csv"
//! work_dir = "work"
//! output = "out"
//!
//! [crawl]
//! min_delay_ms = 2000
//!
//! [classify]
//! backend = "baseline"
//! relevant_labels = ["a real animal", "an animal body part"]
//!
//! [store]
//! bucket = "ads"
//! endpoint = "${STORE_ENDPOINT}"
//! ```

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::default_label_set;
use crate::crawl::CrawlConfig;
use crate::sink::DEFAULT_PARTITION_TEMPLATE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("environment variable {0} is not set")]
    MissingVar(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub patterns: PathBuf,
    pub species: PathBuf,
    /// Intermediate files: seeds, page store, ledgers, stage outputs.
    pub work_dir: PathBuf,
    /// Trained rule sets, one `<domain>.json` per marketplace.
    pub rules_dir: PathBuf,
    /// Root for Parquet partitions.
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            patterns: "patterns.tsv".into(),
            species: "species.csv".into(),
            work_dir: "work".into(),
            rules_dir: "rules".into(),
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextAttribute {
    Product,
    Title,
    Text,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// `baseline` or the URL of a zero-shot inference endpoint.
    pub backend: String,
    pub attribute: TextAttribute,
    /// Candidate labels; `labels_file` (one per line) overrides.
    pub labels: Vec<String>,
    pub labels_file: Option<PathBuf>,
    pub relevant_labels: Vec<String>,
    pub min_prob: f64,
    pub concurrency: usize,
    pub timeout_ms: u64,
    pub retries: u32,
    pub retry_base_ms: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            backend: "baseline".into(),
            attribute: TextAttribute::Product,
            labels: default_label_set(),
            labels_file: None,
            relevant_labels: vec!["a real animal".into(), "an animal body part".into()],
            min_prob: 0.0,
            concurrency: 8,
            timeout_ms: 30_000,
            retries: 3,
            retry_base_ms: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    /// Upload is skipped when no bucket is configured.
    pub bucket: Option<String>,
    pub endpoint: Option<String>,
    pub region: String,
    pub access_key: Option<String>,
    pub secret_key: Option<String>,
    pub partition_template: String,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            bucket: None,
            endpoint: None,
            region: "us-east-1".into(),
            access_key: None,
            secret_key: None,
            partition_template: DEFAULT_PARTITION_TEMPLATE.into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Pins the clock and record ids for byte-reproducible runs.
    pub test_mode: bool,
    pub id_seed: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub crawl: CrawlConfig,
    pub classify: ClassifyConfig,
    pub store: StoreConfig,
    pub run: RunConfig,
}

static VAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

/// Replaces `${NAME}` with the variable's value; `$${` escapes a literal `${`.
pub fn interpolate(s: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    const ESCAPE: &str = "\u{0}ESC\u{0}";
    let escaped = s.replace("$${", ESCAPE);
    let mut missing = None;
    let out = VAR.replace_all(&escaped, |c: &regex::Captures<'_>| match lookup(&c[1]) {
        Some(v) => v,
        None => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(ConfigError::MissingVar(name)),
        None => Ok(out.replace(ESCAPE, "${")),
    }
}

fn interpolate_value(v: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
    match v {
        toml::Value::String(s) => *s = interpolate(s, lookup)?,
        toml::Value::Array(a) => {
            for x in a {
                interpolate_value(x, lookup)?;
            }
        }
        toml::Value::Table(t) => {
            for (_, x) in t.iter_mut() {
                interpolate_value(x, lookup)?;
            }
        }
        _ => {}
    }
    Ok(())
}

impl PipelineConfig {
    pub fn parse(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        interpolate_value(&mut value, lookup)?;
        let cfg: PipelineConfig = value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text, &|k| std::env::var(k).ok())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.patterns);
        fix(&mut self.paths.species);
        fix(&mut self.paths.work_dir);
        fix(&mut self.paths.rules_dir);
        fix(&mut self.paths.output);
        if let Some(p) = self.classify.labels_file.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.crawl.validate().map_err(ConfigError::Invalid)?;
        let c = &self.classify;
        if !(0.0..=1.0).contains(&c.min_prob) {
            return bad(format!("classify.min_prob must be in [0, 1], got {}", c.min_prob));
        }
        if c.concurrency == 0 || c.concurrency > 1024 {
            return bad("classify.concurrency must be in 1..=1024".into());
        }
        if c.timeout_ms == 0 {
            return bad("classify.timeout_ms must be positive".into());
        }
        if c.labels_file.is_none() {
            if c.labels.is_empty() {
                return bad("classify.labels is empty".into());
            }
            for r in &c.relevant_labels {
                if !c.labels.contains(r) {
                    return bad(format!("relevant label {r:?} is not a candidate label"));
                }
            }
        }
        let t = &self.store.partition_template;
        if !t.contains("{part}") || t.starts_with('/') {
            return bad("store.partition_template must be relative and contain {part}".into());
        }
        Ok(())
    }

    /// Candidate labels, from `labels_file` when set.
    pub fn labels(&self) -> Result<Vec<String>, ConfigError> {
        let Some(path) = &self.classify.labels_file else {
            return Ok(self.classify.labels.clone());
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let labels: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        if labels.is_empty() {
            return Err(ConfigError::Invalid(format!("{}: no labels", path.display())));
        }
        for r in &self.classify.relevant_labels {
            if !labels.contains(r) {
                return Err(ConfigError::Invalid(format!("relevant label {r:?} is not a candidate label")));
            }
        }
        Ok(labels)
    }

    pub fn seeds_path(&self) -> PathBuf {
        self.paths.work_dir.join("seeds.txt")
    }

    pub fn page_store_path(&self) -> PathBuf {
        self.paths.work_dir.join("pages.store")
    }

    pub fn extracted_path(&self) -> PathBuf {
        self.paths.work_dir.join("extracted.jsonl")
    }

    pub fn classified_path(&self) -> PathBuf {
        self.paths.work_dir.join("classified.jsonl")
    }

    pub fn sink_ledger_path(&self) -> PathBuf {
        self.paths.work_dir.join("sunk.ledger")
    }

    pub fn lock_path(&self) -> PathBuf {
        self.paths.work_dir.join(".lock")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(k: &str) -> Option<String> {
        match k {
            "STORE_ENDPOINT" => Some("http://127.0.0.1:9000".into()),
            _ => None,
        }
    }

    #[test]
    fn defaults_and_interpolation() {
        let cfg = PipelineConfig::parse(
            r#"
            [store]
            bucket = "ads"
            endpoint = "${STORE_ENDPOINT}"
            [crawl]
            min_delay_ms = 10
            "#,
            &env,
        )
        .unwrap();
        assert_eq!(cfg.store.endpoint.as_deref(), Some("http://127.0.0.1:9000"));
        assert_eq!(cfg.crawl.min_delay_ms, 10);
        assert_eq!(cfg.crawl.workers, CrawlConfig::default().workers);
        assert_eq!(cfg.classify.labels.len(), 7);
    }

    #[test]
    fn missing_variable() {
        let err = PipelineConfig::parse("[store]\naccess_key = \"${NOPE}\"", &env).unwrap_err();
        assert!(matches!(err, ConfigError::MissingVar(v) if v == "NOPE"));
        assert_eq!(interpolate("a$${b}", &env).unwrap(), "a${b}");
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[classify]\nmin_prob = 1.5",
            "[classify]\nrelevant_labels = [\"a unicorn\"]",
            "[classify]\nconcurrency = 0",
            "[crawl]\nworkers = 0",
            "[paths]\nunknown = 1",
            "[store]\npartition_template = \"ads/x.parquet\"",
            "not toml =",
        ] {
            assert!(PipelineConfig::parse(text, &env).is_err(), "{text}");
        }
    }

    #[test]
    fn rebase_relative_paths() {
        let mut cfg = PipelineConfig::default();
        cfg.rebase(Path::new("/etc/adtrace"));
        assert_eq!(cfg.paths.work_dir, PathBuf::from("/etc/adtrace/work"));
    }
}
