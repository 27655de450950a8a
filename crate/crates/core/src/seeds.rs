//! Seed generation: marketplace search-form templates crossed with species
//! keywords.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

/// Literal token replaced by the encoded keyword in a template.
pub const PLACEHOLDER: &str = "KEYWORD";

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("species file: {0}")]
    Csv(#[from] csv::Error),
}

/// A site's search-form URL with a single `KEYWORD` slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePattern {
    pub domain: String,
    pub template: String,
}

impl SitePattern {
    pub fn new(domain: impl Into<String>, template: impl Into<String>) -> Result<Self, String> {
        let pattern = SitePattern {
            domain: domain.into().trim().to_string(),
            template: template.into().trim().to_string(),
        };
        pattern.validate()?;
        Ok(pattern)
    }

    fn validate(&self) -> Result<(), String> {
        if self.domain.is_empty() {
            return Err("empty domain".into());
        }
        match self.template.matches(PLACEHOLDER).count() {
            0 => return Err(format!("template lacks the {PLACEHOLDER} placeholder")),
            1 => {}
            n => return Err(format!("template contains {PLACEHOLDER} {n} times")),
        }
        let probe = self.template.replace(PLACEHOLDER, "x");
        let url = Url::parse(&probe).map_err(|e| format!("template is not a URL: {e}"))?;
        if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
            return Err("template is not an absolute http(s) URL".into());
        }
        Ok(())
    }

    /// Substitutes an already form-encoded keyword.
    pub fn fill(&self, encoded_keyword: &str) -> String {
        self.template.replacen(PLACEHOLDER, encoded_keyword, 1)
    }
}

/// Parses a patterns file body: `domain<TAB>template` per line, `#` comments.
pub fn parse_patterns(text: &str) -> Result<Vec<SitePattern>, SeedError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (domain, template) = raw.split_once('\t').ok_or_else(|| SeedError::Parse {
            line: line_no,
            message: "expected `domain<TAB>template`".into(),
        })?;
        let pattern = SitePattern::new(domain, template).map_err(|message| SeedError::Parse {
            line: line_no,
            message,
        })?;
        if !seen.insert((pattern.domain.clone(), pattern.template.clone())) {
            return Err(SeedError::Parse {
                line: line_no,
                message: format!("duplicate pattern for {}", pattern.domain),
            });
        }
        out.push(pattern);
    }
    Ok(out)
}

pub fn load_patterns(path: &Path) -> Result<Vec<SitePattern>, SeedError> {
    let text = read(path)?;
    parse_patterns(&text)
}

/// One species row: a scientific name plus zero or more English names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesEntry {
    pub scientific_name: String,
    pub english_names: Vec<String>,
}

#[derive(Deserialize)]
struct SpeciesRow {
    scientific_name: String,
    #[serde(default)]
    english_names: Option<String>,
}

/// Parses the species CSV (`scientific_name,english_names`, names `;`-separated).
pub fn parse_species(text: &str) -> Result<Vec<SpeciesEntry>, SeedError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (idx, row) in reader.deserialize::<SpeciesRow>().enumerate() {
        let row = row?;
        let scientific_name = row.scientific_name.trim().to_string();
        if scientific_name.is_empty() {
            return Err(SeedError::Parse {
                // header is line 1
                line: idx + 2,
                message: "empty scientific_name".into(),
            });
        }
        let english_names = row
            .english_names
            .unwrap_or_default()
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        out.push(SpeciesEntry {
            scientific_name,
            english_names,
        });
    }
    Ok(out)
}

pub fn load_species(path: &Path) -> Result<Vec<SpeciesEntry>, SeedError> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    parse_species(&text)
}

fn read(path: &Path) -> Result<String, SeedError> {
    fs::read_to_string(path).map_err(|source| SeedError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Scientific name followed by English names for each entry, deduplicated
/// case-insensitively. First-seen casing and order win.
pub fn expand_keywords(species: &[SpeciesEntry]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for entry in species {
        let names = std::iter::once(&entry.scientific_name).chain(entry.english_names.iter());
        for name in names {
            let name = collapse_whitespace(name);
            if name.is_empty() {
                continue;
            }
            if seen.insert(name.to_lowercase()) {
                out.push(name);
            }
        }
    }
    out
}

/// `application/x-www-form-urlencoded` encoding after whitespace collapsing.
pub fn encode_keyword(keyword: &str) -> String {
    url::form_urlencoded::byte_serialize(collapse_whitespace(keyword).as_bytes()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedUrl {
    pub url: String,
    pub domain: String,
    pub keyword: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSet {
    pub seeds: Vec<SeedUrl>,
    /// Keywords dropped because they encode to nothing.
    pub skipped: Vec<String>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.seeds.iter().map(|s| s.url.as_str())
    }

    /// One URL per line.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for seed in &self.seeds {
            writeln!(w, "{}", seed.url)?;
        }
        Ok(())
    }
}

/// Cross product of patterns and keywords, pattern-major. Exact duplicate
/// URLs are dropped, keeping the first.
pub fn generate_seeds(patterns: &[SitePattern], keywords: &[String]) -> SeedSet {
    let mut encoded = Vec::with_capacity(keywords.len());
    let mut skipped = Vec::new();
    for keyword in keywords {
        let enc = encode_keyword(keyword);
        if enc.is_empty() {
            tracing::warn!(keyword = %keyword, "keyword encodes to an empty string, skipped");
            skipped.push(keyword.clone());
        } else {
            encoded.push((keyword, enc));
        }
    }

    let mut seen = HashSet::new();
    let mut seeds = Vec::new();
    for pattern in patterns {
        for (keyword, enc) in &encoded {
            let url = pattern.fill(enc);
            if seen.insert(url.clone()) {
                seeds.push(SeedUrl {
                    url,
                    domain: pattern.domain.clone(),
                    keyword: (*keyword).clone(),
                });
            }
        }
    }
    SeedSet { seeds, skipped }
}

/// Reads a seed file (one URL per line; blanks and `#` lines ignored).
pub fn read_seed_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}
