//! Zero-shot relevance classification over a fixed hypothesis and label set.

use std::collections::HashSet;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HYPOTHESIS_TEMPLATE: &str = "This product advertisement is about {}.";

/// Annotation for records the backend could not classify.
pub const UNCLASSIFIED: &str = "__unclassified__";

pub const DEFAULT_LABELS: [&str; 7] = [
    "a real animal",
    "a toy",
    "a print of an animal",
    "an object",
    "a faux animal",
    "an animal body part",
    "a faux animal body part",
];

pub fn default_label_set() -> Vec<String> {
    DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()
}

/// Tolerance on the backend's probability sum before renormalization.
pub const BACKEND_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("protocol error: {message}")]
    Protocol { message: String, payload: String },
}

impl ClassifyError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ClassifyError::Transport(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRequest {
    pub text: String,
    pub hypothesis_template: String,
    pub candidate_labels: Vec<String>,
}

impl ZeroShotRequest {
    pub fn new(text: impl Into<String>, labels: &[String]) -> Result<Self, ClassifyError> {
        let req = ZeroShotRequest {
            text: text.into(),
            hypothesis_template: HYPOTHESIS_TEMPLATE.to_string(),
            candidate_labels: labels.to_vec(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: &str| Err(ClassifyError::InvalidRequest(m.to_string()));
        if self.candidate_labels.is_empty() {
            return bad("no candidate labels");
        }
        let distinct: HashSet<&String> = self.candidate_labels.iter().collect();
        if distinct.len() != self.candidate_labels.len() {
            return bad("duplicate candidate labels");
        }
        if self.hypothesis_template.matches("{}").count() != 1 {
            return bad("hypothesis template must contain {} exactly once");
        }
        if self.text.trim().is_empty() {
            return bad("empty text");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// Descending by probability; ties keep candidate order.
    pub scores: Vec<LabelScore>,
    pub top_label: String,
    pub top_prob: f64,
}

impl ClassificationResult {
    /// Normalizes non-negative raw scores given in candidate order.
    pub fn from_raw(labels: &[String], raw: &[f64]) -> Self {
        let sum: f64 = raw.iter().sum();
        let mut scores: Vec<LabelScore> = labels
            .iter()
            .zip(raw)
            .map(|(l, r)| LabelScore {
                label: l.clone(),
                prob: if sum > 0.0 { r / sum } else { 1.0 / labels.len() as f64 },
            })
            .collect();
        // stable: equal probabilities stay in candidate order
        scores.sort_by(|a, b| b.prob.total_cmp(&a.prob));
        let top = &scores[0];
        ClassificationResult {
            top_label: top.label.clone(),
            top_prob: top.prob,
            scores,
        }
    }

    pub fn prob_of(&self, label: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.label == label).map(|s| s.prob)
    }
}

// -------------------------------------------------------------- baseline

const STOPWORDS: &[&str] = &["a", "an", "the", "of", "and", "or", "for", "about", "is", "to", "in"];

/// Keyword lexicon of a label. The seven default labels have curated
/// lists; any other label uses its own non-stopword words.
pub fn lexicon(label: &str) -> Vec<String> {
    let curated: &[&str] = match label {
        "a real animal" => &[
            "live", "alive", "living", "pet", "pets", "breeder", "bred", "captive", "hatchling",
            "juvenile", "cub", "cubs", "chick", "chicks", "puppy", "kitten",
        ],
        "a toy" => &["plush", "stuffed", "toy", "toys", "figurine", "doll", "puppet", "playset"],
        "a print of an animal" => &[
            "print", "prints", "poster", "postcard", "painting", "canvas", "photo", "photograph",
            "lithograph", "engraving", "sticker",
        ],
        "an object" => &[
            "mug", "vase", "statue", "sculpture", "ornament", "carving", "carved", "crystal",
            "keychain", "lamp", "decor", "bowl", "cup",
        ],
        "a faux animal" => &["artificial", "lifelike", "realistic", "simulated", "animatronic", "decoy", "model"],
        "an animal body part" => &[
            "claw", "claws", "skin", "skins", "pelt", "fur", "hide", "skull", "skulls", "bone",
            "bones", "ivory", "taxidermy", "tooth", "teeth", "tusk", "horn", "horns", "feather",
            "feathers", "rug", "scale", "scales", "shell", "mount", "mounted", "trophy", "antler",
            "antlers",
        ],
        "a faux animal body part" => &[
            "faux", "fake", "replica", "imitation", "synthetic", "resin", "reproduction", "cast",
        ],
        other => {
            return tokens(other)
                .filter(|t| !STOPWORDS.contains(&t.as_str()))
                .collect();
        }
    };
    curated.iter().map(|s| s.to_string()).collect()
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Deterministic offline classifier: each label scores one plus the number
/// of text tokens found in its lexicon.
pub fn baseline_classify(req: &ZeroShotRequest) -> ClassificationResult {
    let words: Vec<String> = tokens(&req.text).collect();
    let raw: Vec<f64> = req
        .candidate_labels
        .iter()
        .map(|label| {
            let lex: HashSet<String> = lexicon(label).into_iter().collect();
            1.0 + words.iter().filter(|w| lex.contains(*w)).count() as f64
        })
        .collect();
    ClassificationResult::from_raw(&req.candidate_labels, &raw)
}

// ---------------------------------------------------------------- backend

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendReply {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

/// Checks a backend reply against the request and renormalizes it.
pub fn validate_reply(req: &ZeroShotRequest, payload: &str) -> Result<ClassificationResult, ClassifyError> {
    let protocol = |message: String| ClassifyError::Protocol {
        message,
        payload: payload.to_string(),
    };
    let reply: BackendReply =
        serde_json::from_str(payload).map_err(|e| protocol(format!("schema mismatch: {e}")))?;
    if reply.labels.len() != reply.scores.len() {
        return Err(protocol("labels and scores differ in length".into()));
    }
    let mut raw = vec![None; req.candidate_labels.len()];
    for (label, score) in reply.labels.iter().zip(&reply.scores) {
        let Some(pos) = req.candidate_labels.iter().position(|l| l == label) else {
            return Err(protocol(format!("unknown label {label:?}")));
        };
        if !score.is_finite() || *score < 0.0 || *score > 1.0 {
            return Err(protocol(format!("invalid score {score} for {label:?}")));
        }
        if raw[pos].replace(*score).is_some() {
            return Err(protocol(format!("duplicate label {label:?}")));
        }
    }
    if let Some(pos) = raw.iter().position(Option::is_none) {
        return Err(protocol(format!("missing label {:?}", req.candidate_labels[pos])));
    }
    let raw: Vec<f64> = raw.into_iter().map(Option::unwrap).collect();
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > BACKEND_SUM_TOLERANCE {
        return Err(protocol(format!("scores sum to {sum}")));
    }
    Ok(ClassificationResult::from_raw(&req.candidate_labels, &raw))
}

#[derive(Debug, Clone)]
pub enum Backend {
    Baseline,
    Http { client: reqwest::Client, url: String },
}

impl Backend {
    /// `baseline` or an HTTP(S) endpoint URL.
    pub fn from_spec(spec: &str, timeout: Duration) -> Result<Self, ClassifyError> {
        if spec == "baseline" {
            return Ok(Backend::Baseline);
        }
        let url = url::Url::parse(spec).map_err(|e| ClassifyError::InvalidRequest(format!("backend {spec}: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(ClassifyError::InvalidRequest(format!("backend {spec}: not an HTTP URL")));
        }
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClassifyError::Transport(e.to_string()))?;
        Ok(Backend::Http {
            client,
            url: spec.to_string(),
        })
    }
}

/// One backend call, validated.
pub async fn classify(req: &ZeroShotRequest, backend: &Backend) -> Result<ClassificationResult, ClassifyError> {
    req.validate()?;
    match backend {
        Backend::Baseline => Ok(baseline_classify(req)),
        Backend::Http { client, url } => {
            let resp = client
                .post(url)
                .json(req)
                .send()
                .await
                .map_err(|e| ClassifyError::Transport(e.to_string()))?;
            let status = resp.status();
            let body = resp
                .text()
                .await
                .map_err(|e| ClassifyError::Transport(e.to_string()))?;
            if status.is_server_error() {
                return Err(ClassifyError::Transport(format!("backend returned {status}")));
            }
            if status != reqwest::StatusCode::OK {
                return Err(ClassifyError::Protocol {
                    message: format!("backend returned {status}"),
                    payload: body,
                });
            }
            validate_reply(req, &body)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

/// Label and probability stored on a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: String,
    pub prob: f64,
}

impl Annotation {
    pub fn unclassified() -> Self {
        Annotation {
            label: UNCLASSIFIED.to_string(),
            prob: 0.0,
        }
    }
}

/// Classifies with retries on transport failures. Failures that remain
/// become the unclassified annotation rather than an error.
pub async fn annotate(text: &str, labels: &[String], backend: &Backend, retry: RetryPolicy) -> Annotation {
    let req = match ZeroShotRequest::new(text, labels) {
        Ok(r) => r,
        Err(e) => {
            tracing::debug!("not classifiable: {e}");
            return Annotation::unclassified();
        }
    };
    let mut delay = retry.base_delay;
    for attempt in 1..=retry.attempts.max(1) {
        match classify(&req, backend).await {
            Ok(r) => {
                return Annotation {
                    label: r.top_label,
                    prob: r.top_prob,
                }
            }
            Err(e) if e.is_retryable() && attempt < retry.attempts => {
                tracing::debug!("classifier attempt {attempt} failed: {e}");
                tokio::time::sleep(delay).await;
                delay *= 2;
            }
            Err(e) => {
                tracing::warn!("classification failed: {e}");
                break;
            }
        }
    }
    Annotation::unclassified()
}

/// Annotates texts with at most `concurrency` requests in flight, keeping
/// input order.
pub async fn annotate_all(
    texts: Vec<String>,
    labels: &[String],
    backend: &Backend,
    retry: RetryPolicy,
    concurrency: usize,
) -> Vec<Annotation> {
    stream::iter(texts)
        .map(|t| async move { annotate(&t, labels, backend, retry).await })
        .buffered(concurrency.max(1))
        .collect()
        .await
}

/// Anything carrying a classifier annotation.
pub trait Annotated {
    fn zero_shot_label(&self) -> &str;
    fn zero_shot_prob(&self) -> f64;
}

pub fn is_relevant<T: Annotated>(record: &T, relevant: &HashSet<String>, min_prob: f64) -> bool {
    relevant.contains(record.zero_shot_label()) && record.zero_shot_prob() >= min_prob
}

pub fn filter_records<'a, T: Annotated + 'a, I: IntoIterator<Item = T> + 'a>(
    records: I,
    relevant: &'a HashSet<String>,
    min_prob: f64,
) -> impl Iterator<Item = T> + 'a {
    records
        .into_iter()
        .filter(move |r| is_relevant(r, relevant, min_prob))
}
