//! Mock zero-shot inference endpoint speaking the classifier's wire format:
//! a JSON request `{text, hypothesis_template, candidate_labels}` answered by
//! `{labels, scores}` sorted by score, as hosted NLI pipelines do.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use adtrace_core::classify::ZeroShotRequest;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::json;

use crate::{serve, Running};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    /// Pseudo-random scores derived from the text and label.
    Hashed,
    /// Equal scores for every label.
    Uniform,
    /// 503 for the first `n` requests, then `Hashed`.
    FailFirst(usize),
    /// Scores that do not sum to one.
    BadSum,
    /// A label that was not requested.
    UnknownLabel,
}

struct ZsState {
    behavior: Behavior,
    requests: AtomicUsize,
}

/// Scores in (0, 1] for each label, normalized to sum to one.
pub fn hashed_scores(text: &str, labels: &[String]) -> Vec<f64> {
    let raw: Vec<f64> = labels
        .iter()
        .map(|l| {
            let mut h = DefaultHasher::new();
            (text, l).hash(&mut h);
            (h.finish() % 1000 + 1) as f64
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / sum).collect()
}

async fn classify(State(state): State<Arc<ZsState>>, Json(req): Json<ZeroShotRequest>) -> Response {
    let n = state.requests.fetch_add(1, Ordering::SeqCst);
    let labels = req.candidate_labels.clone();
    let scores = match state.behavior {
        Behavior::FailFirst(k) if n < k => {
            return (StatusCode::SERVICE_UNAVAILABLE, "warming up").into_response();
        }
        Behavior::Uniform => vec![1.0 / labels.len() as f64; labels.len()],
        Behavior::BadSum => vec![0.5; labels.len()],
        Behavior::UnknownLabel => {
            return Json(json!({ "labels": ["a unicorn"], "scores": [1.0] })).into_response();
        }
        _ => hashed_scores(&req.text, &labels),
    };
    let mut pairs: Vec<(String, f64)> = labels.into_iter().zip(scores).collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (labels, scores): (Vec<String>, Vec<f64>) = pairs.into_iter().unzip();
    Json(json!({ "labels": labels, "scores": scores })).into_response()
}

pub struct ZeroShotServer {
    pub running: Running,
    state: Arc<ZsState>,
}

impl ZeroShotServer {
    pub async fn start(behavior: Behavior) -> Self {
        let state = Arc::new(ZsState {
            behavior,
            requests: AtomicUsize::new(0),
        });
        let router = Router::new().route("/", post(classify)).with_state(state.clone());
        ZeroShotServer {
            running: serve(router).await,
            state,
        }
    }

    /// Endpoint URL for the classifier backend setting.
    pub fn url(&self) -> String {
        format!("{}/", self.running.base_url())
    }

    pub fn request_count(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }
}
