//! In-memory S3-compatible server with path-style addressing and presigned
//! query authentication. Only the access key is checked; signatures are
//! required to be present but not verified.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::put;
use axum::Router;

use crate::{serve, Running};

struct S3State {
    access_key: String,
    buckets: HashSet<String>,
    objects: Mutex<BTreeMap<(String, String), Vec<u8>>>,
}

fn error(status: StatusCode, code: &str) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/xml")],
        format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?><Error><Code>{code}</Code><Message>{code}</Message></Error>"),
    )
        .into_response()
}

/// The S3 error to answer with, if any.
fn check(state: &S3State, bucket: &str, q: &HashMap<String, String>) -> Result<(), (StatusCode, &'static str)> {
    let key = q
        .get("X-Amz-Credential")
        .and_then(|c| c.split('/').next())
        .unwrap_or("");
    if key != state.access_key {
        return Err((StatusCode::FORBIDDEN, "InvalidAccessKeyId"));
    }
    if !q.contains_key("X-Amz-Signature") {
        return Err((StatusCode::FORBIDDEN, "AccessDenied"));
    }
    if !state.buckets.contains(bucket) {
        return Err((StatusCode::NOT_FOUND, "NoSuchBucket"));
    }
    Ok(())
}

fn etag(body: &[u8]) -> String {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    body.hash(&mut h);
    format!("\"{:016x}\"", h.finish())
}

async fn put_object(
    State(state): State<Arc<S3State>>,
    Path((bucket, key)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> Response {
    if let Err((status, code)) = check(&state, &bucket, &q) {
        return error(status, code);
    }
    let tag = etag(&body);
    state.objects.lock().unwrap().insert((bucket, key), body.to_vec());
    (StatusCode::OK, [(header::ETAG, tag)]).into_response()
}

async fn get_object(
    State(state): State<Arc<S3State>>,
    Path((bucket, key)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    if let Err((status, code)) = check(&state, &bucket, &q) {
        return error(status, code);
    }
    match state.objects.lock().unwrap().get(&(bucket, key)) {
        Some(body) => (StatusCode::OK, [(header::ETAG, etag(body))], body.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, "NoSuchKey"),
    }
}

pub struct S3Server {
    pub running: Running,
    state: Arc<S3State>,
}

impl S3Server {
    pub async fn start(access_key: &str, buckets: &[&str]) -> Self {
        let state = Arc::new(S3State {
            access_key: access_key.to_string(),
            buckets: buckets.iter().map(|b| b.to_string()).collect(),
            objects: Mutex::new(BTreeMap::new()),
        });
        let router = Router::new()
            .route("/{bucket}/{*key}", put(put_object).get(get_object))
            .with_state(state.clone());
        S3Server {
            running: serve(router).await,
            state,
        }
    }

    pub fn endpoint(&self) -> String {
        self.running.base_url()
    }

    pub fn object(&self, bucket: &str, key: &str) -> Option<Vec<u8>> {
        self.state
            .objects
            .lock()
            .unwrap()
            .get(&(bucket.to_string(), key.to_string()))
            .cloned()
    }

    pub fn keys(&self, bucket: &str) -> Vec<String> {
        self.state
            .objects
            .lock()
            .unwrap()
            .keys()
            .filter(|(b, _)| b == bucket)
            .map(|(_, k)| k.clone())
            .collect()
    }
}
