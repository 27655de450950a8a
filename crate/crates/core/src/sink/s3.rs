//! Minimal S3-compatible object client: presigned SigV4 requests with
//! path-style addressing.

use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use rusty_s3::{Bucket, Credentials, S3Action, UrlStyle};
use thiserror::Error;
use url::Url;

pub const ENV_ENDPOINT: &str = "STORE_ENDPOINT";
pub const ENV_ACCESS_KEY: &str = "STORE_ACCESS_KEY";
pub const ENV_SECRET_KEY: &str = "STORE_SECRET_KEY";

const PRESIGN_TTL: Duration = Duration::from_secs(15 * 60);

#[derive(Debug, Error)]
pub enum ObjectStoreError {
    #[error("invalid store configuration: {0}")]
    Config(String),
    #[error("bucket {0} does not exist")]
    MissingBucket(String),
    #[error("object {0} does not exist")]
    MissingKey(String),
    #[error("access denied ({code})")]
    Auth { code: String },
    #[error("store returned {status} {code}")]
    Http { status: u16, code: String },
    #[error("store unreachable: {0}")]
    Transport(String),
}

impl ObjectStoreError {
    fn retryable(&self) -> bool {
        match self {
            ObjectStoreError::Transport(_) => true,
            ObjectStoreError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoreSettings {
    pub endpoint: String,
    pub bucket: String,
    pub region: String,
    pub access_key: String,
    pub secret_key: String,
}

impl StoreSettings {
    /// Endpoint and credentials from `STORE_*` environment variables.
    pub fn from_env(bucket: &str, region: &str) -> Result<Self, ObjectStoreError> {
        let var = |k: &str| std::env::var(k).map_err(|_| ObjectStoreError::Config(format!("{k} is not set")));
        Ok(StoreSettings {
            endpoint: var(ENV_ENDPOINT)?,
            bucket: bucket.to_string(),
            region: region.to_string(),
            access_key: var(ENV_ACCESS_KEY)?,
            secret_key: var(ENV_SECRET_KEY)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ObjectStore {
    bucket: Bucket,
    credentials: Credentials,
    http: reqwest::Client,
    /// Extra attempts after the first for retryable failures.
    pub retries: u32,
    pub backoff: Duration,
}

static ERROR_CODE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<Code>([^<]+)</Code>").unwrap());

impl ObjectStore {
    pub fn new(settings: &StoreSettings) -> Result<Self, ObjectStoreError> {
        let endpoint = Url::parse(&settings.endpoint)
            .map_err(|e| ObjectStoreError::Config(format!("endpoint {}: {e}", settings.endpoint)))?;
        let bucket = Bucket::new(
            endpoint,
            UrlStyle::Path,
            settings.bucket.clone(),
            settings.region.clone(),
        )
        .map_err(|e| ObjectStoreError::Config(e.to_string()))?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ObjectStoreError::Config(e.to_string()))?;
        Ok(ObjectStore {
            bucket,
            credentials: Credentials::new(settings.access_key.clone(), settings.secret_key.clone()),
            http,
            retries: 3,
            backoff: Duration::from_millis(200),
        })
    }

    pub fn bucket_name(&self) -> &str {
        self.bucket.name()
    }

    fn classify(&self, status: u16, body: &str, key: &str) -> ObjectStoreError {
        let code = ERROR_CODE
            .captures(body)
            .map(|c| c[1].to_string())
            .unwrap_or_default();
        match (status, code.as_str()) {
            (_, "NoSuchBucket") => ObjectStoreError::MissingBucket(self.bucket.name().to_string()),
            (_, "NoSuchKey") => ObjectStoreError::MissingKey(key.to_string()),
            (403, _) | (_, "AccessDenied" | "InvalidAccessKeyId" | "SignatureDoesNotMatch") => {
                ObjectStoreError::Auth { code }
            }
            _ => ObjectStoreError::Http { status, code },
        }
    }

    async fn with_retries<T, F, Fut>(&self, mut op: F) -> Result<T, ObjectStoreError>
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = Result<T, ObjectStoreError>>,
    {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match op().await {
                Err(e) if e.retryable() && attempt < self.retries => {
                    attempt += 1;
                    tracing::debug!("object store attempt {attempt} failed: {e}");
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                }
                other => return other,
            }
        }
    }

    /// Uploads `payload` under `key` (verbatim), returning the ETag.
    pub async fn put_object(&self, key: &str, payload: &[u8]) -> Result<String, ObjectStoreError> {
        if key.is_empty() {
            return Err(ObjectStoreError::Config("empty object key".into()));
        }
        self.with_retries(|| async {
            let url = self.bucket.put_object(Some(&self.credentials), key).sign(PRESIGN_TTL);
            let resp = self
                .http
                .put(url)
                .body(payload.to_vec())
                .send()
                .await
                .map_err(|e| ObjectStoreError::Transport(e.to_string()))?;
            let status = resp.status().as_u16();
            let etag = resp
                .headers()
                .get(reqwest::header::ETAG)
                .and_then(|v| v.to_str().ok())
                .map(|s| s.trim_matches('"').to_string());
            let body = resp.text().await.unwrap_or_default();
            if status == 200 {
                Ok(etag.unwrap_or_default())
            } else {
                Err(self.classify(status, &body, key))
            }
        })
        .await
    }

    pub async fn get_object(&self, key: &str) -> Result<Vec<u8>, ObjectStoreError> {
        self.with_retries(|| async {
            let url = self.bucket.get_object(Some(&self.credentials), key).sign(PRESIGN_TTL);
            let resp = self
                .http
                .get(url)
                .send()
                .await
                .map_err(|e| ObjectStoreError::Transport(e.to_string()))?;
            let status = resp.status().as_u16();
            let body = resp
                .bytes()
                .await
                .map_err(|e| ObjectStoreError::Transport(e.to_string()))?;
            if status == 200 {
                Ok(body.to_vec())
            } else {
                Err(self.classify(status, &String::from_utf8_lossy(&body), key))
            }
        })
        .await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(endpoint: &str) -> ObjectStore {
        let mut s = ObjectStore::new(&StoreSettings {
            endpoint: endpoint.into(),
            bucket: "ads".into(),
            region: "us-east-1".into(),
            access_key: "AK".into(),
            secret_key: "SK".into(),
        })
        .unwrap();
        s.backoff = Duration::from_millis(1);
        s
    }

    #[test]
    fn error_codes() {
        let s = store("http://127.0.0.1:1");
        let body = "<Error><Code>NoSuchBucket</Code></Error>";
        assert!(matches!(s.classify(404, body, "k"), ObjectStoreError::MissingBucket(b) if b == "ads"));
        assert!(matches!(s.classify(403, "", "k"), ObjectStoreError::Auth { .. }));
        assert!(matches!(
            s.classify(400, "<Code>SignatureDoesNotMatch</Code>", "k"),
            ObjectStoreError::Auth { .. }
        ));
        assert!(s.classify(503, "", "k").retryable());
        assert!(!s.classify(404, "<Code>NoSuchKey</Code>", "k").retryable());
    }

    #[test]
    fn bad_endpoint() {
        let err = ObjectStore::new(&StoreSettings {
            endpoint: "not a url".into(),
            bucket: "b".into(),
            region: "r".into(),
            access_key: "a".into(),
            secret_key: "s".into(),
        })
        .unwrap_err();
        assert!(matches!(err, ObjectStoreError::Config(_)));
    }

    #[tokio::test]
    async fn unreachable_is_transport() {
        let s = store("http://127.0.0.1:9");
        let err = s.put_object("k", b"x").await.unwrap_err();
        assert!(matches!(err, ObjectStoreError::Transport(_)));
        assert!(matches!(s.put_object("", b"x").await, Err(ObjectStoreError::Config(_))));
    }
}
