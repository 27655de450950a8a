//! The library's clients against the mock services.

use std::time::Duration;

use adtrace_core::classify::{annotate, classify, default_label_set, Backend, ClassifyError, RetryPolicy, ZeroShotRequest};
use adtrace_core::sink::{ObjectStore, ObjectStoreError, StoreSettings};
use adtrace_testkit::s3::S3Server;
use adtrace_testkit::zeroshot::{Behavior, ZeroShotServer};

fn settings(endpoint: String, bucket: &str, key: &str) -> StoreSettings {
    StoreSettings {
        endpoint,
        bucket: bucket.into(),
        region: "us-east-1".into(),
        access_key: key.into(),
        secret_key: "secret".into(),
    }
}

#[tokio::test]
async fn s3_round_trip_and_errors() {
    let server = S3Server::start("AK", &["ads"]).await;
    let store = ObjectStore::new(&settings(server.endpoint(), "ads", "AK")).unwrap();
    let payload: Vec<u8> = (0..=255u8).cycle().take(100_000).collect();
    store.put_object("ads/date=2023-08-08/part-0000.parquet", &payload).await.unwrap();
    let back = store.get_object("ads/date=2023-08-08/part-0000.parquet").await.unwrap();
    assert_eq!(back, payload);
    assert!(matches!(store.get_object("nope").await, Err(ObjectStoreError::MissingKey(_))));

    let missing = ObjectStore::new(&settings(server.endpoint(), "other", "AK")).unwrap();
    assert!(matches!(missing.put_object("k", b"x").await, Err(ObjectStoreError::MissingBucket(_))));
    let denied = ObjectStore::new(&settings(server.endpoint(), "ads", "WRONG")).unwrap();
    assert!(matches!(denied.put_object("k", b"x").await, Err(ObjectStoreError::Auth { .. })));
}

async fn backend(server: &ZeroShotServer) -> Backend {
    Backend::from_spec(&server.url(), Duration::from_secs(5)).unwrap()
}

#[tokio::test]
async fn zero_shot_reply_is_validated() {
    let labels = default_label_set();
    let req = ZeroShotRequest::new("Live macaw chick", &labels).unwrap();

    let ok = ZeroShotServer::start(Behavior::Hashed).await;
    let r = classify(&req, &backend(&ok).await).await.unwrap();
    assert_eq!(r.scores.len(), 7);
    assert!((r.scores.iter().map(|s| s.prob).sum::<f64>() - 1.0).abs() < 1e-6);

    for b in [Behavior::BadSum, Behavior::UnknownLabel] {
        let s = ZeroShotServer::start(b).await;
        assert!(matches!(classify(&req, &backend(&s).await).await, Err(ClassifyError::Protocol { .. })));
    }
}

#[tokio::test]
async fn transient_failures_are_retried() {
    let labels = default_label_set();
    let retry = RetryPolicy {
        attempts: 3,
        base_delay: Duration::from_millis(1),
    };
    let flaky = ZeroShotServer::start(Behavior::FailFirst(2)).await;
    let a = annotate("Tiger claw", &labels, &backend(&flaky).await, retry).await;
    assert_ne!(a.label, adtrace_core::classify::UNCLASSIFIED);
    assert_eq!(flaky.request_count(), 3);

    let down = ZeroShotServer::start(Behavior::FailFirst(10)).await;
    let a = annotate("Tiger claw", &labels, &backend(&down).await, retry).await;
    assert_eq!(a.label, adtrace_core::classify::UNCLASSIFIED);
    assert_eq!(down.request_count(), 3);
}
