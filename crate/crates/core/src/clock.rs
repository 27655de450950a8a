//! Wall clock and record-id sources, swappable for reproducible test runs.

use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, TimeZone, Utc};
use sha2::{Digest, Sha256};
use uuid::Uuid;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl FixedClock {
    /// 2023-08-08T00:00:00Z.
    pub fn test_default() -> Self {
        FixedClock(Utc.with_ymd_and_hms(2023, 8, 8, 0, 0, 0).unwrap())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// Produces record ids. `Random` is the production mode; `Seeded` derives a
/// v4-shaped UUID from a seed and the record key so reruns match exactly.
#[derive(Debug)]
pub enum IdSource {
    Random,
    Seeded { seed: u64, counter: AtomicU64 },
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource::Seeded {
            seed,
            counter: AtomicU64::new(0),
        }
    }

    /// Id for a record identified by `key` (the canonical ad URL).
    pub fn id_for(&self, key: &str) -> Uuid {
        match self {
            IdSource::Random => Uuid::new_v4(),
            IdSource::Seeded { seed, .. } => {
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update(key.as_bytes());
                let digest = h.finalize();
                let mut bytes = [0u8; 16];
                bytes.copy_from_slice(&digest[..16]);
                uuid::Builder::from_random_bytes(bytes).into_uuid()
            }
        }
    }

    /// Id with no natural key; seeded mode uses a counter.
    pub fn next_id(&self) -> Uuid {
        match self {
            IdSource::Random => Uuid::new_v4(),
            IdSource::Seeded { counter, .. } => {
                let n = counter.fetch_add(1, Ordering::Relaxed);
                self.id_for(&format!("#{n}"))
            }
        }
    }
}
