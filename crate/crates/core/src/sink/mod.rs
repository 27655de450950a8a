//! Final ad records, Parquet batches and object-store upload.

pub mod columnar;
pub mod record;
pub mod s3;

use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

pub use columnar::{encode_parquet, read_batch, schema, write_batch, BatchManifest, COLUMNS, SCHEMA_VERSION};
pub use record::{assemble_record, AdRecord};
pub use s3::{ObjectStore, ObjectStoreError, StoreSettings};

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parquet: {0}")]
    Parquet(#[from] parquet::errors::ParquetError),
    #[error("schema: {0}")]
    Schema(String),
}

impl SinkError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        SinkError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub const DEFAULT_PARTITION_TEMPLATE: &str = "ads/date={date}/part-{part}.parquet";

/// Object key from a template with `{date}` (YYYY-MM-DD) and `{part}`
/// (zero-padded to four digits) placeholders.
pub fn partition_key(template: &str, date: NaiveDate, part: u32) -> String {
    template
        .replace("{date}", &date.format("%Y-%m-%d").to_string())
        .replace("{part}", &format!("{part:04}"))
}
