//! Parquet batches of [`AdRecord`]s.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use arrow_array::builder::{Decimal128Builder, Float64Builder, StringBuilder, TimestampMillisecondBuilder};
use arrow_array::cast::AsArray;
use arrow_array::types::{Decimal128Type, Float64Type, TimestampMillisecondType};
use arrow_array::{Array, ArrayRef, RecordBatch};
use arrow_schema::{DataType, Field, Schema, SchemaRef, TimeUnit};
use chrono::{DateTime, Utc};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use parquet::basic::Compression;
use parquet::file::metadata::KeyValue;
use parquet::file::properties::WriterProperties;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::record::{AdRecord, PRICE_SCALE};
use super::SinkError;

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_VERSION_KEY: &str = "adtrace.schema_version";
pub const PRICE_PRECISION: u8 = 18;

/// Column names in export order.
pub const COLUMNS: [&str; 18] = [
    "url",
    "title",
    "text",
    "product",
    "description",
    "domain",
    "image",
    "retrieved",
    "category",
    "production_date",
    "price",
    "currency",
    "seller",
    "seller_type",
    "location",
    "zero_shot_label",
    "zero_shot_prob",
    "id",
];

const REQUIRED: [&str; 8] = [
    "url",
    "text",
    "product",
    "domain",
    "retrieved",
    "zero_shot_label",
    "zero_shot_prob",
    "id",
];

pub fn schema() -> SchemaRef {
    let fields: Vec<Field> = COLUMNS
        .iter()
        .map(|&name| {
            let ty = match name {
                "retrieved" => DataType::Timestamp(TimeUnit::Millisecond, Some("UTC".into())),
                "price" => DataType::Decimal128(PRICE_PRECISION, PRICE_SCALE as i8),
                "zero_shot_prob" => DataType::Float64,
                _ => DataType::Utf8,
            };
            Field::new(name, ty, !REQUIRED.contains(&name))
        })
        .collect();
    Arc::new(Schema::new(fields))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub object_key: String,
    pub record_count: usize,
    pub byte_size: u64,
    pub written_at: DateTime<Utc>,
    pub schema_version: u32,
}

fn price_units(p: Decimal) -> Result<i128, SinkError> {
    let mut scaled = p.round_dp(PRICE_SCALE);
    scaled.rescale(PRICE_SCALE);
    let units = scaled.mantissa();
    if units.unsigned_abs() >= 10u128.pow(PRICE_PRECISION as u32) {
        return Err(SinkError::Schema(format!("price {p} exceeds decimal({PRICE_PRECISION},{PRICE_SCALE})")));
    }
    Ok(units)
}

pub fn to_record_batch(records: &[AdRecord]) -> Result<RecordBatch, SinkError> {
    let strings = |get: &dyn Fn(&AdRecord) -> Option<&str>| -> ArrayRef {
        let mut b = StringBuilder::new();
        for r in records {
            b.append_option(get(r));
        }
        Arc::new(b.finish())
    };
    let mut retrieved = TimestampMillisecondBuilder::with_capacity(records.len());
    let mut price = Decimal128Builder::with_capacity(records.len());
    let mut prob = Float64Builder::with_capacity(records.len());
    for r in records {
        retrieved.append_value(r.retrieved.timestamp_millis());
        price.append_option(r.price.map(price_units).transpose()?);
        prob.append_value(r.zero_shot_prob);
    }
    let retrieved: ArrayRef = Arc::new(retrieved.finish().with_timezone("UTC"));
    let price: ArrayRef = Arc::new(
        price
            .finish()
            .with_precision_and_scale(PRICE_PRECISION, PRICE_SCALE as i8)
            .map_err(|e| SinkError::Schema(e.to_string()))?,
    );
    let prob: ArrayRef = Arc::new(prob.finish());

    let columns: Vec<ArrayRef> = COLUMNS
        .iter()
        .map(|&name| match name {
            "url" => strings(&|r| Some(&r.url)),
            "title" => strings(&|r| r.title.as_deref()),
            "text" => strings(&|r| Some(&r.text)),
            "product" => strings(&|r| Some(&r.product)),
            "description" => strings(&|r| r.description.as_deref()),
            "domain" => strings(&|r| Some(&r.domain)),
            "image" => strings(&|r| r.image.as_deref()),
            "retrieved" => retrieved.clone(),
            "category" => strings(&|r| r.category.as_deref()),
            "production_date" => strings(&|r| r.production_date.as_deref()),
            "price" => price.clone(),
            "currency" => strings(&|r| r.currency.as_deref()),
            "seller" => strings(&|r| r.seller.as_deref()),
            "seller_type" => strings(&|r| r.seller_type.as_deref()),
            "location" => strings(&|r| r.location.as_deref()),
            "zero_shot_label" => strings(&|r| Some(&r.zero_shot_label)),
            "zero_shot_prob" => prob.clone(),
            "id" => strings(&|r| Some(&r.id)),
            other => unreachable!("unknown column {other}"),
        })
        .collect();
    RecordBatch::try_new(schema(), columns).map_err(|e| SinkError::Schema(e.to_string()))
}

fn writer_properties() -> WriterProperties {
    WriterProperties::builder()
        .set_compression(Compression::SNAPPY)
        .set_key_value_metadata(Some(vec![KeyValue::new(
            SCHEMA_VERSION_KEY.to_string(),
            SCHEMA_VERSION.to_string(),
        )]))
        .build()
}

/// Encodes records as one Parquet file in memory.
pub fn encode_parquet(records: &[AdRecord]) -> Result<Vec<u8>, SinkError> {
    let batch = to_record_batch(records)?;
    let mut buf = Vec::new();
    let mut w = ArrowWriter::try_new(&mut buf, schema(), Some(writer_properties()))?;
    w.write(&batch)?;
    w.close()?;
    Ok(buf)
}

/// Writes `records` to `root/key` through a temporary file in the same
/// directory and an atomic rename. An empty batch writes nothing.
pub fn write_batch(
    records: &[AdRecord],
    root: &Path,
    key: &str,
    written_at: DateTime<Utc>,
) -> Result<Option<BatchManifest>, SinkError> {
    if records.is_empty() {
        return Ok(None);
    }
    let bytes = encode_parquet(records)?;
    let target = root.join(key);
    let dir = target.parent().unwrap_or(root);
    std::fs::create_dir_all(dir).map_err(|e| SinkError::io(dir, e))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".part-")
        .suffix(".tmp")
        .tempfile_in(dir)
        .map_err(|e| SinkError::io(dir, e))?;
    tmp.write_all(&bytes).map_err(|e| SinkError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| SinkError::io(tmp.path(), e))?;
    tmp.persist(&target).map_err(|e| SinkError::io(&target, e.error))?;
    Ok(Some(BatchManifest {
        object_key: key.to_string(),
        record_count: records.len(),
        byte_size: bytes.len() as u64,
        written_at,
        schema_version: SCHEMA_VERSION,
    }))
}

fn column<'a>(batch: &'a RecordBatch, name: &str) -> Result<&'a ArrayRef, SinkError> {
    batch
        .column_by_name(name)
        .ok_or_else(|| SinkError::Schema(format!("missing column {name}")))
}

fn opt_str(batch: &RecordBatch, name: &str, row: usize) -> Result<Option<String>, SinkError> {
    let col = column(batch, name)?;
    let col = col
        .as_string_opt::<i32>()
        .ok_or_else(|| SinkError::Schema(format!("column {name} is not utf8")))?;
    Ok(col.is_valid(row).then(|| col.value(row).to_string()))
}

fn req_str(batch: &RecordBatch, name: &str, row: usize) -> Result<String, SinkError> {
    opt_str(batch, name, row)?.ok_or_else(|| SinkError::Schema(format!("null in required column {name}")))
}

pub fn from_record_batch(batch: &RecordBatch) -> Result<Vec<AdRecord>, SinkError> {
    let retrieved = column(batch, "retrieved")?
        .as_primitive_opt::<TimestampMillisecondType>()
        .ok_or_else(|| SinkError::Schema("retrieved is not timestamp(ms)".into()))?;
    let price = column(batch, "price")?
        .as_primitive_opt::<Decimal128Type>()
        .ok_or_else(|| SinkError::Schema("price is not decimal128".into()))?;
    let scale = match price.data_type() {
        DataType::Decimal128(_, s) => *s as u32,
        _ => PRICE_SCALE,
    };
    let prob = column(batch, "zero_shot_prob")?
        .as_primitive_opt::<Float64Type>()
        .ok_or_else(|| SinkError::Schema("zero_shot_prob is not float64".into()))?;

    (0..batch.num_rows())
        .map(|i| {
            Ok(AdRecord {
                url: req_str(batch, "url", i)?,
                title: opt_str(batch, "title", i)?,
                text: req_str(batch, "text", i)?,
                product: req_str(batch, "product", i)?,
                description: opt_str(batch, "description", i)?,
                domain: req_str(batch, "domain", i)?,
                image: opt_str(batch, "image", i)?,
                retrieved: DateTime::from_timestamp_millis(retrieved.value(i))
                    .ok_or_else(|| SinkError::Schema("retrieved out of range".into()))?,
                category: opt_str(batch, "category", i)?,
                production_date: opt_str(batch, "production_date", i)?,
                price: price
                    .is_valid(i)
                    .then(|| Decimal::from_i128_with_scale(price.value(i), scale).normalize()),
                currency: opt_str(batch, "currency", i)?,
                seller: opt_str(batch, "seller", i)?,
                seller_type: opt_str(batch, "seller_type", i)?,
                location: opt_str(batch, "location", i)?,
                zero_shot_label: req_str(batch, "zero_shot_label", i)?,
                zero_shot_prob: prob.value(i),
                id: req_str(batch, "id", i)?,
            })
        })
        .collect()
}

/// Reads every record of a Parquet file, plus its schema version.
pub fn read_batch(path: &Path) -> Result<(Vec<AdRecord>, Option<u32>), SinkError> {
    let file = File::open(path).map_err(|e| SinkError::io(path, e))?;
    let builder = ParquetRecordBatchReaderBuilder::try_new(file)?;
    let version = builder
        .metadata()
        .file_metadata()
        .key_value_metadata()
        .and_then(|kv| kv.iter().find(|k| k.key == SCHEMA_VERSION_KEY))
        .and_then(|k| k.value.as_deref())
        .and_then(|v| v.parse().ok());
    let mut out = Vec::new();
    for batch in builder.build()? {
        let batch = batch.map_err(|e| SinkError::Schema(e.to_string()))?;
        out.extend(from_record_batch(&batch)?);
    }
    Ok((out, version))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn rec(i: usize) -> AdRecord {
        AdRecord {
            url: format!("https://www.ebay.com/itm/{i}"),
            title: i.is_multiple_of(2).then(|| format!("Title {i}")),
            text: format!("text {i}"),
            product: format!("product {i}"),
            description: None,
            domain: "ebay.com".into(),
            image: Some("https://i.ebayimg.com/x.jpg".into()),
            retrieved: "2023-08-08T12:34:56.789Z".parse().unwrap(),
            category: None,
            production_date: (i == 1).then(|| "1890".into()),
            price: (i != 2).then(|| Decimal::from_str("1500.25").unwrap()),
            currency: (i != 2).then(|| "USD".into()),
            seller: None,
            seller_type: None,
            location: Some("Ohio".into()),
            zero_shot_label: "an animal body part".into(),
            zero_shot_prob: 1.0 / 3.0,
            id: format!("00000000-0000-4000-8000-{i:012}"),
        }
    }

    #[test]
    fn schema_names() {
        let s = schema();
        let names: Vec<&str> = s.fields().iter().map(|f| f.name().as_str()).collect();
        assert_eq!(names, COLUMNS);
        assert!(!s.field_with_name("id").unwrap().is_nullable());
        assert!(s.field_with_name("seller").unwrap().is_nullable());
    }

    #[test]
    fn round_trip_three() {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<AdRecord> = (0..3).map(rec).collect();
        let key = "ads/date=2023-08-08/part-0000.parquet";
        let m = write_batch(&records, dir.path(), key, Utc::now()).unwrap().unwrap();
        assert_eq!(m.record_count, 3);
        assert_eq!(m.object_key, key);
        let (back, version) = read_batch(&dir.path().join(key)).unwrap();
        assert_eq!(back, records);
        assert_eq!(version, Some(SCHEMA_VERSION));
        let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("ads/date=2023-08-08"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn empty_batch_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_batch(&[], dir.path(), "x.parquet", Utc::now()).unwrap().is_none());
        assert!(!dir.path().join("x.parquet").exists());
    }

    #[test]
    fn encoding_is_deterministic() {
        let records: Vec<AdRecord> = (0..5).map(rec).collect();
        assert_eq!(encode_parquet(&records).unwrap(), encode_parquet(&records).unwrap());
    }

    #[test]
    fn oversized_price_rejected() {
        let mut r = rec(0);
        r.price = Some(Decimal::from_str("100000000000000").unwrap());
        assert!(encode_parquet(&[r]).is_err());
    }
}
