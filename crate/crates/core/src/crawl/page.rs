//! Fetched pages and the append-only page store.
//!
//! Each record is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON.

use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use base64::Engine;
use base64::engine::general_purpose::STANDARD as B64;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Raw result of fetching one URL. Transport failures are kept as pages with
/// status 0 and `error` set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedPage {
    pub url: String,
    pub final_url: String,
    pub status: u16,
    pub body: Vec<u8>,
    pub content_type: String,
    pub retrieved_at: DateTime<Utc>,
    pub elapsed_ms: u64,
    pub truncated: bool,
    pub error: Option<String>,
}

impl FetchedPage {
    pub fn failed(url: &str, error: String, retrieved_at: DateTime<Utc>, elapsed_ms: u64) -> Self {
        FetchedPage {
            url: url.to_string(),
            final_url: url.to_string(),
            status: 0,
            body: Vec::new(),
            content_type: String::new(),
            retrieved_at,
            elapsed_ms,
            truncated: false,
            error: Some(error),
        }
    }

    pub fn is_success(&self) -> bool {
        self.error.is_none() && (200..300).contains(&self.status)
    }

    pub fn is_html(&self) -> bool {
        let ct = self.content_type.to_ascii_lowercase();
        ct.contains("text/html") || ct.contains("application/xhtml")
    }

    /// Charset parameter of the Content-Type header, if any.
    pub fn declared_charset(&self) -> Option<&str> {
        self.content_type.split(';').skip(1).find_map(|p| {
            let (k, v) = p.split_once('=')?;
            k.trim()
                .eq_ignore_ascii_case("charset")
                .then(|| v.trim().trim_matches('"'))
        })
    }
}

#[derive(Serialize, Deserialize)]
struct StoredPage {
    url: String,
    final_url: String,
    status: u16,
    retrieved_at: String,
    elapsed_ms: u64,
    content_type: String,
    body_b64: String,
    truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("page store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("page store record {index}: {message}")]
    Corrupt { index: usize, message: String },
    #[error("page store ends with a partial record after {complete} complete records")]
    TruncatedTail { complete: usize },
}

pub fn encode_record(page: &FetchedPage) -> Vec<u8> {
    let stored = StoredPage {
        url: page.url.clone(),
        final_url: page.final_url.clone(),
        status: page.status,
        retrieved_at: page.retrieved_at.to_rfc3339_opts(SecondsFormat::Millis, true),
        elapsed_ms: page.elapsed_ms,
        content_type: page.content_type.clone(),
        body_b64: B64.encode(&page.body),
        truncated: page.truncated,
        error: page.error.clone(),
    };
    let json = serde_json::to_vec(&stored).expect("page record serializes");
    let mut out = Vec::with_capacity(json.len() + 4);
    out.extend_from_slice(&(json.len() as u32).to_be_bytes());
    out.extend_from_slice(&json);
    out
}

fn decode_json(json: &[u8]) -> Result<FetchedPage, String> {
    let s: StoredPage = serde_json::from_slice(json).map_err(|e| e.to_string())?;
    let retrieved_at = DateTime::parse_from_rfc3339(&s.retrieved_at)
        .map_err(|e| format!("retrieved_at: {e}"))?
        .with_timezone(&Utc);
    let body = B64.decode(s.body_b64).map_err(|e| format!("body_b64: {e}"))?;
    Ok(FetchedPage {
        url: s.url,
        final_url: s.final_url,
        status: s.status,
        body,
        content_type: s.content_type,
        retrieved_at,
        elapsed_ms: s.elapsed_ms,
        truncated: s.truncated,
        error: s.error,
    })
}

/// Append handle shared by crawl workers. Each record is written with a
/// single `write_all` under the lock.
#[derive(Debug)]
pub struct PageStore {
    path: PathBuf,
    writer: Mutex<BufWriter<File>>,
}

impl PageStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| StoreError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(PageStore {
            path,
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, page: &FetchedPage) -> Result<(), StoreError> {
        let record = encode_record(page);
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        w.write_all(&record).map_err(|source| StoreError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn flush(&self) -> Result<(), StoreError> {
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        w.flush().map_err(|source| StoreError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

impl Drop for PageStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Streaming reader over a page store. A trailing partial record (left by a
/// killed writer) yields one `TruncatedTail` error and ends iteration.
pub struct PageStoreReader<R> {
    inner: R,
    index: usize,
    done: bool,
}

impl PageStoreReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let file = File::open(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(PageStoreReader::new(BufReader::new(file)))
    }
}

impl<R: Read> PageStoreReader<R> {
    pub fn new(inner: R) -> Self {
        PageStoreReader {
            inner,
            index: 0,
            done: false,
        }
    }

    fn read_full(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(filled)
    }
}

impl<R: Read> Iterator for PageStoreReader<R> {
    type Item = Result<FetchedPage, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let corrupt = |index, e: io::Error| StoreError::Corrupt {
            index,
            message: e.to_string(),
        };
        let mut len = [0u8; 4];
        match self.read_full(&mut len) {
            Ok(0) => {
                self.done = true;
                return None;
            }
            Ok(4) => {}
            Ok(_) => {
                self.done = true;
                return Some(Err(StoreError::TruncatedTail { complete: self.index }));
            }
            Err(e) => {
                self.done = true;
                return Some(Err(corrupt(self.index, e)));
            }
        }
        let len = u32::from_be_bytes(len) as usize;
        let mut json = vec![0u8; len];
        match self.read_full(&mut json) {
            Ok(n) if n == len => {}
            Ok(_) => {
                self.done = true;
                return Some(Err(StoreError::TruncatedTail { complete: self.index }));
            }
            Err(e) => {
                self.done = true;
                return Some(Err(corrupt(self.index, e)));
            }
        }
        let index = self.index;
        self.index += 1;
        Some(decode_json(&json).map_err(|message| StoreError::Corrupt { index, message }))
    }
}

/// Reads every complete record; a missing file reads as empty.
pub fn read_all_pages(path: &Path) -> Result<Vec<FetchedPage>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for page in PageStoreReader::open(path)? {
        match page {
            Ok(p) => out.push(p),
            Err(StoreError::TruncatedTail { complete }) => {
                tracing::warn!(complete, "page store has a partial trailing record; ignored");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn page(i: u16) -> FetchedPage {
        FetchedPage {
            url: format!("https://shop.test/{i}"),
            final_url: format!("https://shop.test/{i}"),
            status: 200,
            body: format!("<p>page {i}</p>").into_bytes(),
            content_type: "text/html; charset=utf-8".into(),
            retrieved_at: Utc.with_ymd_and_hms(2023, 8, 8, 12, 0, i as u32 % 60).unwrap(),
            elapsed_ms: i as u64,
            truncated: false,
            error: None,
        }
    }

    #[test]
    fn store_round_trip_and_partial_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pages.store");
        {
            let store = PageStore::open(&path).unwrap();
            for i in 0..3 {
                store.append(&page(i)).unwrap();
            }
            let failed = FetchedPage::failed("https://shop.test/x", "timeout".into(), Utc::now(), 5);
            store.append(&failed).unwrap();
        }
        let pages = read_all_pages(&path).unwrap();
        assert_eq!(pages.len(), 4);
        assert_eq!(pages[1], page(1));
        assert_eq!(pages[3].error.as_deref(), Some("timeout"));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&encode_record(&page(9))[..10]);
        std::fs::write(&path, &bytes).unwrap();
        let results: Vec<_> = PageStoreReader::open(&path).unwrap().collect();
        assert_eq!(results.len(), 5);
        assert!(matches!(results[4], Err(StoreError::TruncatedTail { complete: 4 })));
        assert_eq!(read_all_pages(&path).unwrap().len(), 4);
    }

    #[test]
    fn record_json_fields() {
        let rec = encode_record(&page(1));
        let len = u32::from_be_bytes(rec[..4].try_into().unwrap()) as usize;
        assert_eq!(len, rec.len() - 4);
        let v: serde_json::Value = serde_json::from_slice(&rec[4..]).unwrap();
        assert_eq!(v["retrieved_at"], "2023-08-08T12:00:01.000Z");
        assert_eq!(v["body_b64"], B64.encode("<p>page 1</p>"));
        assert!(v.get("error").is_none());
        for k in ["url", "final_url", "status", "elapsed_ms", "content_type", "truncated"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn content_type_helpers() {
        let mut p = page(0);
        assert!(p.is_html());
        assert_eq!(p.declared_charset(), Some("utf-8"));
        p.content_type = "application/json".into();
        assert!(!p.is_html());
        assert_eq!(p.declared_charset(), None);
    }
}
