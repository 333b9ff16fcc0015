//! On-disk cache of aligned price tables.
//!
//! Entries are JSON documents named by a SHA-256 key over the schema version,
//! the raw file bytes and the requested ticker list. Prices are stored as IEEE
//! bit patterns so a cached load is bit-identical to a fresh parse. Writers
//! publish through a temporary file and an atomic rename, so concurrent readers
//! see either a complete entry or none.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, PriceTable};

/// Bumped whenever the entry layout changes; older entries are ignored.
pub const CACHE_SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "PORTOPT_CACHE_DIR";

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    version: u32,
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    price_bits: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct PriceCache {
    dir: PathBuf,
}

impl PriceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$PORTOPT_CACHE_DIR`, if set and non-empty.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(Self::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(bytes: &[u8], tickers: &[String]) -> String {
        let content = Sha256::digest(bytes);
        let mut h = Sha256::new();
        h.update(CACHE_SCHEMA_VERSION.to_le_bytes());
        h.update(content);
        for t in tickers {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn entry_path(&self, bytes: &[u8], tickers: &[String]) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(bytes, tickers)))
    }

    pub(super) fn get_or_parse<F>(&self, bytes: &[u8], tickers: &[String], parse: F) -> Result<PriceTable, DataError>
    where
        F: FnOnce() -> Result<PriceTable, DataError>,
    {
        let path = self.entry_path(bytes, tickers);
        if let Some(table) = read_entry(&path, tickers) {
            log::debug!("price cache hit {}", path.display());
            return Ok(table);
        }
        let table = parse()?;
        self.write_entry(&path, &table)?;
        Ok(table)
    }

    fn write_entry(&self, path: &Path, table: &PriceTable) -> Result<(), DataError> {
        let cache_err = |message: String| DataError::Cache {
            path: path.to_path_buf(),
            message,
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| cache_err(e.to_string()))?;
        let p = table.prices();
        let entry = Entry {
            version: CACHE_SCHEMA_VERSION,
            tickers: table.tickers().to_vec(),
            dates: table.dates().to_vec(),
            price_bits: (0..p.nrows())
                .flat_map(|t| (0..p.ncols()).map(move |j| p[(t, j)].to_bits()))
                .collect(),
        };
        let body = serde_json::to_vec(&entry).map_err(|e| cache_err(e.to_string()))?;
        let tmp = path.with_extension(format!("json.tmp.{}.{:?}", std::process::id(), std::thread::current().id()));
        std::fs::write(&tmp, body).map_err(|e| cache_err(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            cache_err(e.to_string())
        })
    }
}

fn read_entry(path: &Path, tickers: &[String]) -> Option<PriceTable> {
    let body = std::fs::read(path).ok()?;
    let entry: Entry = serde_json::from_slice(&body).ok()?;
    if entry.version != CACHE_SCHEMA_VERSION || entry.tickers != tickers {
        return None;
    }
    let (t, n) = (entry.dates.len(), entry.tickers.len());
    if entry.price_bits.len() != t * n {
        return None;
    }
    let prices = DMatrix::from_fn(t, n, |r, c| f64::from_bits(entry.price_bits[r * n + c]));
    PriceTable::new(entry.tickers, entry.dates, prices).ok()
}
