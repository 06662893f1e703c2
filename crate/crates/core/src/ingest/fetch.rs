use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::table::{parse_table, ParseOptions, RawTable, SourceId};
use crate::error::{Error, Result};

/// Fetches a URL body. Implementations report HTTP failures as
/// [`Error::Remote`].
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Vec<u8>>;
}

/// Downloads survey tables into a local cache and parses them from there.
pub struct AcsClient {
    /// URL with `{year}` and `{table}` placeholders.
    pub url_template: String,
    pub cache_dir: PathBuf,
    pub parse: ParseOptions,
    transport: Box<dyn Transport>,
    write_lock: Mutex<()>,
}

impl std::fmt::Debug for AcsClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AcsClient")
            .field("url_template", &self.url_template)
            .field("cache_dir", &self.cache_dir)
            .finish_non_exhaustive()
    }
}

impl AcsClient {
    pub fn new(url_template: impl Into<String>, cache_dir: impl Into<PathBuf>, transport: Box<dyn Transport>) -> Self {
        Self {
            url_template: url_template.into(),
            cache_dir: cache_dir.into(),
            parse: ParseOptions::default(),
            transport,
            write_lock: Mutex::new(()),
        }
    }

    pub fn cache_path(&self, year: u16, table: SourceId) -> PathBuf {
        self.cache_dir.join(format!("acs_{year}_{table}.csv"))
    }

    pub fn url(&self, year: u16, table: SourceId) -> String {
        self.url_template
            .replace("{year}", &year.to_string())
            .replace("{table}", table.as_str())
    }

    fn store(&self, path: &Path, body: &[u8]) -> Result<()> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        if path.exists() {
            return Ok(());
        }
        std::fs::create_dir_all(&self.cache_dir).map_err(|e| Error::io(&self.cache_dir, e))?;
        let tmp = path.with_extension("csv.partial");
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Returns the cached file for `(year, table)`, downloading it first if absent.
    pub fn ensure_cached(&self, year: u16, table: SourceId) -> Result<PathBuf> {
        let path = self.cache_path(year, table);
        if !path.exists() {
            let url = self.url(year, table);
            log::info!("fetching {url}");
            let body = self.transport.get(&url)?;
            self.store(&path, &body)?;
        }
        Ok(path)
    }

    pub fn fetch_acs(&self, year: u16, tables: &[SourceId]) -> Result<Vec<RawTable>> {
        tables
            .iter()
            .map(|&t| {
                let path = self.ensure_cached(year, t)?;
                parse_table(&path, t, &self.parse)
            })
            .collect()
    }
}

/// Blocking HTTP transport.
#[cfg(feature = "http")]
#[derive(Debug, Default)]
pub struct HttpTransport;

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>> {
        let remote = |status, message: String| Error::Remote {
            url: url.to_string(),
            status,
            message,
        };
        let mut resp = ureq::get(url).call().map_err(|e| match e {
            ureq::Error::StatusCode(code) => remote(Some(code), format!("HTTP {code}")),
            other => remote(None, other.to_string()),
        })?;
        resp.body_mut()
            .read_to_vec()
            .map_err(|e| remote(None, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Stub {
        bodies: HashMap<String, Vec<u8>>,
        calls: Arc<AtomicUsize>,
    }

    impl Transport for Stub {
        fn get(&self, url: &str) -> Result<Vec<u8>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.bodies.get(url).cloned().ok_or_else(|| Error::Remote {
                url: url.to_string(),
                status: Some(404),
                message: "not found".into(),
            })
        }
    }

    const FIXTURE: &str = "fips,NAME,DP02_0001E\n1001,Autauga,21559\n1003,Baldwin,78622\n";

    fn client(dir: &Path) -> (AcsClient, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let bodies = HashMap::from([("https://stub/2019/DP02".to_string(), FIXTURE.as_bytes().to_vec())]);
        let stub = Stub {
            bodies,
            calls: calls.clone(),
        };
        (AcsClient::new("https://stub/{year}/{table}", dir, Box::new(stub)), calls)
    }

    #[test]
    fn stubbed_fetch_matches_direct_parse() {
        let dir = tempfile::tempdir().unwrap();
        let (c, calls) = client(dir.path());
        let fetched = c.fetch_acs(2019, &[SourceId::DP02]).unwrap();
        let direct_path = dir.path().join("direct.csv");
        std::fs::write(&direct_path, FIXTURE).unwrap();
        let mut direct = parse_table(&direct_path, SourceId::DP02, &ParseOptions::default()).unwrap();
        direct.path = c.cache_path(2019, SourceId::DP02);
        assert_eq!(fetched, vec![direct]);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_hit_skips_network() {
        let dir = tempfile::tempdir().unwrap();
        let (c, calls) = client(dir.path());
        std::fs::write(c.cache_path(2018, SourceId::DP05), FIXTURE).unwrap();
        let t = c.fetch_acs(2018, &[SourceId::DP05]).unwrap();
        assert_eq!(t[0].len(), 2);
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn not_found_is_typed_and_final() {
        let dir = tempfile::tempdir().unwrap();
        let (c, _) = client(dir.path());
        let err = c.fetch_acs(2019, &[SourceId::DP03]).unwrap_err();
        assert!(matches!(err, Error::Remote { status: Some(404), .. }));
        assert!(!err.is_retriable());
        assert!(!c.cache_path(2019, SourceId::DP03).exists());
    }
}
