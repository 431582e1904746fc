//! Persisted planning results.
//!
//! Text format, one entry per line after a header:
//!
//! ```text
//! planarfft-wisdom v1
//! v1|rows|cols|workers|strategy|base_case|transpose_block|second_pass|median_ns
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::plan::{Candidate, SecondPass};
use crate::engine::StrategyId;
use crate::error::{FftError, Result};

pub const WISDOM_VERSION: &str = "v1";
const HEADER_PREFIX: &str = "planarfft-wisdom ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WisdomKey {
    pub rows: usize,
    pub cols: usize,
    pub workers: usize,
    pub strategy: StrategyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WisdomEntry {
    pub candidate: Candidate,
    pub median_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WisdomStore {
    version: String,
    entries: BTreeMap<WisdomKey, WisdomEntry>,
}

impl Default for WisdomStore {
    fn default() -> Self {
        Self::new()
    }
}

impl WisdomStore {
    pub fn new() -> Self {
        Self::with_version(WISDOM_VERSION)
    }

    pub fn with_version(version: impl Into<String>) -> Self {
        WisdomStore {
            version: version.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &WisdomKey) -> Option<&WisdomEntry> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: WisdomKey, entry: WisdomEntry) -> Option<WisdomEntry> {
        self.entries.insert(key, entry)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WisdomKey, &WisdomEntry)> {
        self.entries.iter()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_PREFIX}{}\n", self.version);
        for (k, e) in &self.entries {
            let _ = writeln!(
                out,
                "{}|{}|{}|{}|{}|{}|{}|{}|{}",
                self.version,
                k.rows,
                k.cols,
                k.workers,
                k.strategy.name(),
                e.candidate.base_case,
                e.candidate.transpose_block,
                e.candidate.second_pass.name(),
                e.median_ns
            );
        }
        out
    }

    /// Parses wisdom text. Entries tagged with another version are dropped
    /// and reported in the returned diagnostics.
    pub fn parse(text: &str) -> Result<(Self, Vec<String>)> {
        let mut diagnostics = Vec::new();
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            None => return Ok((Self::new(), diagnostics)),
            Some((_, h)) => h,
        };
        let version = header
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| FftError::WisdomParse {
                line: 1,
                message: format!("expected `{HEADER_PREFIX}<version>` header"),
            })?;
        if version != WISDOM_VERSION {
            diagnostics.push(format!(
                "wisdom version `{version}` does not match `{WISDOM_VERSION}`; ignoring file"
            ));
            return Ok((Self::new(), diagnostics));
        }

        let mut store = Self::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 9 {
                return Err(FftError::WisdomParse {
                    line: lineno,
                    message: format!("expected 9 fields, found {}", fields.len()),
                });
            }
            if fields[0] != store.version {
                diagnostics.push(format!(
                    "line {lineno}: entry version `{}` is stale; skipped",
                    fields[0]
                ));
                continue;
            }
            let bad = |what: &str, e: String| FftError::WisdomParse {
                line: lineno,
                message: format!("{what}: {e}"),
            };
            let num = |i: usize, what: &str| -> Result<u64> {
                fields[i]
                    .parse::<u64>()
                    .map_err(|e| bad(what, e.to_string()))
            };
            let key = WisdomKey {
                rows: num(1, "rows")? as usize,
                cols: num(2, "cols")? as usize,
                workers: num(3, "workers")? as usize,
                strategy: fields[4]
                    .parse::<StrategyId>()
                    .map_err(|e| bad("strategy", e.to_string()))?,
            };
            let entry = WisdomEntry {
                candidate: Candidate {
                    base_case: num(5, "base_case")? as usize,
                    transpose_block: num(6, "transpose_block")? as usize,
                    second_pass: fields[7]
                        .parse::<SecondPass>()
                        .map_err(|e| bad("second_pass", e.to_string()))?,
                },
                median_ns: num(8, "median_ns")?,
            };
            store.entries.insert(key, entry);
        }
        Ok((store, diagnostics))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| FftError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads a wisdom file; a missing file yields an empty store.
    pub fn load_with_diagnostics(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        let path = path.as_ref();
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok((Self::new(), Vec::new())),
            Err(source) => Err(FftError::Io {
                path: path.to_path_buf(),
                source,
            }),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (store, diagnostics) = Self::load_with_diagnostics(path)?;
        for d in diagnostics {
            warn!("{}: {d}", path.display());
        }
        Ok(store)
    }
}

pub fn wisdom_save(store: &WisdomStore, path: impl AsRef<Path>) -> Result<()> {
    store.save(path)
}

pub fn wisdom_load(path: impl AsRef<Path>) -> Result<WisdomStore> {
    WisdomStore::load(path)
}
