//! Bulk `B(l, n)` for `n = 1..=N` via `l - 1` Dirichlet-convolution passes
//!
//! ```text
//! t_1(m) = 1,    t_{r+1}(m) = sum_{d | m} (m/d)^r t_r(d)
//! ```
//!
//! Each pass is the harmonic double loop over `d` and its multiples, so the
//! whole table costs `O(l N log N)`. Values are held in `u128` with checked
//! arithmetic; any overflow restarts the computation over big integers.
//!
//! Tables persist as a CSV file (`n,value` rows) plus a JSON sidecar holding
//! the metadata and the SHA-256 of the CSV bytes.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arith::{int_to_rational, pow_u64, ExactInt};

pub const FORMAT_VERSION: u32 = 1;
pub const SIEVE_METHOD: &str = "dirichlet-passes";
const CSV_HEADER: &str = "n,value";

#[derive(Debug, Error)]
pub enum SieveError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("table for nmax = {nmax} needs about {bytes} bytes, over the budget of {budget}")]
    OverBudget { nmax: u64, bytes: u64, budget: u64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad metadata in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch: metadata says {expected}, data hashes to {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("metadata mismatch on {field}: expected {expected}, found {found}")]
    MetadataMismatch {
        field: &'static str,
        expected: String,
        found: String,
    },
    #[error("malformed row {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveConfig {
    /// Upper bound on working memory for the two pass buffers.
    pub memory_budget_bytes: u64,
}

impl Default for SieveConfig {
    fn default() -> Self {
        SieveConfig {
            memory_budget_bytes: 4 << 30,
        }
    }
}

impl SieveConfig {
    pub fn estimate_bytes(nmax: u64) -> u64 {
        nmax.saturating_add(1).saturating_mul(2 * 16)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Values {
    Fixed(Vec<u128>),
    Big(Vec<BigUint>),
}

/// Immutable table of `B(l, n)` for `n = 1..=nmax`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArithTable {
    ell: u32,
    nmax: u64,
    values: Values,
}

/// JSON sidecar written next to the CSV data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub format_version: u32,
    pub ell: u32,
    pub nmax: u64,
    pub method: String,
    pub sha256: String,
}

impl ArithTable {
    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn nmax(&self) -> u64 {
        self.nmax
    }

    /// Whether the values are held in the fixed-width fast path.
    pub fn is_fixed_width(&self) -> bool {
        matches!(self.values, Values::Fixed(_))
    }

    /// `B(l, n)`; panics when `n` is outside `1..=nmax`.
    pub fn get(&self, n: u64) -> ExactInt {
        assert!(
            n >= 1 && n <= self.nmax,
            "index {n} outside 1..={}",
            self.nmax
        );
        let i = (n - 1) as usize;
        match &self.values {
            Values::Fixed(v) => ExactInt::from(v[i]),
            Values::Big(v) => v[i].clone(),
        }
    }

    pub fn get_u128(&self, n: u64) -> Option<u128> {
        let i = (n - 1) as usize;
        match &self.values {
            Values::Fixed(v) => v.get(i).copied(),
            Values::Big(v) => v.get(i).and_then(|b| b.to_u128()),
        }
    }

    /// `B(l, n) / n^(l-1)` rounded once to the nearest double.
    pub fn index_f64(&self, n: u64) -> f64 {
        const EXACT: u128 = 1 << 53;
        if let Some(b) = self.get_u128(n) {
            let den = (n as u128).checked_pow(self.ell - 1);
            if let Some(den) = den {
                if b <= EXACT && den <= EXACT {
                    return b as f64 / den as f64;
                }
            }
        }
        let ratio = int_to_rational(&self.get(n)) / int_to_rational(&pow_u64(n, self.ell - 1));
        ratio.to_f64().unwrap_or(f64::INFINITY)
    }

    /// `B(l, n) / n^(l-1)` exactly.
    pub fn index_exact(&self, n: u64) -> BigRational {
        int_to_rational(&self.get(n)) / int_to_rational(&pow_u64(n, self.ell - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = ExactInt> + '_ {
        (1..=self.nmax).map(move |n| self.get(n))
    }

    pub fn metadata(&self) -> TableMetadata {
        self.metadata_for(&self.to_csv())
    }

    fn metadata_for(&self, csv: &[u8]) -> TableMetadata {
        TableMetadata {
            format_version: FORMAT_VERSION,
            ell: self.ell,
            nmax: self.nmax,
            method: SIEVE_METHOD.to_string(),
            sha256: hex::encode(Sha256::digest(csv)),
        }
    }

    /// The CSV data file contents, byte for byte.
    pub fn to_csv(&self) -> Vec<u8> {
        use std::io::Write;
        let mut out = Vec::with_capacity(self.nmax as usize * 16 + 16);
        out.extend_from_slice(CSV_HEADER.as_bytes());
        out.push(b'\n');
        match &self.values {
            Values::Fixed(v) => {
                for (i, x) in v.iter().enumerate() {
                    writeln!(out, "{},{}", i + 1, x).expect("vec write");
                }
            }
            Values::Big(v) => {
                for (i, x) in v.iter().enumerate() {
                    writeln!(out, "{},{}", i + 1, x).expect("vec write");
                }
            }
        }
        out
    }

    fn from_big(ell: u32, values: Vec<BigUint>) -> Self {
        let nmax = values.len() as u64;
        let fixed: Option<Vec<u128>> = values.iter().map(|v| v.to_u128()).collect();
        let values = match fixed {
            Some(f) => Values::Fixed(f),
            None => Values::Big(values),
        };
        ArithTable { ell, nmax, values }
    }
}

/// Computes the table of `B(l, n)` for `n = 1..=nmax`.
pub fn sieve_b(ell: u32, nmax: u64, config: &SieveConfig) -> Result<ArithTable, SieveError> {
    if ell < 1 || nmax < 1 {
        return Err(SieveError::InvalidArgs(format!(
            "need ell >= 1 and nmax >= 1 (got ell = {ell}, nmax = {nmax})"
        )));
    }
    let bytes = SieveConfig::estimate_bytes(nmax);
    if bytes > config.memory_budget_bytes || nmax > usize::MAX as u64 / 2 {
        return Err(SieveError::OverBudget {
            nmax,
            bytes,
            budget: config.memory_budget_bytes,
        });
    }
    let values = match sieve_fixed(ell, nmax as usize) {
        Some(v) => Values::Fixed(v),
        None => Values::Big(sieve_big(ell, nmax as usize)),
    };
    Ok(ArithTable { ell, nmax, values })
}

// `t[m]` is the value at `m`; index 0 is unused.
fn sieve_fixed(ell: u32, n: usize) -> Option<Vec<u128>> {
    let mut cur = vec![1u128; n + 1];
    cur[0] = 0;
    let mut next = vec![0u128; n + 1];
    for r in 1..ell {
        let powers: Vec<u128> = (0..=n as u128)
            .map(|k| k.checked_pow(r))
            .collect::<Option<_>>()?;
        next.iter_mut().for_each(|x| *x = 0);
        for (d, &td) in cur.iter().enumerate().skip(1) {
            for (k, m) in (d..=n).step_by(d).enumerate() {
                let add = powers[k + 1].checked_mul(td)?;
                next[m] = next[m].checked_add(add)?;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur.remove(0);
    Some(cur)
}

fn sieve_big(ell: u32, n: usize) -> Vec<BigUint> {
    let mut cur = vec![BigUint::one(); n + 1];
    cur[0] = BigUint::zero();
    for r in 1..ell {
        let mut next = vec![BigUint::zero(); n + 1];
        for (d, cd) in cur.iter().enumerate().skip(1) {
            for (k, m) in (d..=n).step_by(d).enumerate() {
                next[m] += pow_u64(k as u64 + 1, r) * cd;
            }
        }
        cur = next;
    }
    cur.remove(0);
    cur
}

/// Path of the JSON sidecar for a CSV data file: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SieveError + '_ {
    move |source| SieveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_table(table: &ArithTable, path: &Path) -> Result<(), SieveError> {
    let csv = table.to_csv();
    let meta = table.metadata_for(&csv);
    fs::write(path, &csv).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let mut json = serde_json::to_vec_pretty(&meta).map_err(|source| SieveError::Json {
        path: side.clone(),
        source,
    })?;
    json.push(b'\n');
    fs::write(&side, json).map_err(io_err(&side))
}

/// Loads and validates a saved table. `expected_ell` rejects a table built
/// for a different `l`.
pub fn load_table(path: &Path, expected_ell: Option<u32>) -> Result<ArithTable, SieveError> {
    let side = sidecar_path(path);
    let raw = fs::read(&side).map_err(io_err(&side))?;
    let meta: TableMetadata = serde_json::from_slice(&raw).map_err(|source| SieveError::Json {
        path: side.clone(),
        source,
    })?;
    if meta.format_version != FORMAT_VERSION {
        return Err(SieveError::VersionMismatch {
            found: meta.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if let Some(ell) = expected_ell {
        if ell != meta.ell {
            return Err(SieveError::MetadataMismatch {
                field: "ell",
                expected: ell.to_string(),
                found: meta.ell.to_string(),
            });
        }
    }
    let data = fs::read(path).map_err(io_err(path))?;
    let found = hex::encode(Sha256::digest(&data));
    if found != meta.sha256 {
        return Err(SieveError::ChecksumMismatch {
            expected: meta.sha256,
            found,
        });
    }
    let text = std::str::from_utf8(&data).map_err(|e| SieveError::Malformed {
        line: 0,
        reason: e.to_string(),
    })?;
    let body = text.strip_suffix('\n').ok_or(SieveError::Malformed {
        line: 0,
        reason: "missing final newline".into(),
    })?;
    let mut lines = body.split('\n');
    if lines.next() != Some(CSV_HEADER) {
        return Err(SieveError::Malformed {
            line: 1,
            reason: format!("header must be `{CSV_HEADER}`"),
        });
    }
    let mut values = Vec::with_capacity(meta.nmax as usize);
    for (i, line) in lines.enumerate() {
        let bad = |reason: &str| SieveError::Malformed {
            line: i + 2,
            reason: reason.to_string(),
        };
        let (n, v) = line
            .split_once(',')
            .ok_or_else(|| bad("expected `n,value`"))?;
        let n: u64 = n.parse().map_err(|_| bad("n is not an integer"))?;
        if n != i as u64 + 1 {
            return Err(bad("rows must be sorted by n starting at 1"));
        }
        if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad("value is not a decimal integer"));
        }
        values.push(
            v.parse::<BigUint>()
                .map_err(|_| bad("value is not a decimal integer"))?,
        );
    }
    if values.len() as u64 != meta.nmax {
        return Err(SieveError::MetadataMismatch {
            field: "nmax",
            expected: meta.nmax.to_string(),
            found: values.len().to_string(),
        });
    }
    if values.first().is_none_or(|v| !v.is_one()) {
        return Err(SieveError::Malformed {
            line: 2,
            reason: "B(l, 1) must be 1".into(),
        });
    }
    Ok(ArithTable::from_big(meta.ell, values))
}
