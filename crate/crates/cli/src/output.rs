//! CSV and JSON emission. Every number goes through [`sci`] so output is
//! byte-stable across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Twelve significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

/// `sci` for optional cells; empty when absent.
pub fn sci_opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Serialize a table to CSV bytes.
pub fn csv_bytes<I>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |source| CliError::Csv {
        path: "<memory>".into(),
        source,
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(&row).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| CliError::io("<memory>", e.into_error()))
}

/// Output files of one command with their SHA-256 digests.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Manifest {
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn write_csv<I>(&mut self, dir: &Path, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let bytes = csv_bytes(header, rows)?;
        self.write_bytes(dir, name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, dir: &Path, name: &str, value: &T) -> Result<()> {
        let path = dir.join(name);
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
            path: path.clone(),
            source,
        })?;
        bytes.push(b'\n');
        self.write_bytes(dir, name, &bytes)
    }

    fn write_bytes(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sci(-0.143_188_419_492_767_45), "-1.43188419493e-1");
        assert_eq!(sci(2.0), "2.00000000000e0");
        assert_eq!(sci_opt(None), "");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_layout() {
        let bytes = csv_bytes(&["index", "value"], [vec!["1".into(), sci(0.5)]]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "index,value\n1,5.00000000000e-1\n");
    }
}
