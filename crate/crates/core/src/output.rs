//! Bit-stable text output: float formatting, CSV conventions, manifests.
//!
//! All CSVs use a header row, comma separators, LF line endings and floats
//! printed with 17 significant digits so that a 64-bit value round-trips
//! exactly and reruns diff clean.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Formats a float with 17 significant digits (exact `f64` round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `dir/name`, creating the directory if needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Hex-encoded SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Accumulates a run manifest: the resolved configuration plus seed and
/// checkpoint hashes, written beside the run's CSVs. The manifest is itself
/// a valid config file, so a run can be reproduced from it directly.
pub struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            lines: vec![
                "# run manifest: rerun with `impact-hedger <command> --config <this file>`"
                    .to_string(),
                format!("run.command = {command}"),
            ],
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    /// Records every resolved `key = value` pair of the run configuration.
    pub fn extend_config(&mut self, entries: &[(String, String)]) {
        for (k, v) in entries {
            self.lines.push(format!("{k} = {v}"));
        }
    }

    /// Records a checkpoint the run consumed or produced.
    pub fn checkpoint_hash(&mut self, label: &str, path: &Path) -> io::Result<()> {
        let hash = sha256_file(path)?;
        self.lines
            .push(format!("hash.{label} = sha256:{hash} {}", path.display()));
        Ok(())
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        write_file(dir, "manifest.conf", &text)
    }
}

/// Convenience buffer for building a CSV with the crate's conventions.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        buf.push_str(header);
        buf.push('\n');
        Self { buf }
    }

    /// Appends a row of already-formatted cells.
    pub fn row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }

    pub fn write_to(&self, dir: &Path, name: &str) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(self.buf.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatted_floats_round_trip_exactly() {
        for x in [0.1, -3.75e-300, 1234.5678, f64::MIN_POSITIVE, 0.0] {
            let parsed: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }

    proptest! {
        #[test]
        fn any_finite_float_round_trips(bits: u64) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let parsed: f64 = fmt_f64(x).parse().unwrap();
            prop_assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_rows_use_lf_only() {
        let mut csv = Csv::new("a,b");
        csv.row(&["1".into(), "2".into()]);
        let text = csv.finish();
        assert_eq!(text, "a,b\n1,2\n");
        assert!(!text.contains('\r'));
    }
}
