use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use omap::{CoeffVec, EigenLaw, SpectralBasis};
use serde::Serialize;

use crate::CliError;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn law_label(basis: &SpectralBasis) -> String {
    match &basis.law {
        EigenLaw::ExactPower { p } => format!("exact_power(p={},d={})", fmt_f64(*p), basis.d),
        EigenLaw::Explicit(v) => format!("explicit(len={},d={})", v.len(), basis.d),
    }
}

/// One coefficient per line after a `#` header carrying the truncation and law.
pub fn write_coeffs(path: &Path, coeffs: &CoeffVec, basis: &SpectralBasis, label: &str) -> Result<(), CliError> {
    let mut body = format!("# n={} law={} kind={}\n", coeffs.len(), law_label(basis), label);
    for x in coeffs.iter() {
        writeln!(body, "{}", fmt_f64(*x)).unwrap();
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

pub fn read_coeffs(path: &Path) -> Result<CoeffVec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::validation("coefficient file is numeric", format!("{}:{}: `{line}`", path.display(), i + 1)))?;
        values.push(v);
    }
    CoeffVec::new(values).map_err(CliError::from)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value).expect("serializable");
    body.push('\n');
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    w.write_record(header).map_err(|e| CliError::io(path, e.into()))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `<out>.<suffix>` next to the primary output.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    out.with_file_name(name)
}
