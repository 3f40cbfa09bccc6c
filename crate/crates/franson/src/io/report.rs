//! Plain-text analysis outputs: `key = value` stats files and sweep CSVs.
//!
//! Both formats are line-oriented and diff-friendly. Floating-point values
//! are written with Rust's shortest round-trip formatting, so reading a
//! file back reproduces the original numbers bit-for-bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::SweepRow;
use crate::stats::FringeFit;

const SWEEP_HEADER: &str =
    "phase,constructive_counts,destructive_counts,pairs_per_basis,constructive_rate,destructive_rate";

/// Renders stats lines as `key = value` text.
///
/// Keys must be single tokens without `=`; values must be single lines.
pub fn render_stats(lines: &[(String, String)]) -> Result<String> {
    let mut out = String::new();
    for (key, value) in lines {
        if key.is_empty()
            || key.contains('=')
            || key.chars().any(|c| c.is_whitespace())
        {
            return Err(Error::param(
                "stats",
                format!("key {key:?} must be a single token without '='"),
            ));
        }
        if value.contains(['\n', '\r']) {
            return Err(Error::param(
                "stats",
                format!("value for {key:?} must be a single line"),
            ));
        }
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(value);
        out.push('\n');
    }
    Ok(out)
}

/// Writes stats lines to a file.
pub fn write_stats(path: &Path, lines: &[(String, String)]) -> Result<()> {
    let text = render_stats(lines)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a stats file back into a key-value map. Blank lines and `#`
/// comments are ignored.
pub fn read_stats(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Pgm {
            path: path.to_path_buf(),
            reason: format!("stats line {} has no '=': {line:?}", i + 1),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Renders a sweep as CSV, with the fringe fit (when present) appended as
/// `# fit_*=` comment lines.
pub fn render_sweep_csv(rows: &[SweepRow], fit: Option<&FringeFit>) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::param("rows", "a sweep table needs at least one row"));
    }
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        if !row.phase.is_finite() {
            return Err(Error::param(
                "rows",
                format!("phase {} is not finite", row.phase),
            ));
        }
        if row.pairs_per_basis == 0 {
            return Err(Error::param("rows", "pairs_per_basis must be positive"));
        }
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.phase,
            row.constructive_counts,
            row.destructive_counts,
            row.pairs_per_basis,
            row.constructive_rate(),
            row.destructive_rate()
        ));
    }
    if let Some(fit) = fit {
        out.push_str(&format!("# fit_offset={}\n", fit.offset));
        out.push_str(&format!("# fit_amplitude={}\n", fit.amplitude));
        out.push_str(&format!("# fit_phase={}\n", fit.phase));
        out.push_str(&format!("# fit_visibility={}\n", fit.visibility));
    }
    Ok(out)
}

/// Writes a sweep CSV to a file.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], fit: Option<&FringeFit>) -> Result<()> {
    let text = render_sweep_csv(rows, fit)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a sweep CSV written by [`write_sweep_csv`].
pub fn read_sweep_csv(path: &Path) -> Result<(Vec<SweepRow>, Option<FringeFit>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line_no: usize, line: &str| Error::Pgm {
        path: path.to_path_buf(),
        reason: format!("sweep line {line_no} is malformed: {line:?}"),
    };
    let mut rows = Vec::new();
    let mut fit_fields: BTreeMap<String, f64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == SWEEP_HEADER {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                if let Ok(v) = value.trim().parse() {
                    fit_fields.insert(key.trim().to_string(), v);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(malformed(i + 1, line));
        }
        let row = SweepRow {
            phase: fields[0].parse().map_err(|_| malformed(i + 1, line))?,
            constructive_counts: fields[1].parse().map_err(|_| malformed(i + 1, line))?,
            destructive_counts: fields[2].parse().map_err(|_| malformed(i + 1, line))?,
            pairs_per_basis: fields[3].parse().map_err(|_| malformed(i + 1, line))?,
        };
        rows.push(row);
    }
    let fit = match (
        fit_fields.get("fit_offset"),
        fit_fields.get("fit_amplitude"),
        fit_fields.get("fit_phase"),
        fit_fields.get("fit_visibility"),
    ) {
        (Some(&offset), Some(&amplitude), Some(&phase), Some(&visibility)) => Some(FringeFit {
            offset,
            amplitude,
            phase,
            visibility,
        }),
        _ => None,
    };
    Ok((rows, fit))
}
