//! Text file formats for priors, posteriors, labels and traces.
//!
//! Every real is written with Rust's shortest round-trip decimal formatting,
//! so `read(write(x)) == x` bit for bit. Readers accept LF or CRLF line endings
//! and a leading UTF-8 byte order mark. Parse errors carry 1-based line and
//! column numbers, where the column is the first character of the offending
//! field.
//!
//! Writers go through [`write_atomic`]: a temporary file in the destination
//! directory, renamed over the target once complete.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{
    EstimationTrace, LabelVector, ObjectiveKind, PosteriorMatrix, PriorVector, Termination,
    TraceRecord,
};
use crate::error::{Error, Result};

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, column, message: message.into() }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes `contents` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Lines of `text` with their 1-based numbers, BOM and trailing CR removed.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

/// Comma-separated fields with the 1-based column of each field's start.
fn fields(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in line.split(',') {
        let leading = piece.len() - piece.trim_start().len();
        let column = line[..start + leading].chars().count() + 1;
        out.push((column, piece.trim()));
        start += piece.len() + 1;
    }
    out
}

fn parse_real(path: &Path, line: usize, column: usize, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_error(path, line, column, format!("expected a real number, found {token:?}")))
}

// --- priors -----------------------------------------------------------------

/// One real per line; `#` starts a comment, blank lines are skipped.
pub fn parse_prior(text: &str, path: &Path) -> Result<PriorVector> {
    let mut values = Vec::new();
    for (line_no, line) in numbered_lines(text) {
        let content = line.split('#').next().unwrap_or("");
        let token = content.trim();
        if token.is_empty() {
            continue;
        }
        let column = content.len() - content.trim_start().len() + 1;
        if token.split_whitespace().nth(1).is_some() {
            return Err(parse_error(path, line_no, column, "expected one value per line"));
        }
        values.push(parse_real(path, line_no, column, token)?);
    }
    PriorVector::new(values)
}

pub fn read_prior(path: &Path) -> Result<PriorVector> {
    parse_prior(&read_text(path)?, path)
}

pub fn format_prior(prior: &PriorVector) -> String {
    let mut out = String::new();
    for &v in prior.values() {
        out.push_str(&format_f64(v));
        out.push('\n');
    }
    out
}

pub fn write_prior(path: &Path, prior: &PriorVector) -> Result<()> {
    write_atomic(path, &format_prior(prior))
}

// --- posteriors -------------------------------------------------------------

/// CSV of N rows by K columns. A first row containing any non-numeric field is
/// treated as a header and skipped.
pub fn parse_posteriors(text: &str, path: &Path) -> Result<PosteriorMatrix> {
    let mut grid: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first = true;
    for (line_no, line) in numbered_lines(text) {
        if line.trim().is_empty() {
            continue;
        }
        let fields = fields(line);
        if first {
            first = false;
            if fields.iter().any(|(_, f)| f.parse::<f64>().is_err()) {
                width = Some(fields.len());
                continue;
            }
        }
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(parse_error(
                path,
                line_no,
                1,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let row = fields
            .iter()
            .map(|&(column, token)| parse_real(path, line_no, column, token))
            .collect::<Result<Vec<_>>>()?;
        grid.push(row);
    }
    PosteriorMatrix::from_rows(&grid)
}

pub fn read_posteriors(path: &Path) -> Result<PosteriorMatrix> {
    parse_posteriors(&read_text(path)?, path)
}

/// Header `class_0,...,class_{K-1}` followed by one row per sample.
pub fn format_posteriors(posteriors: &PosteriorMatrix) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..posteriors.cols()).map(|k| format!("class_{k}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in posteriors.iter_rows() {
        push_joined(&mut out, row.iter().map(|&v| format_f64(v)));
    }
    out
}

pub fn write_posteriors(path: &Path, posteriors: &PosteriorMatrix) -> Result<()> {
    write_atomic(path, &format_posteriors(posteriors))
}

fn push_joined(out: &mut String, items: impl Iterator<Item = String>) {
    let mut sep = "";
    for item in items {
        out.push_str(sep);
        out.push_str(&item);
        sep = ",";
    }
    out.push('\n');
}

// --- labels -----------------------------------------------------------------

/// One nonnegative integer per line, each `< classes`.
pub fn parse_labels(text: &str, path: &Path, classes: usize) -> Result<LabelVector> {
    let mut labels = Vec::new();
    for (line_no, line) in numbered_lines(text) {
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let column = line.len() - line.trim_start().len() + 1;
        let label: usize = token.parse().map_err(|_| {
            parse_error(path, line_no, column, format!("expected a class index, found {token:?}"))
        })?;
        if label >= classes {
            return Err(parse_error(
                path,
                line_no,
                column,
                format!("class index {label} out of range for {classes} classes"),
            ));
        }
        labels.push(label);
    }
    LabelVector::new(labels, classes)
}

pub fn read_labels(path: &Path, classes: usize) -> Result<LabelVector> {
    parse_labels(&read_text(path)?, path, classes)
}

pub fn format_labels(labels: &LabelVector) -> String {
    let mut out = String::new();
    for l in labels.labels() {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    write_atomic(path, &format_labels(labels))
}

// --- traces -----------------------------------------------------------------

const TERMINATION_KEY: &str = "# termination:";

/// Trace CSV: a `# termination: ...` comment, a header
/// `iteration,<objective>,max_change,p_0,...`, then one row per iteration.
/// Estimate fields are empty on thinned rows.
pub fn format_trace(trace: &EstimationTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TERMINATION_KEY} {}", trace.termination().as_str());
    let mut header = vec![
        "iteration".to_string(),
        trace.objective_kind().column_name().to_string(),
        "max_change".to_string(),
    ];
    header.extend((0..trace.classes()).map(|k| format!("p_{k}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for r in trace.records() {
        let mut row = vec![r.iteration.to_string(), format_f64(r.objective), format_f64(r.max_change)];
        match &r.estimate {
            Some(p) => row.extend(p.values().iter().map(|&v| format_f64(v))),
            None => row.extend(std::iter::repeat_n(String::new(), trace.classes())),
        }
        push_joined(&mut out, row.into_iter());
    }
    out
}

pub fn write_trace(path: &Path, trace: &EstimationTrace) -> Result<()> {
    write_atomic(path, &format_trace(trace))
}

pub fn parse_trace(text: &str, path: &Path) -> Result<EstimationTrace> {
    let mut termination = None;
    let mut header: Option<(ObjectiveKind, usize)> = None;
    let mut records = Vec::new();
    for (line_no, line) in numbered_lines(text) {
        if let Some(rest) = line.strip_prefix(TERMINATION_KEY) {
            termination = Some(match rest.trim() {
                "converged" => Termination::Converged,
                "max-iterations" => Termination::MaxIterations,
                other => {
                    return Err(parse_error(path, line_no, 1, format!("unknown termination {other:?}")))
                }
            });
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = fields(line);
        let Some((_, classes)) = header else {
            if fields.len() < 5 || fields[0].1 != "iteration" || fields[2].1 != "max_change" {
                return Err(parse_error(path, line_no, 1, "malformed trace header"));
            }
            let kind = ObjectiveKind::from_column_name(fields[1].1).ok_or_else(|| {
                parse_error(path, line_no, fields[1].0, format!("unknown objective {:?}", fields[1].1))
            })?;
            header = Some((kind, fields.len() - 3));
            continue;
        };
        if fields.len() != classes + 3 {
            return Err(parse_error(
                path,
                line_no,
                1,
                format!("expected {} fields, found {}", classes + 3, fields.len()),
            ));
        }
        let iteration = fields[0].1.parse::<usize>().map_err(|_| {
            parse_error(path, line_no, fields[0].0, format!("expected an iteration index, found {:?}", fields[0].1))
        })?;
        let objective = parse_real(path, line_no, fields[1].0, fields[1].1)?;
        let max_change = parse_real(path, line_no, fields[2].0, fields[2].1)?;
        let estimate_fields = &fields[3..];
        let estimate = if estimate_fields.iter().all(|(_, f)| f.is_empty()) {
            None
        } else {
            let values = estimate_fields
                .iter()
                .map(|&(c, f)| parse_real(path, line_no, c, f))
                .collect::<Result<Vec<_>>>()?;
            Some(PriorVector::new(values)?)
        };
        records.push(TraceRecord { iteration, estimate, objective, max_change });
    }
    let (kind, classes) = header.ok_or_else(|| parse_error(path, 1, 1, "missing trace header"))?;
    let termination = termination.ok_or_else(|| parse_error(path, 1, 1, "missing termination line"))?;
    EstimationTrace::new(records, termination, kind, classes)
}

pub fn read_trace(path: &Path) -> Result<EstimationTrace> {
    parse_trace(&read_text(path)?, path)
}
