//! Plain-text point files.
//!
//! Data files hold one `x,y` pair per row with an optional `x,y` header.
//! Lines starting with `#` and blank lines are ignored. The ground-truth
//! sidecar written next to generated data uses the same dialect with a
//! `# true_line a=.. b=.. c=..` comment, an `x,y,outlier` header and a 0/1
//! outlier flag per row.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{DataPoint, Dataset, LineParams};
use crate::synth::SyntheticData;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_field(s: &str, line: usize, what: &str) -> Result<f64, IoError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} value {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite {what} value")));
    }
    Ok(v)
}

fn is_header(rec: &csv::StringRecord) -> bool {
    rec.len() >= 2 && rec[0].eq_ignore_ascii_case("x") && rec[1].eq_ignore_ascii_case("y")
}

/// Data records with comments and an optional header stripped, paired with
/// their 1-based line numbers.
fn rows(text: &str) -> Result<Vec<(usize, csv::StringRecord)>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut first = true;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if std::mem::take(&mut first) && is_header(&rec) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Dataset, IoError> {
    let mut points = Vec::new();
    for (line, rec) in rows(text)? {
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        points.push(DataPoint::new(
            parse_field(&rec[0], line, "x")?,
            parse_field(&rec[1], line, "y")?,
        ));
    }
    Ok(Dataset { points })
}

pub fn read_csv(path: &Path) -> Result<Dataset, IoError> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Shortest round-trip decimal formatting, so parsing gives back the same
/// bits.
pub fn write_csv(d: &Dataset) -> String {
    let mut out = String::from("x,y\n");
    for p in d.iter() {
        let _ = writeln!(out, "{},{}", p.x, p.y);
    }
    out
}

pub fn write_truth(data: &SyntheticData) -> String {
    let s = &data.spec;
    let l = s.true_line;
    let mut out = String::new();
    let _ = writeln!(out, "# true_line a={} b={} c={}", l.a, l.b, l.c);
    let _ = writeln!(
        out,
        "# n_total={} n_outliers={} sigma={} box={} seed={}",
        s.n_total, s.n_outliers, s.inlier_noise_sigma, s.outlier_box, s.seed
    );
    out.push_str("x,y,outlier\n");
    for (p, o) in data.dataset.iter().zip(&data.is_outlier) {
        let _ = writeln!(out, "{},{},{}", p.x, p.y, u8::from(*o));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub line: LineParams,
    pub dataset: Dataset,
    pub is_outlier: Vec<bool>,
}

pub fn parse_truth(text: &str) -> Result<Truth, IoError> {
    let mut line = None;
    for (i, raw) in text.lines().enumerate() {
        if let Some(rest) = raw.trim().strip_prefix("# true_line") {
            let mut abc = [f64::NAN; 3];
            for tok in rest.split_whitespace() {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| parse_err(i + 1, format!("malformed token {tok:?}")))?;
                let slot = match k {
                    "a" => 0,
                    "b" => 1,
                    "c" => 2,
                    _ => return Err(parse_err(i + 1, format!("unknown key {k:?}"))),
                };
                abc[slot] = parse_field(v, i + 1, k)?;
            }
            if abc.iter().any(|v| v.is_nan()) {
                return Err(parse_err(i + 1, "true_line needs a, b and c"));
            }
            line = Some(
                LineParams::new(abc[0], abc[1], abc[2])
                    .map_err(|e| parse_err(i + 1, e.to_string()))?,
            );
        }
    }
    let line = line.ok_or_else(|| parse_err(0, "missing '# true_line' comment"))?;
    let mut points = Vec::new();
    let mut is_outlier = Vec::new();
    for (ln, rec) in rows(text)? {
        if rec.len() != 3 {
            return Err(parse_err(ln, format!("expected 3 fields, found {}", rec.len())));
        }
        points.push(DataPoint::new(
            parse_field(&rec[0], ln, "x")?,
            parse_field(&rec[1], ln, "y")?,
        ));
        is_outlier.push(match &rec[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(ln, format!("invalid outlier flag {other:?}"))),
        });
    }
    Ok(Truth {
        line,
        dataset: Dataset { points },
        is_outlier,
    })
}
