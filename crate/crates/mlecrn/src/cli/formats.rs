//! File formats for the command-line pipeline: matrix files, data vectors,
//! rate overrides, CSV trajectories, and fixed-precision JSON.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::inference::DataVector;
use crate::matrix::{DesignMatrix, MatrixError};

/// Parse failure in a structured input file, located by line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for FileParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for FileParseError {}

fn parse_err(line: usize, message: impl Into<String>) -> FileParseError {
    FileParseError { line, message: message.into() }
}

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("{0}")]
    Parse(FileParseError),
    #[error(transparent)]
    Invalid(#[from] MatrixError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Strips a trailing `#` comment and surrounding whitespace.
fn significant(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => line[..pos].trim(),
        None => line.trim(),
    }
}

/// Matrix text: a `m n` header line, then m rows of n integers.
/// Blank lines and `#` comments are ignored.
pub fn parse_matrix_text(text: &str) -> Result<DesignMatrix, MatrixFileError> {
    let mut rows: Vec<Vec<i64>> = Vec::new();
    let mut header: Option<(usize, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = significant(raw);
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match header {
            None => {
                if tokens.len() != 2 {
                    return Err(MatrixFileError::Parse(parse_err(
                        line_no,
                        format!("expected header `rows cols`, got `{line}`"),
                    )));
                }
                let m: usize = tokens[0].parse().map_err(|_| {
                    MatrixFileError::Parse(parse_err(
                        line_no,
                        format!("row count `{}` is not a positive integer", tokens[0]),
                    ))
                })?;
                let n: usize = tokens[1].parse().map_err(|_| {
                    MatrixFileError::Parse(parse_err(
                        line_no,
                        format!("column count `{}` is not a positive integer", tokens[1]),
                    ))
                })?;
                if m == 0 || n == 0 {
                    return Err(MatrixFileError::Parse(parse_err(
                        line_no,
                        "matrix dimensions must be positive",
                    )));
                }
                header = Some((m, n));
            }
            Some((m, n)) => {
                if rows.len() == m {
                    return Err(MatrixFileError::Parse(parse_err(
                        line_no,
                        format!("unexpected extra row; header declared {m} rows"),
                    )));
                }
                if tokens.len() != n {
                    return Err(MatrixFileError::Parse(parse_err(
                        line_no,
                        format!("expected {n} entries, got {}", tokens.len()),
                    )));
                }
                let mut row = Vec::with_capacity(n);
                for (col, tok) in tokens.iter().enumerate() {
                    let v: i64 = tok.parse().map_err(|_| {
                        MatrixFileError::Parse(parse_err(
                            line_no,
                            format!("entry {} (`{tok}`) is not an integer", col + 1),
                        ))
                    })?;
                    row.push(v);
                }
                rows.push(row);
            }
        }
    }
    let (m, _) = header.ok_or_else(|| {
        MatrixFileError::Parse(parse_err(1, "empty matrix file"))
    })?;
    if rows.len() != m {
        return Err(MatrixFileError::Parse(parse_err(
            text.lines().count(),
            format!("header declared {m} rows, found {}", rows.len()),
        )));
    }
    Ok(DesignMatrix::new(rows)?)
}

pub fn parse_matrix_file(path: &Path) -> Result<DesignMatrix, MatrixFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| MatrixFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix_text(&text)
}

/// A data vector: integer tokens are counts, any real-valued token makes the
/// whole vector a frequency point that is used directly as the initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum DataInput {
    Counts(DataVector),
    Frequencies(Vec<f64>),
}

impl DataInput {
    pub fn len(&self) -> usize {
        match self {
            DataInput::Counts(u) => u.len(),
            DataInput::Frequencies(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The simplex point `u/|u|1` (or the frequencies verbatim).
    pub fn frequencies(&self) -> Vec<f64> {
        match self {
            DataInput::Counts(u) => u.frequencies(),
            DataInput::Frequencies(q) => q.clone(),
        }
    }

    pub fn counts(&self) -> Option<&DataVector> {
        match self {
            DataInput::Counts(u) => Some(u),
            DataInput::Frequencies(_) => None,
        }
    }
}

pub fn parse_data_text(text: &str) -> Result<DataInput, String> {
    let tokens: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err("data vector is empty".into());
    }
    if tokens.iter().all(|t| t.parse::<u64>().is_ok()) {
        let counts: Vec<u64> = tokens.iter().map(|t| t.parse().unwrap()).collect();
        return DataVector::new(counts).map(DataInput::Counts).map_err(|e| e.to_string());
    }
    let mut q = Vec::with_capacity(tokens.len());
    for tok in &tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| format!("`{tok}` is neither an integer count nor a real frequency"))?;
        if !v.is_finite() || v < 0.0 {
            return Err(format!("frequency `{tok}` must be finite and nonnegative"));
        }
        q.push(v);
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!(
            "frequencies must sum to 1 (got {sum}); use integer counts for raw data"
        ));
    }
    Ok(DataInput::Frequencies(q))
}

/// Inline vector or path to a file holding one.
pub fn resolve_data(arg: &str) -> Result<DataInput, String> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        return parse_data_text(&text)
            .map_err(|e| format!("{}: {e}", path.display()));
    }
    parse_data_text(arg)
}

/// Rate override file: one positive real per reaction, whitespace or comma
/// separated, `#` comments allowed.
pub fn parse_rates_text(text: &str) -> Result<Vec<f64>, String> {
    let mut rates = Vec::new();
    for raw in text.lines() {
        for tok in significant(raw)
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok.parse().map_err(|_| format!("rate `{tok}` is not a number"))?;
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("rate `{tok}` must be finite and positive"));
            }
            rates.push(v);
        }
    }
    if rates.is_empty() {
        return Err("rate file holds no rates".into());
    }
    Ok(rates)
}

/// `zero` or a comma-separated list of `m` nonnegative reals.
pub fn parse_theta0(arg: &str, m: usize) -> Result<Vec<f64>, String> {
    if arg.trim() == "zero" {
        return Ok(vec![0.0; m]);
    }
    let tokens: Vec<&str> = arg
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.len() != m {
        return Err(format!("theta0 needs {m} entries, got {}", tokens.len()));
    }
    let mut theta = Vec::with_capacity(m);
    for tok in &tokens {
        let v: f64 = tok.parse().map_err(|_| format!("theta0 entry `{tok}` is not a number"))?;
        if !v.is_finite() || v < 0.0 {
            return Err(format!("theta0 entry `{tok}` must be finite and nonnegative"));
        }
        theta.push(v);
    }
    Ok(theta)
}

/// JSON formatter printing every float with 17 significant digits so that
/// identical runs emit byte-identical documents and values round-trip.
struct SigFig17;

impl serde_json::ser::Formatter for SigFig17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFig17);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    String::from_utf8(buf).expect("serializer emits utf8")
}

/// CSV with header `t,<species...>` and 17-significant-digit values.
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    species: &[String],
    trajectory: &Trajectory,
) -> io::Result<()> {
    write!(out, "t")?;
    for name in species {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (t, state) in trajectory.times.iter().zip(&trajectory.states) {
        write!(out, "{t:.16e}")?;
        for v in state {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
