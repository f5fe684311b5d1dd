//! Streaming CSV output. Floats are written with 17 significant digits so
//! every value parses back to the identical `f64`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Field {
    pub fn render(&self) -> String {
        match self {
            Field::Float(v) => format_f64(*v),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
            Field::Empty => String::new(),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

pub type Row = Vec<Field>;

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
/// Infinities and NaN come out as `inf`, `-inf` and `NaN`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// The `# generated ...` comment line written above the header.
pub fn timestamp_comment() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("generated at unix time {secs}")
}

/// Writes an optional `#` comment line, the header and then each row as it
/// arrives. Returns the writer after flushing. The first failing row aborts
/// the output with its error.
pub fn emit_csv<W, I>(mut out: W, comment: Option<&str>, header: &[&str], rows: I) -> Result<W, CliError>
where
    W: Write,
    I: IntoIterator<Item = Result<Row, CliError>>,
{
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    let mut cells: Vec<String> = Vec::with_capacity(header.len());
    for row in rows {
        let row = row?;
        debug_assert_eq!(row.len(), header.len());
        cells.clear();
        cells.extend(row.iter().map(Field::render));
        w.write_record(&cells)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

/// [`emit_csv`] to a file, or to stdout when `path` is `None`.
pub fn emit_csv_to<I>(path: Option<&Path>, comment: Option<&str>, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Result<Row, CliError>>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Output {
                path: p.to_path_buf(),
                source: e,
            })?;
            emit_csv(BufWriter::new(file), comment, header, rows)?;
        }
        None => {
            let stdout = io::stdout();
            emit_csv(BufWriter::new(stdout.lock()), comment, header, rows)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_with_seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(0.0), "0.0000000000000000e0");
        assert_eq!(format_f64(f64::INFINITY), "inf");
        for v in [1.0 / 3.0, 5e-324, f64::MAX, -2.5e17, 0.0053965] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn comment_precedes_header() {
        let rows = vec![Ok(vec![Field::from(1u64), Field::from("a,b")])];
        let out = emit_csv(Vec::new(), Some("note"), &["k", "v"], rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "# note\nk,v\n1,\"a,b\"\n");
    }

    #[test]
    fn row_error_aborts() {
        let rows = vec![Ok(vec![Field::Empty]), Err(CliError::Usage("boom".into()))];
        assert!(emit_csv(Vec::new(), None, &["x"], rows).is_err());
    }
}
