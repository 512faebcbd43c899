//! Plain TSV inputs, table reading and output sinks.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use vrtkit_core::records::WordRow;
use vrtkit_core::table::{read_table, write_table, write_table_plain, TableRecord};

use crate::error::CliError;

/// A header-keyed TSV with `#` comment lines and no quoting.
pub struct Tsv {
    pub path: String,
    pub rows: Vec<Vec<String>>,
    lines: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Tsv {
    pub fn read(path: &Path) -> Result<Tsv, CliError> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        Tsv::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: io::Read>(reader: R, origin: &str) -> Result<Tsv, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .comment(Some(b'#'))
            .from_reader(reader);
        let csv_err = |source: csv::Error| CliError::Csv {
            path: origin.to_string(),
            source,
        };
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let (mut rows, mut lines) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            lines.push(rec.position().map_or(0, |p| p.line() as usize));
            rows.push(rec.iter().map(str::to_string).collect());
        }
        let index = header.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        Ok(Tsv {
            path: origin.to_string(),
            rows,
            lines,
            index,
        })
    }

    pub fn column(&self, column: &str) -> Result<usize, CliError> {
        self.index.get(column).copied().ok_or_else(|| CliError::Input {
            path: self.path.clone(),
            line: 1,
            message: format!("missing column '{column}'"),
        })
    }

    pub fn bad(&self, i: usize, message: impl Into<String>) -> CliError {
        CliError::Input {
            path: self.path.clone(),
            line: self.lines[i],
            message: message.into(),
        }
    }
}

/// Empty and `NA` cells read as missing.
pub fn cell(row: &[String], col: Option<usize>) -> Option<&str> {
    col.and_then(|c| row.get(c))
        .map(String::as_str)
        .filter(|s| !s.is_empty() && *s != "NA")
}

pub fn read_rows<R: TableRecord>(path: &Path) -> Result<(Vec<String>, Vec<R>), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let t = read_table::<R, _>(file).map_err(|e| CliError::table(path, e))?;
    Ok((t.provenance, t.rows))
}

/// Vertical rows of every input, in order.
pub fn read_vertical(paths: &[PathBuf]) -> Result<Vec<WordRow>, CliError> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_rows::<WordRow>(p)?.1);
    }
    Ok(rows)
}

/// Destination of a single output: a file or stdout.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn is_gz(path: Option<&Path>) -> bool {
    path.and_then(Path::extension).is_some_and(|e| e == "gz")
}

/// Writes a schema table, compressed when the path ends in `.gz`.
pub fn emit_table<R: TableRecord>(rows: &[R], path: Option<&Path>, provenance: &[String]) -> Result<(), CliError> {
    let shown = path.unwrap_or(Path::new("<stdout>"));
    let mut out = open_output(path)?;
    let res = if is_gz(path) {
        write_table(rows, &mut out, provenance)
    } else {
        write_table_plain(rows, &mut out, provenance)
    };
    res.map_err(|e| CliError::table(shown, e))?;
    out.flush().map_err(|e| CliError::io(shown, e))
}

/// Writes a free-form TSV: provenance, header, rows.
pub fn emit_tsv(
    path: Option<&Path>,
    provenance: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let shown = path.unwrap_or(Path::new("<stdout>"));
    let mut out = open_output(path)?;
    let mut text = String::new();
    for p in provenance {
        text.push_str("# ");
        text.push_str(p);
        text.push('\n');
    }
    text.push_str(&header.join("\t"));
    text.push('\n');
    for r in rows {
        text.push_str(&r.join("\t"));
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(shown, e))?;
    out.flush().map_err(|e| CliError::io(shown, e))
}

/// Fixed-precision number, `NA` when missing or not finite.
pub fn num(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "NA".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_tsv_with_comments() {
        let text = "# made by hand\nseg_id\ttext\nA\tone \"quoted\" word\nB\tNA\n";
        let t = Tsv::from_reader(text.as_bytes(), "x").unwrap();
        assert_eq!(t.column("seg_id").unwrap(), 0);
        let c = t.column("text").unwrap();
        assert_eq!(cell(&t.rows[0], Some(c)), Some("one \"quoted\" word"));
        assert_eq!(cell(&t.rows[1], Some(c)), None);
        assert!(t.bad(1, "x").to_string().starts_with("x:4:"));
        assert!(t.column("nope").is_err());
    }

    #[test]
    fn ragged_rows_are_errors() {
        assert!(Tsv::from_reader("a\tb\n1\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(num(Some(1.23456), 2), "1.23");
        assert_eq!(num(None, 2), "NA");
        assert_eq!(num(Some(f64::NAN), 2), "NA");
    }
}
