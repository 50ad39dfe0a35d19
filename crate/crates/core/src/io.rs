//! Plain-text matrix files and CSV output.
//!
//! A matrix file holds one or more blocks. Each block starts with a
//! `rows cols` line followed by `rows * cols` whitespace-separated entries in
//! row-major order. Anything after `#` on a line is ignored.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::Mat;

/// Formats a float with 17 significant digits so it reloads bit-exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_matrices(text: &str) -> Result<Vec<Mat>> {
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(|tok| (idx + 1, tok)));
    }
    let mut out = Vec::new();
    let mut it = tokens.into_iter();
    while let Some((line, tok)) = it.next() {
        let rows = parse_dim(line, tok)?;
        let (line, tok) = it.next().ok_or(Error::Parse { line, msg: "missing column count".into() })?;
        let cols = parse_dim(line, tok)?;
        let mut last_line = line;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows * cols {
            let (line, tok) = it.next().ok_or_else(|| Error::Parse {
                line: last_line,
                msg: format!("expected {} entries for a {rows}x{cols} block, found {i}", rows * cols),
            })?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("invalid number `{tok}`") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite entry `{tok}`") });
            }
            data.push(v);
            last_line = line;
        }
        out.push(Mat::from_row_slice(rows, cols, &data));
    }
    Ok(out)
}

fn parse_dim(line: usize, tok: &str) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(d) if d > 0 => Ok(d),
        _ => Err(Error::Parse { line, msg: format!("invalid dimension `{tok}`") }),
    }
}

pub fn read_matrices(path: &Path) -> Result<Vec<Mat>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrices(&text)
}

pub fn format_matrix(m: &Mat) -> String {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_float(m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_matrices(path: &Path, mats: &[&Mat]) -> Result<()> {
    let text: String = mats.iter().map(|m| format_matrix(m)).collect();
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// A CSV column value.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(u64),
    Float(f64),
    Text(String),
    /// Missing value, written as an empty cell.
    Empty,
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => fmt_float(*v),
            Field::Text(s) => s.clone(),
            Field::Empty => String::new(),
        }
    }
}

impl From<Option<f64>> for Field {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Field::Empty, Field::Float)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Int(v as u64)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
    width: usize,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header).map_err(csv_err)?;
        Ok(Self { inner, width: header.len() })
    }

    pub fn row(&mut self, fields: &[Field]) -> Result<()> {
        if fields.len() != self.width {
            return Err(Error::Dimension(format!("CSV row has {} fields, header has {}", fields.len(), self.width)));
        }
        self.inner.write_record(fields.iter().map(|f| f.render())).map_err(csv_err)
    }

    pub fn finish(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_blocks_with_comments() {
        let text = "# dynamics\n2 2\n1 2\n3 4 # trailing\n1 1\n0.5\n";
        let mats = parse_matrices(text).unwrap();
        assert_eq!(mats.len(), 2);
        assert_eq!(mats[0], Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(mats[1][(0, 0)], 0.5);
    }

    #[test]
    fn reports_line_numbers() {
        match parse_matrices("1 1\n2\n2 2\n1 x 3 4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse_matrices("2 2\n1 2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_matrices("0 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn writes_round_trip_exactly() {
        let m = Mat::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, 2.0f64.sqrt(), 7.0, -0.0]);
        let back = parse_matrices(&format_matrix(&m)).unwrap();
        assert_eq!(back[0], m);
    }

    #[test]
    fn csv_rows() {
        let mut sink = CsvSink::new(Vec::new(), &["t", "x"]).unwrap();
        sink.row(&[1usize.into(), 0.25.into()]).unwrap();
        assert!(sink.row(&[1usize.into()]).is_err());
        let text = String::from_utf8(sink.finish().unwrap()).unwrap();
        assert_eq!(text, "t,x\n1,2.5000000000000000e-1\n");
    }
}
