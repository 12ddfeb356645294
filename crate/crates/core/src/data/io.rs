use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Orientation of a CSV file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One row per time step; columns are (variable, dim) pairs, dims fastest.
    #[default]
    TimeMajor,
    /// One row per (variable, dim) pair, dims fastest; columns are time steps.
    VariableMajor,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NanPolicy {
    /// Missing or NaN cells are an error.
    #[default]
    Strict,
    /// Carry the previous observation of the same series forward.
    Ffill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvOptions {
    pub layout: Layout,
    pub dims: usize,
    pub has_header: bool,
    pub nan_policy: NanPolicy,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { layout: Layout::TimeMajor, dims: 1, has_header: false, nan_policy: NanPolicy::Strict }
    }
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("na") {
        return Ok(f64::NAN);
    }
    let v: f64 = t.parse().map_err(|_| Error::Parse { line, msg: format!("non-numeric cell {t:?}") })?;
    if v.is_infinite() {
        return Err(Error::Parse { line, msg: format!("infinite value {t:?}") });
    }
    Ok(v)
}

/// Parses a rectangular numeric CSV into a dataset. Line numbers in errors are 1-based.
pub fn read_csv<R: Read>(reader: R, name: &str, opts: &CsvOptions) -> Result<Dataset> {
    if opts.dims == 0 {
        return Err(Error::Config("dims must be at least 1".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if i == 0 && opts.has_header {
            continue;
        }
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse { line, msg: format!("expected {w} cells, found {}", rec.len()) })
            }
            _ => {}
        }
        rows.push(rec.iter().map(|c| parse_cell(c, line)).collect::<Result<_>>()?);
        if opts.nan_policy == NanPolicy::Strict {
            if let Some(col) = rows.last().unwrap().iter().position(|v| v.is_nan()) {
                return Err(Error::Parse { line, msg: format!("missing value in column {}", col + 1) });
            }
        }
    }
    let width = width.ok_or_else(|| Error::Data("CSV contains no data rows".into()))?;
    let d = opts.dims;
    let (series_count, len) = match opts.layout {
        Layout::TimeMajor => (width, rows.len()),
        Layout::VariableMajor => (rows.len(), width),
    };
    if series_count % d != 0 {
        return Err(Error::Data(format!("{series_count} series is not a multiple of {d} dims")));
    }
    let n = series_count / d;
    let mut values = Array3::from_shape_fn((n, len, d), |(v, t, k)| match opts.layout {
        Layout::TimeMajor => rows[t][v * d + k],
        Layout::VariableMajor => rows[v * d + k][t],
    });
    if opts.nan_policy == NanPolicy::Ffill {
        for v in 0..n {
            for k in 0..d {
                let mut last = None;
                for t in 0..len {
                    let cell = &mut values[[v, t, k]];
                    if cell.is_nan() {
                        *cell = last.ok_or_else(|| {
                            Error::Data(format!("series {v} dim {k} starts with a missing value; nothing to carry forward"))
                        })?;
                    } else {
                        last = Some(*cell);
                    }
                }
            }
        }
    }
    Ok(Dataset::new(name, values))
}

pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    read_csv(std::fs::File::open(path)?, &name, opts)
}

/// Writes values without a header in the given layout, using shortest round-trip formatting.
pub fn write_csv<W: Write>(writer: W, ds: &Dataset, layout: Layout) -> Result<()> {
    let (n, len, d) = ds.values.dim();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    match layout {
        Layout::TimeMajor => {
            for t in 0..len {
                let row: Vec<String> = (0..n * d).map(|c| ds.values[[c / d, t, c % d]].to_string()).collect();
                w.write_record(&row)?;
            }
        }
        Layout::VariableMajor => {
            for c in 0..n * d {
                let row: Vec<String> = (0..len).map(|t| ds.values[[c / d, t, c % d]].to_string()).collect();
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_major_three_columns() {
        let text: String = (0..10).map(|t| format!("{t},{},{}\n", t * 2, t * 3)).collect();
        let ds = read_csv(text.as_bytes(), "x", &CsvOptions::default()).unwrap();
        assert_eq!(ds.values.dim(), (3, 10, 1));
        assert_eq!(ds.values[[2, 4, 0]], 12.0);
    }

    #[test]
    fn variable_major_with_dims_and_header() {
        let text = "h1,h2,h3\n1,2,3\n10,20,30\n4,5,6\n40,50,60\n";
        let opts = CsvOptions { layout: Layout::VariableMajor, dims: 2, has_header: true, ..Default::default() };
        let ds = read_csv(text.as_bytes(), "x", &opts).unwrap();
        assert_eq!(ds.values.dim(), (2, 3, 2));
        assert_eq!(ds.values[[1, 2, 1]], 60.0);
        assert_eq!(ds.values[[0, 1, 1]], 20.0);
    }

    #[test]
    fn nan_is_an_error_unless_forward_filled() {
        let text = "1,2\nNaN,3\n4,\n";
        match read_csv(text.as_bytes(), "x", &CsvOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let opts = CsvOptions { nan_policy: NanPolicy::Ffill, ..Default::default() };
        let ds = read_csv(text.as_bytes(), "x", &opts).unwrap();
        assert_eq!(ds.values[[0, 1, 0]], 1.0);
        assert_eq!(ds.values[[1, 2, 0]], 3.0);
        assert!(read_csv("NaN,1\n2,3\n".as_bytes(), "x", &opts).is_err());
    }

    #[test]
    fn ragged_and_non_numeric_rows_report_line() {
        match read_csv("1,2\n3,4\n5\n".as_bytes(), "x", &CsvOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_csv("1,2\n3,abc\n".as_bytes(), "x", &CsvOptions::default()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn roundtrip_both_layouts() {
        let values = Array3::from_shape_fn((3, 7, 2), |(v, t, k)| (v as f64 + 0.1) * (t as f64).sin() - k as f64 / 3.0);
        let ds = Dataset::new("x", values);
        for layout in [Layout::TimeMajor, Layout::VariableMajor] {
            let mut buf = Vec::new();
            write_csv(&mut buf, &ds, layout).unwrap();
            let opts = CsvOptions { layout, dims: 2, ..Default::default() };
            let back = read_csv(buf.as_slice(), "x", &opts).unwrap();
            assert_eq!(back.values, ds.values);
        }
    }
}
