use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ObservationMatrix, ScoreFunction};

/// Reads a rectangular numeric CSV; rows are observations.
pub fn ingest_csv(path: impl AsRef<Path>, has_header: bool) -> Result<ObservationMatrix> {
    parse_csv(File::open(path)?, has_header)
}

/// Like [`ingest_csv`] but from any reader. Line numbers in errors are
/// 1-based file lines, header included.
pub fn parse_csv<R: Read>(input: R, has_header: bool) -> Result<ObservationMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut values = Vec::new();
    let mut d = None;
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(n + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match d {
            None => d = Some(rec.len()),
            Some(d) if d != rec.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: '{field}' is not a number", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: n + 1, col: j + 1 });
            }
            values.push(v);
        }
        n += 1;
    }
    let Some(d) = d else {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    };
    ObservationMatrix::new(n, d, values)
}

/// Score values separated by commas or whitespace.
pub fn parse_scores(text: &str) -> Result<ScoreFunction> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            values.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("'{tok}' is not a number"),
            })?);
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no scores".into(),
        });
    }
    ScoreFunction::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_matrix() {
        let m = parse_csv("1,2\n3,4\n".as_bytes(), false).unwrap();
        assert_eq!((m.n(), m.d()), (2, 2));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn header_skipped() {
        let m = parse_csv("x,y\n1,2\n3, 4\n".as_bytes(), true).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert!(parse_csv("x,y\n1,2\n".as_bytes(), false).is_err());
    }

    #[test]
    fn ragged_names_line() {
        let err = parse_csv("1,2\n3,4\n5\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("line 3"));
        let err = parse_csv("a,b\n1,2\n3\n".as_bytes(), true).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn non_finite_and_non_numeric() {
        let err = parse_csv("1,2\n3,NaN\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 2, col: 2 }));
        let err = parse_csv("1,inf\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 2 }));
        let err = parse_csv("1,2\nx,4\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_csv("".as_bytes(), false).is_err());
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn scores() {
        let s = parse_scores("1, 2 3\n4\n").unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(parse_scores("1, q").is_err());
        assert!(parse_scores("\n").is_err());
    }
}
