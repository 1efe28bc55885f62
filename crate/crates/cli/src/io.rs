//! CSV formats. Numbers are written with Rust's shortest round-trip `{}`
//! formatting, so every value re-parses to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use markmle::Observation;

use crate::CliError;

/// Reads an observation file with header `t1,...,tk,j,z`.
pub fn read_observations(path: &Path) -> Result<Vec<Observation>, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_observations(&text)
}

pub fn parse_observations(text: &str) -> Result<Vec<Observation>, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(&e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CliError::Parse {
            line: 1,
            message: "empty file".into(),
        });
    }
    let k = header.len().checked_sub(2).filter(|&k| k > 0).ok_or(CliError::Parse {
        line: 1,
        message: "header needs t1..tk, j and z".into(),
    })?;
    let expected: Vec<String> = (1..=k)
        .map(|i| format!("t{i}"))
        .chain(["j".into(), "z".into()])
        .collect();
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(CliError::Parse {
            line: 1,
            message: format!("header must be {}", expected.join(",")),
        });
    }

    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        let field = |i: usize| record[i].trim();
        let parse_f64 = |i: usize| {
            field(i).parse::<f64>().map_err(|_| CliError::Parse {
                line,
                message: format!("column {} is not a number: {:?}", &header[i], field(i)),
            })
        };
        let times = (0..k).map(parse_f64).collect::<Result<Vec<_>, _>>()?;
        let j: usize = field(k).parse().map_err(|_| CliError::Parse {
            line,
            message: format!("j is not a positive integer: {:?}", field(k)),
        })?;
        let z = if field(k + 1).is_empty() {
            None
        } else {
            Some(parse_f64(k + 1)?)
        };
        out.push(Observation::new(times, j, z).map_err(|e| CliError::Invariant {
            row: row + 1,
            message: e.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(CliError::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    Ok(out)
}

fn csv_error(e: &csv::Error) -> CliError {
    CliError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A CSV file being written; LF line endings, header first.
pub struct Table {
    writer: csv::Writer<BufWriter<File>>,
    path: String,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        let path = path.display().to_string();
        writer
            .write_record(header)
            .map_err(|e| CliError::Io(format!("{path}: {e}")))?;
        Ok(Table { writer, path })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path)))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path)))?;
        let inner = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path)))?;
        inner
            .into_inner()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path)))?
            .flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path)))
    }
}

pub fn write_observations(path: &Path, data: &[Observation]) -> Result<(), CliError> {
    let k = data.first().map_or(1, Observation::k);
    let header: Vec<String> = (1..=k)
        .map(|i| format!("t{i}"))
        .chain(["j".into(), "z".into()])
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::create(path, &header)?;
    for o in data {
        let row: Vec<String> = o
            .times()
            .iter()
            .map(|&v| fmt_f64(v))
            .chain([o.delta_index().to_string(), fmt_opt(o.mark())])
            .collect();
        t.row(&row)?;
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_current_status_file() {
        let obs = parse_observations("t1,j,z\n1,1,0.5\n2,2,\n").unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].mark(), Some(0.5));
        assert_eq!(obs[1].mark(), None);
        assert_eq!(obs[1].delta_index(), 2);
    }

    #[test]
    fn parse_errors_carry_lines() {
        match parse_observations("t1,j,z\n1,1,0.5\nx,1,0.2\n") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_observations(""), Err(CliError::Parse { .. })));
        assert!(matches!(parse_observations("t1,j,z\n"), Err(CliError::Parse { .. })));
        assert!(matches!(
            parse_observations("a,b\n1,2\n"),
            Err(CliError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_observations("t1,j,z\n1,1\n"),
            Err(CliError::Parse { .. })
        ));
    }

    #[test]
    fn invariant_errors_carry_rows() {
        match parse_observations("t1,j,z\n1,1,0.5\n2,2,0.3\n") {
            Err(CliError::Invariant { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_observations("t1,t2,j,z\n2,1,3,\n"),
            Err(CliError::Invariant { row: 1, .. })
        ));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123_456_789.123_456_79] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
