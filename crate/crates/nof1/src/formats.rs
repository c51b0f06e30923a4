//! CSV file formats. Every output file starts with a block of `#` comment
//! lines holding the effective configuration; readers skip such lines.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nof1_core::{Foot, StrideRecord, WalkingCondition};

use crate::error::{CliError, Result};

pub const STRIDE_COLUMNS: [&str; 6] = [
    "participant_id",
    "foot",
    "condition",
    "sequence_index",
    "stride_length_m",
    "stride_time_s",
];

/// Comment block written at the top of output files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    lines: Vec<String>,
}

impl Header {
    pub fn new(lines: impl IntoIterator<Item = String>) -> Self {
        Header {
            lines: lines.into_iter().collect(),
        }
    }

    /// One comment line per line of `text`, for example a serialized config.
    pub fn from_text(title: &str, text: &str) -> Self {
        let mut lines = vec![title.to_string()];
        lines.extend(
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string),
        );
        Header { lines }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for line in &self.lines {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    }
}

/// Shortest decimal form that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_f64)
}

/// A header row plus string cells, written as one CSV file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, header: &Header) -> Result<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut buf = BufWriter::new(file);
        header
            .write_to(&mut buf)
            .map_err(|e| CliError::io(path, e))?;
        let mut w = csv::Writer::from_writer(buf);
        let csv_err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    /// Reads a file written by [`Table::write`] (or any comma separated
    /// file with a header row).
    pub fn read(path: &Path) -> Result<Table> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut reader = reader(file);
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| parse_error(path, &e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| parse_error(path, &e))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Invalid(format!("missing column `{name}`")))
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn parse_error(path: &Path, e: &csv::Error) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Parses the stride CSV. Rows keep file order; `origin` only labels errors.
pub fn parse_strides<R: Read>(source: R, origin: &Path) -> Result<Vec<StrideRecord>> {
    let mut rdr = reader(source);
    let headers = rdr.headers().map_err(|e| parse_error(origin, &e))?.clone();
    if headers.iter().ne(STRIDE_COLUMNS) {
        return Err(CliError::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                STRIDE_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(origin, &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let fail = |message: String| CliError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let number = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                fail(format!(
                    "invalid number `{}` in {}",
                    &rec[i], STRIDE_COLUMNS[i]
                ))
            })
        };
        let foot: Foot = rec[1]
            .parse()
            .map_err(|_| fail(format!("unknown foot `{}`", &rec[1])))?;
        let condition: WalkingCondition = rec[2]
            .parse()
            .map_err(|_| fail(format!("unknown condition `{}`", &rec[2])))?;
        let sequence_index: u32 = rec[3]
            .parse()
            .map_err(|_| fail(format!("invalid sequence_index `{}`", &rec[3])))?;
        let record = StrideRecord::new(
            &rec[0],
            foot,
            condition,
            sequence_index,
            number(4)?,
            number(5)?,
        )
        .map_err(|e| fail(e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_strides(path: &Path) -> Result<Vec<StrideRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_strides(file, path)
}

pub fn strides_table(records: &[StrideRecord]) -> Table {
    let mut t = Table::new(&STRIDE_COLUMNS);
    for r in records {
        t.push(vec![
            r.participant_id.clone(),
            r.foot.label().to_string(),
            r.condition.label().to_string(),
            r.sequence_index.to_string(),
            fmt_f64(r.stride_length),
            fmt_f64(r.stride_time),
        ]);
    }
    t
}

pub fn write_strides(path: &Path, header: &Header, records: &[StrideRecord]) -> Result<()> {
    strides_table(records).write(path, header)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<StrideRecord>> {
        parse_strides(text.as_bytes(), Path::new("test.csv"))
    }

    const HEAD: &str =
        "participant_id,foot,condition,sequence_index,stride_length_m,stride_time_s\n";

    #[test]
    fn maps_fields() {
        let r = parse(&format!("{HEAD}p01,left,ST-Control,0,1.43,1.10\n")).unwrap();
        assert_eq!(
            r,
            vec![StrideRecord::new(
                "p01",
                Foot::Left,
                WalkingCondition::StControl,
                0,
                1.43,
                1.10
            )
            .unwrap()]
        );
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse(HEAD).unwrap().is_empty());
    }

    #[test]
    fn comments_skipped_and_case_ignored() {
        let r = parse(&format!(
            "# produced elsewhere\n{HEAD}p01,LEFT,dt-fatigue,3,1.2,1.0\n"
        ))
        .unwrap();
        assert_eq!(r[0].condition, WalkingCondition::DtFatigue);
    }

    #[test]
    fn errors_name_line_and_token() {
        let e = parse(&format!(
            "{HEAD}p01,left,ST-Control,0,1.4,1.1\np01,left,Running,1,1.4,1.1\n"
        ))
        .unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("Running"), "{msg}");
        let e = parse(&format!("{HEAD}p01,left,ST-Control,0,-1.0,1.1\n")).unwrap_err();
        assert!(e.to_string().contains("non-positive value"));
        let e = parse(&format!("{HEAD}p01,middle,ST-Control,0,1.0,1.1\n")).unwrap_err();
        assert!(e.to_string().contains("middle"));
        let e = parse(&format!("{HEAD}p01,left,ST-Control,0\n")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse("id,foot\n").is_err());
    }
}
