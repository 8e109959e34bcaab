use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::encode::EncodedSample;
use super::schema::FeatureSchema;
use crate::error::{Error, Result};

/// One raw log line: string values in schema order plus the 0/1 label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub values: Vec<String>,
    pub label: u8,
}

fn parse_label(cell: &str, origin: &Path, line: usize) -> Result<u8> {
    match cell.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::parse(origin, line, format!("label must be 0 or 1, got `{other}`"))),
    }
}

/// Reads delimited text with a header row. Columns are matched to schema
/// fields by name; a `label` column is required, extra columns are ignored.
pub fn read_raw<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    delimiter: char,
    origin: &Path,
) -> Result<Vec<RawRecord>> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::Empty("raw input has no header line")),
    };
    let columns: Vec<&str> = header.trim_end_matches('\r').split(delimiter).collect();
    let find = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::MissingField(name.to_string()))
    };
    let label_col = find("label")?;
    let field_cols = schema
        .fields()
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let cells: Vec<&str> = line.split(delimiter).collect();
        if cells.len() != columns.len() {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {} columns, found {}", columns.len(), cells.len()),
            ));
        }
        records.push(RawRecord {
            values: field_cols.iter().map(|&c| cells[c].to_string()).collect(),
            label: parse_label(cells[label_col], origin, lineno)?,
        });
    }
    Ok(records)
}

/// Writes the layout [`read_raw`] expects: a header of field names followed
/// by `label`, then one line per record.
pub fn write_raw<W: Write>(writer: W, schema: &FeatureSchema, records: &[RawRecord], delimiter: char) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let d = delimiter.to_string();
    let mut header: Vec<&str> = schema.fields().iter().map(|f| f.name.as_str()).collect();
    header.push("label");
    writeln!(w, "{}", header.join(&d))?;
    for r in records {
        if r.values.len() != schema.len() {
            return Err(Error::Shape {
                expected: vec![schema.len()],
                actual: vec![r.values.len()],
            });
        }
        if let Some(v) = r.values.iter().find(|v| v.contains(delimiter) || v.contains('\n')) {
            return Err(Error::invalid(format!("value `{v}` contains the delimiter or a newline")));
        }
        writeln!(w, "{}{d}{}", r.values.join(&d), r.label)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the encoded dataset format `label<TAB>i0,i1,...`.
pub fn read_encoded(path: &Path) -> Result<Vec<EncodedSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (label, idx) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `label<TAB>indices`"))?;
        let label = parse_label(label, path, i + 1)?;
        let indices = idx
            .split(',')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| Error::parse(path, i + 1, format!("bad index `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(EncodedSample { indices, label });
    }
    Ok(out)
}

pub fn write_encoded(path: &Path, samples: &[EncodedSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        write!(w, "{}\t", s.label)?;
        for (j, idx) in s.indices.iter().enumerate() {
            if j > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{idx}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
