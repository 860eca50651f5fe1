use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fixed::Fixed8;

use super::record::{LobRecord, Violation};

/// Column names for a book of `levels` levels, in file order.
pub fn csv_header(levels: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["ts", "open", "high", "low", "close", "volume"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=levels {
        cols.push(format!("bid_px_{i}"));
        cols.push(format!("bid_sz_{i}"));
    }
    for i in 1..=levels {
        cols.push(format!("ask_px_{i}"));
        cols.push(format!("ask_sz_{i}"));
    }
    cols
}

pub fn parse_csv(path: impl AsRef<Path>, levels: usize) -> Result<Vec<LobRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, levels)
}

/// Parses and validates LOB rows. Line numbers in errors are 1-based file lines.
pub fn read_csv<R: Read>(reader: R, levels: usize) -> Result<Vec<LobRecord>> {
    if levels == 0 {
        return Err(Error::Parameter("book depth must be at least 1".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let expected = csv_header(levels);
    let header = rdr.headers()?.clone();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header does not match the {levels}-level column layout (expected {} columns starting `{}`)",
                expected.len(),
                expected[..6].join(",")
            ),
        });
    }

    let mut out: Vec<LobRecord> = Vec::new();
    let mut row = csv::StringRecord::new();
    let mut fallback_line = 1;
    loop {
        let more = rdr.read_record(&mut row).map_err(|e| {
            let line = e.position().map_or(fallback_line + 1, |p| p.line() as usize);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = row
            .position()
            .map_or(fallback_line + 1, |p| p.line() as usize);
        fallback_line = line;
        if row.len() != expected.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", expected.len(), row.len()),
            });
        }
        let rec = parse_row(&row, levels, &expected, line)?;
        if let Some(violation) = rec.violations().into_iter().next() {
            return Err(Error::Validation { line, violation });
        }
        if let Some(prev) = out.last() {
            if rec.ts == prev.ts {
                return Err(Error::DuplicateTimestamp { line, ts: rec.ts });
            }
            if rec.ts < prev.ts {
                return Err(Error::Validation {
                    line,
                    violation: Violation::DecreasingTimestamp,
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, levels: usize, names: &[String], line: usize) -> Result<LobRecord> {
    let field = |i: usize| -> Result<Fixed8> {
        row[i].trim().parse::<Fixed8>().map_err(|e| Error::Parse {
            line,
            message: format!("column {}: {e}", names[i]),
        })
    };
    let ts = row[0].trim().parse::<i64>().map_err(|e| Error::Parse {
        line,
        message: format!("column ts: {e}"),
    })?;
    let mut bid_px = Vec::with_capacity(levels);
    let mut bid_sz = Vec::with_capacity(levels);
    let mut ask_px = Vec::with_capacity(levels);
    let mut ask_sz = Vec::with_capacity(levels);
    for i in 0..levels {
        bid_px.push(field(6 + 2 * i)?);
        bid_sz.push(field(7 + 2 * i)?);
        ask_px.push(field(6 + 2 * levels + 2 * i)?);
        ask_sz.push(field(7 + 2 * levels + 2 * i)?);
    }
    Ok(LobRecord {
        ts,
        open: field(1)?,
        high: field(2)?,
        low: field(3)?,
        close: field(4)?,
        volume: field(5)?,
        bid_px,
        bid_sz,
        ask_px,
        ask_sz,
    })
}

/// Writes records in the column layout accepted by [`read_csv`].
pub fn write_csv<W: Write>(records: &[LobRecord], writer: W) -> Result<()> {
    let levels = records.first().map_or(0, LobRecord::levels);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header(levels))?;
    let mut fields: Vec<String> = Vec::with_capacity(6 + 4 * levels);
    for rec in records {
        if rec.levels() != levels {
            return Err(Error::Parameter(format!(
                "record at ts {} has {} levels, expected {levels}",
                rec.ts,
                rec.levels()
            )));
        }
        fields.clear();
        fields.push(rec.ts.to_string());
        for v in [rec.open, rec.high, rec.low, rec.close, rec.volume] {
            fields.push(v.to_string());
        }
        for i in 0..levels {
            fields.push(rec.bid_px[i].to_string());
            fields.push(rec.bid_sz[i].to_string());
        }
        for i in 0..levels {
            fields.push(rec.ask_px[i].to_string());
            fields.push(rec.ask_sz[i].to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn to_csv_string(records: &[LobRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
