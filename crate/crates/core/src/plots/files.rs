//! CSV forms of the plot series. Values carry six decimals; lines starting
//! with `#` hold metadata and are skipped when reading.

use std::io::{Read, Write};

use super::{BiasBox, DiagonalPoint, ShiftPoint};
use crate::error::{Error, Result};

fn io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn write_rows(mut out: impl Write, meta: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    writeln!(out, "# {meta}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Records after the header, with 1-based line numbers.
fn read_rows(reader: impl Read, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if !seen_header {
            if rec.iter().collect::<Vec<_>>() != header {
                return Err(Error::parse(line, format!("expected header {}", header.join(","))));
            }
            seen_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        out.push((line, rec));
    }
    if !seen_header {
        return Err(Error::parse(1, "missing header"));
    }
    Ok(out)
}

fn num(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn count(line: usize, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("`{s}` is not a count")))
}

const DIAGONAL: [&str; 4] = ["method", "x", "mean", "std"];
const SHIFT: [&str; 4] = ["method", "bin_center", "mean_error", "n"];
const BIAS: [&str; 8] = ["method", "bin", "lo_whisker", "q1", "median", "q3", "hi_whisker", "outliers"];

pub fn write_diagonal_csv(points: &[DiagonalPoint], out: impl Write) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| vec![p.method.clone(), f6(p.x), f6(p.mean), f6(p.std)])
        .collect();
    write_rows(
        out,
        r#"{"plot":"diagonal","grouping":"exact true value (npp: equal bins)","std":"population"}"#,
        &DIAGONAL,
        rows,
    )
}

pub fn parse_diagonal_csv(reader: impl Read) -> Result<Vec<DiagonalPoint>> {
    read_rows(reader, &DIAGONAL)?
        .into_iter()
        .map(|(l, r)| {
            Ok(DiagonalPoint {
                method: r[0].to_string(),
                x: num(l, &r[1])?,
                mean: num(l, &r[2])?,
                std: num(l, &r[3])?,
            })
        })
        .collect()
}

pub fn write_shift_csv(points: &[ShiftPoint], out: impl Write) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| vec![p.method.clone(), f6(p.bin_center), f6(p.mean_error), p.n.to_string()])
        .collect();
    write_rows(
        out,
        r#"{"plot":"error_by_shift","bins":"equal width over the observed shift range, right-closed"}"#,
        &SHIFT,
        rows,
    )
}

pub fn parse_shift_csv(reader: impl Read) -> Result<Vec<ShiftPoint>> {
    read_rows(reader, &SHIFT)?
        .into_iter()
        .map(|(l, r)| {
            Ok(ShiftPoint {
                method: r[0].to_string(),
                bin_center: num(l, &r[1])?,
                mean_error: num(l, &r[2])?,
                n: count(l, &r[3])?,
            })
        })
        .collect()
}

pub fn write_bias_csv(boxes: &[BiasBox], out: impl Write) -> Result<()> {
    let rows = boxes
        .iter()
        .map(|b| {
            vec![
                b.method.clone(),
                b.bin.clone(),
                f6(b.lo_whisker),
                f6(b.q1),
                f6(b.median),
                f6(b.q3),
                f6(b.hi_whisker),
                b.outliers.to_string(),
            ]
        })
        .collect();
    write_rows(
        out,
        r#"{"plot":"bias_box","quartiles":"type 7","whiskers":"1.5 IQR","bins":"right-closed on [0,1], first bin includes 0"}"#,
        &BIAS,
        rows,
    )
}

pub fn parse_bias_csv(reader: impl Read) -> Result<Vec<BiasBox>> {
    read_rows(reader, &BIAS)?
        .into_iter()
        .map(|(l, r)| {
            Ok(BiasBox {
                method: r[0].to_string(),
                bin: r[1].to_string(),
                lo_whisker: num(l, &r[2])?,
                q1: num(l, &r[3])?,
                median: num(l, &r[4])?,
                q3: num(l, &r[5])?,
                hi_whisker: num(l, &r[6])?,
                outliers: count(l, &r[7])?,
            })
        })
        .collect()
}
