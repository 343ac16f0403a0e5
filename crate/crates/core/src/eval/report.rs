//! Per-sample evaluation reports and their CSV form.
//!
//! ```text
//! # {"method":"acc",...}
//! sample,true_prev,estim_prev,mae,mrae
//! 0,0.000000;1.000000,0.012000;0.988000,0.012,0.31
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::PrevalenceVector;
use crate::error::{Error, Result};

/// Training prevalence in force from row `start` onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub training_prevalence: Vec<f64>,
}

/// Campaign description stored in the report's leading comment line.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportMeta {
    pub method: String,
    pub dataset: String,
    pub params: BTreeMap<String, String>,
    pub protocol: String,
    pub sample_size: usize,
    pub n_prevpoints: Option<usize>,
    pub n_repetitions: usize,
    pub seed: u64,
    pub smoothing: f64,
    /// Set when some sample had to be drawn with replacement.
    pub replacement: bool,
    pub segments: Vec<Segment>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub sample: usize,
    pub true_prev: PrevalenceVector,
    pub estim_prev: PrevalenceVector,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantReport {
    pub meta: ReportMeta,
    pub metrics: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl QuantReport {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn metric_index(&self, metric: &str) -> Result<usize> {
        self.metrics
            .iter()
            .position(|m| m == metric)
            .ok_or_else(|| Error::invalid(format!("report has no `{metric}` column")))
    }

    pub fn column(&self, metric: &str) -> Result<Vec<f64>> {
        let i = self.metric_index(metric)?;
        Ok(self.rows.iter().map(|r| r.errors[i]).collect())
    }

    /// Training prevalence that applies to row `index`, if recorded.
    pub fn training_prevalence(&self, index: usize) -> Option<&[f64]> {
        self.meta
            .segments
            .iter()
            .rev()
            .find(|s| s.start <= index)
            .map(|s| s.training_prevalence.as_slice())
    }

    /// Appends `other`, renumbering its samples and carrying its segments.
    pub fn append(&mut self, other: QuantReport) -> Result<()> {
        if other.metrics != self.metrics {
            return Err(Error::invalid("cannot concatenate reports with different metrics"));
        }
        let offset = self.rows.len();
        for s in other.meta.segments {
            self.meta.segments.push(Segment {
                start: s.start + offset,
                ..s
            });
        }
        self.meta.replacement |= other.meta.replacement;
        for w in other.meta.warnings {
            if !self.meta.warnings.contains(&w) {
                self.meta.warnings.push(w);
            }
        }
        self.rows.extend(other.rows.into_iter().map(|r| ReportRow {
            sample: r.sample + offset,
            ..r
        }));
        Ok(())
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.meta)?)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sample".to_string(), "true_prev".into(), "estim_prev".into()];
        header.extend(self.metrics.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.sample.to_string(), r.true_prev.to_field(), r.estim_prev.to_field()];
            rec.extend(r.errors.iter().map(|e| e.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::parse_csv(f)
    }

    /// Reads a report; the metadata line is optional.
    pub fn parse_csv(reader: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let (meta, body_start, pending) = match first.strip_prefix('#') {
            Some(json) => {
                let meta: ReportMeta = serde_json::from_str(json.trim())
                    .map_err(|e| Error::parse(1, format!("bad metadata line: {e}")))?;
                (meta, 2, String::new())
            }
            None => (ReportMeta::default(), 1, first),
        };
        let body = pending.as_bytes().chain(reader);
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(body);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::parse(body_start, "missing header"))?
            .map_err(|e| Error::parse(body_start, e.to_string()))?;
        if header.len() < 3 || &header[0] != "sample" || &header[1] != "true_prev" || &header[2] != "estim_prev" {
            return Err(Error::parse(body_start, "header must start with sample,true_prev,estim_prev"));
        }
        let metrics: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (k, rec) in records.enumerate() {
            let line = body_start + 1 + k;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            if rec.len() != header.len() {
                return Err(Error::parse(
                    line,
                    format!("expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            let at = |e: Error| Error::parse(line, e.to_string());
            let sample = rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(line, format!("bad sample index: {e}")))?;
            let true_prev = PrevalenceVector::from_field(&rec[1]).map_err(at)?;
            let estim_prev = PrevalenceVector::from_field(&rec[2]).map_err(at)?;
            if true_prev.len() != estim_prev.len() {
                return Err(Error::parse(line, "true and estimated prevalences differ in length"));
            }
            let errors = rec
                .iter()
                .skip(3)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(line, format!("bad error value `{v}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ReportRow {
                sample,
                true_prev,
                estim_prev,
                errors,
            });
        }
        Ok(QuantReport { meta, metrics, rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
