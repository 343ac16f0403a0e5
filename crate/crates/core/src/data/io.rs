//! Dense CSV and sparse `label idx:val ...` loaders.
//!
//! Categories are ordered by sorting the distinct labels found in the file
//! (numerically when every label parses as a number). Test files are loaded
//! against the training categories and may not introduce new ones.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{FeatureVec, LabelledCollection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub header: bool,
    pub label_column: LabelColumn,
    /// Fixed category list, e.g. the training categories when loading a test file.
    pub categories: Option<Vec<String>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            header: false,
            label_column: LabelColumn::Last,
            categories: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SparseOptions {
    pub zero_based: bool,
    pub categories: Option<Vec<String>>,
    /// Fixed feature dimension; indices beyond it are a dimension mismatch.
    pub dim: Option<usize>,
}

pub fn load_dense_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<LabelledCollection> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_dense_csv(BufReader::new(file), opts)
}

pub fn load_sparse(path: impl AsRef<Path>, opts: &SparseOptions) -> Result<LabelledCollection> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_sparse(BufReader::new(file), opts)
}

pub fn parse_dense_csv(reader: impl Read, opts: &CsvOptions) -> Result<LabelledCollection> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::parse(line, e.to_string())
    };
    let named = match &opts.label_column {
        LabelColumn::Name(name) => {
            if !opts.header {
                return Err(Error::invalid("a named label column requires a header row"));
            }
            let headers = rdr.headers().map_err(csv_err)?;
            Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::parse(1, format!("no column named `{name}`")))?,
            )
        }
        _ => None,
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::parse(
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        if record.len() < 2 {
            return Err(Error::parse(line, "a row needs a label and at least one feature"));
        }
        let label_idx = match (&opts.label_column, named) {
            (_, Some(i)) => i,
            (LabelColumn::Index(i), _) => *i,
            _ => record.len() - 1,
        };
        if label_idx >= record.len() {
            return Err(Error::parse(line, format!("label column {label_idx} out of range")));
        }
        let mut feats = Vec::with_capacity(record.len() - 1);
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, format!("`{field}` is not a real number")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("`{field}` is not finite")));
            }
            feats.push(v);
        }
        rows.push(FeatureVec::Dense(feats));
        labels.push((line, record[label_idx].to_string()));
    }
    if rows.is_empty() {
        return Err(Error::parse(0, "no instances"));
    }
    let dim = width.unwrap_or(1) - 1;
    build(rows, labels, opts.categories.as_deref(), dim)
}

pub fn parse_sparse(reader: impl Read, opts: &SparseOptions) -> Result<LabelledCollection> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_dim = 0usize;
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("nonempty line has a token");
        let mut feats: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("`{tok}` is not idx:val")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad index `{i}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad value `{v}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("`{tok}` is not finite")));
            }
            let i = if opts.zero_based {
                i
            } else {
                i.checked_sub(1)
                    .ok_or_else(|| Error::parse(lineno, "index 0 in a 1-based file"))?
            };
            if let Some(d) = opts.dim {
                if i >= d {
                    return Err(Error::DimensionMismatch { expected: d, found: i + 1 });
                }
            }
            feats.push((i, v));
        }
        feats.sort_by_key(|&(i, _)| i);
        if feats.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::parse(lineno, "duplicate feature index"));
        }
        feats.retain(|&(_, v)| v != 0.0);
        if let Some(&(i, _)) = feats.last() {
            max_dim = max_dim.max(i + 1);
        }
        rows.push(FeatureVec::Sparse(feats));
        labels.push((lineno, label.to_string()));
    }
    if rows.is_empty() {
        return Err(Error::parse(0, "no instances"));
    }
    build(rows, labels, opts.categories.as_deref(), opts.dim.unwrap_or(max_dim))
}

/// Sorts distinct labels, numerically when all are numbers.
pub fn order_categories(mut names: Vec<String>) -> Vec<String> {
    names.sort();
    names.dedup();
    let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(names).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        paired.into_iter().map(|(_, s)| s).collect()
    } else {
        names
    }
}

fn build(
    rows: Vec<FeatureVec>,
    labels: Vec<(usize, String)>,
    categories: Option<&[String]>,
    dim: usize,
) -> Result<LabelledCollection> {
    let categories = match categories {
        Some(c) => c.to_vec(),
        None => order_categories(labels.iter().map(|(_, l)| l.clone()).collect()),
    };
    if categories.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "found {} distinct label(s); at least two are needed",
            categories.len()
        )));
    }
    let idx = labels
        .iter()
        .map(|(line, l)| {
            categories
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::parse(*line, format!("unknown category `{l}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    LabelledCollection::with_dim(rows, idx, categories, dim)
}
