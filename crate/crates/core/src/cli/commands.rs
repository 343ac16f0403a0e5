use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{
    load_dense_csv, load_sparse, synth_gaussian, CsvOptions, LabelledCollection, PrevalenceVector, SparseOptions,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, get_nprevpoints_approximation, num_prevalence_combinations, paired_t_test, summarize, ErrorMeasure,
    QuantReport,
};
use crate::math::derive_seed;
use crate::modelsel::{format_params, grid_search_fit, save_trace, GridSearchConfig};
use crate::plots;
use crate::quantifier::{ParamMap, Quantifier};

use super::args::{CombinationsArgs, PlotArgs, PlotKind, TableArgs};
use super::registry::{build_method, unknown_method_message, BuildError};
use super::settings::{RunSettings, DEFAULT_TEST_FRACTION};
use super::spec::{parse_data_spec, DataSpec, MethodSpec};
use super::CliError;

type Pairs = Vec<(LabelledCollection, LabelledCollection)>;

fn file_name_part(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            ':' => '_',
            '=' => '-',
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' => c,
            _ => '-',
        })
        .collect()
}

fn with_dim(c: &LabelledCollection, dim: usize) -> Result<LabelledCollection> {
    LabelledCollection::with_dim(c.instances().to_vec(), c.labels().to_vec(), c.categories().to_vec(), dim)
}

fn concat(a: &LabelledCollection, b: &LabelledCollection) -> Result<LabelledCollection> {
    let mut instances = a.instances().to_vec();
    instances.extend_from_slice(b.instances());
    let mut labels = a.labels().to_vec();
    labels.extend_from_slice(b.labels());
    LabelledCollection::with_dim(instances, labels, a.categories().to_vec(), a.dim().max(b.dim()))
}

fn load_file(path: &Path, s: &RunSettings, categories: Option<Vec<String>>) -> Result<LabelledCollection> {
    let dense = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if dense {
        load_dense_csv(
            path,
            &CsvOptions {
                header: s.header,
                label_column: s.label_column.clone(),
                categories,
            },
        )
    } else {
        load_sparse(
            path,
            &SparseOptions {
                zero_based: s.zero_based,
                categories,
                dim: None,
            },
        )
    }
}

/// Dataset name and its (training, test) pairs: one pair, or one per fold.
fn load_pairs(s: &RunSettings, data: &str) -> std::result::Result<(String, Pairs), CliError> {
    let spec = parse_data_spec(data).map_err(CliError::Usage)?;
    let (name, training, test) = match spec {
        DataSpec::Gaussian {
            n,
            classes,
            separation,
            seed,
        } => {
            let d = synth_gaussian(n, classes, separation, seed.unwrap_or(s.seed))?;
            let name = file_name_part(data.trim().trim_start_matches("synth:"));
            (name, d.training, d.test)
        }
        DataSpec::File(path) => {
            let name = file_name_part(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
            let training = load_file(&path, s, None)?;
            match &s.test {
                Some(t) => {
                    let test = load_file(Path::new(t), s, Some(training.categories().to_vec()))?;
                    let dim = training.dim().max(test.dim());
                    (name, with_dim(&training, dim)?, with_dim(&test, dim)?)
                }
                None => {
                    let (tr, te) = training.split_stratified(DEFAULT_TEST_FRACTION, s.seed)?;
                    (name, tr, te)
                }
            }
        }
    };
    let pairs = match s.folds {
        Some(k) => concat(&training, &test)?.kfold(k, s.seed)?,
        None => vec![(training, test)],
    };
    Ok((name, pairs))
}

fn build(spec: &MethodSpec, s: &RunSettings) -> std::result::Result<Box<dyn Quantifier>, CliError> {
    match build_method(spec, &s.learner) {
        Ok(q) => Ok(q),
        Err(BuildError::UnknownMethod(name)) => Err(CliError::Usage(Error::invalid(unknown_method_message(&name)))),
        Err(BuildError::Invalid(e)) => Err(CliError::Usage(e)),
    }
}

/// Seed, validation split and every parameter not searched over.
fn configure(q: &mut dyn Quantifier, s: &RunSettings, searched: &[String]) -> std::result::Result<(), CliError> {
    let current = q.get_params();
    let mut p = ParamMap::new();
    if current.contains_key("seed") {
        p.insert("seed".into(), (s.seed as f64).into());
    }
    if let Some(v) = &s.val_split {
        if current.contains_key("val_split") {
            p.insert("val_split".into(), v.clone());
        }
    }
    for (name, values) in &s.params {
        if !searched.contains(name) {
            p.insert(name.clone(), values[0].clone());
        }
    }
    q.set_params(&p).map_err(CliError::Usage)
}

/// `eval` and `gridsearch`. Grid search runs when forced or when a
/// parameter lists several values.
pub fn run_campaign(s: &RunSettings, force_search: bool, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> std::result::Result<(), CliError> {
    if force_search && s.params.is_empty() {
        return Err(CliError::Usage(Error::invalid("gridsearch needs at least one --param")));
    }
    let searched: Vec<String> = s
        .params
        .iter()
        .filter(|(_, v)| force_search || v.len() > 1)
        .map(|(n, _)| n.clone())
        .collect();
    for spec in &s.methods {
        build(spec, s)?;
    }
    fs::create_dir_all(&s.out).map_err(|e| Error::file(&s.out, e))?;
    for data in &s.data {
        let (dataset, pairs) = load_pairs(s, data)?;
        for spec in &s.methods {
            let label = spec.label();
            let mut merged: Option<QuantReport> = None;
            for (f, (training, test)) in pairs.iter().enumerate() {
                let mut q = build(spec, s)?;
                configure(q.as_mut(), s, &searched)?;
                let fitted = if searched.is_empty() {
                    q.fit(training)?;
                    q
                } else {
                    let cfg = GridSearchConfig {
                        grid: s.params.iter().filter(|(n, _)| searched.contains(n)).cloned().collect(),
                        protocol: s.protocol.clone(),
                        error: s.error.clone(),
                        val_split: s.search_split.clone(),
                        refit: s.refit,
                        seed: s.seed,
                    };
                    let res = grid_search_fit(q.as_ref(), training, &cfg)?;
                    let suffix = if pairs.len() > 1 { format!(".fold{f}") } else { String::new() };
                    let trace = s.out.join(format!("{dataset}__{label}{suffix}.trace.csv"));
                    save_trace(&res.trace, &trace)?;
                    writeln!(
                        out,
                        "{dataset} {label}{suffix} best: {} {}={:.6}",
                        format_params(&res.best_params),
                        s.error,
                        res.best_score
                    )
                    .map_err(Error::from)?;
                    res.quantifier
                };
                let mut cfg = s.protocol.clone();
                if pairs.len() > 1 {
                    cfg.seed = derive_seed(s.seed, f as u64, 0);
                }
                let report = evaluate(fitted.as_ref(), Some(training), test, &cfg, &s.metrics)?;
                match &mut merged {
                    None => merged = Some(report),
                    Some(m) => m.append(report)?,
                }
            }
            let mut report = merged.expect("at least one fold");
            report.meta.dataset = dataset.clone();
            report.meta.method = spec.to_string();
            for w in &report.meta.warnings {
                writeln!(err, "warning: {dataset} {label}: {w}").map_err(Error::from)?;
            }
            let path = s.out.join(format!("{dataset}__{label}.csv"));
            report.save(&path)?;
            let summary: Vec<String> = s
                .metrics
                .iter()
                .map(|m| Ok(format!("{m}={:.6}", summarize(&report, m)?)))
                .collect::<Result<_>>()?;
            writeln!(
                out,
                "{dataset} {label} rows={} {} -> {}",
                report.len(),
                summary.join(" "),
                path.display()
            )
            .map_err(Error::from)?;
        }
    }
    Ok(())
}

/// A report column answering to `metric`, matching `ae` with `mae` etc.
fn metric_column(report: &QuantReport, metric: &str) -> Result<Vec<f64>> {
    if let Ok(c) = report.column(metric) {
        return Ok(c);
    }
    let want = ErrorMeasure::parse(metric)?;
    let name = report
        .metrics
        .iter()
        .find(|m| ErrorMeasure::from_name(m) == Some(want))
        .ok_or_else(|| Error::invalid(format!("report has no `{metric}` column")))?;
    report.column(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    Best,
    /// p >= 0.05 against the best.
    Tied,
    /// 0.001 <= p < 0.05.
    Weak,
    /// p < 0.001.
    Different,
}

impl Stratum {
    pub fn from_p(p: f64) -> Self {
        if p >= 0.05 {
            Stratum::Tied
        } else if p >= 0.001 {
            Stratum::Weak
        } else {
            Stratum::Different
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stratum::Best => "best",
            Stratum::Tied => "p>=0.05",
            Stratum::Weak => "p<0.05",
            Stratum::Different => "p<0.001",
        }
    }

    fn mark(self) -> &'static str {
        match self {
            Stratum::Best => "*",
            Stratum::Tied => "=",
            Stratum::Weak => "~",
            Stratum::Different => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableCell {
    pub mean: f64,
    pub stratum: Option<Stratum>,
    pub p_value: Option<f64>,
    /// Paired t statistic of this method minus the best.
    pub t: Option<f64>,
    pub rank: f64,
}

/// Per dataset and method: mean error, significance against the best
/// method of that dataset, and rank (1 is best, ties share the mean rank).
pub fn build_table(
    reports: &BTreeMap<String, BTreeMap<String, QuantReport>>,
    metric: &str,
) -> Result<BTreeMap<String, BTreeMap<String, TableCell>>> {
    let mut table = BTreeMap::new();
    for (dataset, methods) in reports {
        let cols: Vec<(&String, Vec<f64>)> = methods
            .iter()
            .map(|(m, r)| Ok((m, metric_column(r, metric)?)))
            .collect::<Result<_>>()?;
        let means: Vec<f64> = cols
            .iter()
            .map(|(_, c)| if c.is_empty() { f64::NAN } else { c.iter().sum::<f64>() / c.len() as f64 })
            .collect();
        let best = (0..means.len())
            .min_by(|&a, &b| means[a].total_cmp(&means[b]))
            .ok_or_else(|| Error::invalid("empty dataset group"))?;
        let mut row = BTreeMap::new();
        for (i, (method, col)) in cols.iter().enumerate() {
            let (stratum, p_value, t) = if cols.len() == 1 {
                (None, None, None)
            } else if i == best {
                (Some(Stratum::Best), None, None)
            } else {
                if col.len() != cols[best].1.len() {
                    return Err(Error::invalid(format!(
                        "{dataset}: `{method}` has {} rows but `{}` has {}",
                        col.len(),
                        cols[best].0,
                        cols[best].1.len()
                    )));
                }
                let t = paired_t_test(col, &cols[best].1)?;
                (Some(Stratum::from_p(t.p_value)), Some(t.p_value), Some(t.t))
            };
            let below = means.iter().filter(|&&m| m < means[i]).count() as f64;
            let equal = means.iter().filter(|&&m| m == means[i]).count() as f64;
            row.insert(
                method.to_string(),
                TableCell {
                    mean: means[i],
                    stratum,
                    p_value,
                    t,
                    rank: below + (equal + 1.0) / 2.0,
                },
            );
        }
        table.insert(dataset.clone(), row);
    }
    Ok(table)
}

fn report_files(dir: &Path) -> Result<BTreeMap<String, BTreeMap<String, QuantReport>>> {
    let mut out: BTreeMap<String, BTreeMap<String, QuantReport>> = BTreeMap::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for p in paths {
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_suffix(".csv") else { continue };
        if stem.ends_with(".trace") || !p.is_file() {
            continue;
        }
        let Some((dataset, method)) = stem.split_once("__") else { continue };
        let report = QuantReport::load(&p)?;
        out.entry(dataset.to_string()).or_default().insert(method.to_string(), report);
    }
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "no `<dataset>__<method>.csv` reports in {}",
            dir.display()
        )));
    }
    Ok(out)
}

pub fn run_table(a: &TableArgs, out: &mut dyn Write) -> Result<()> {
    let reports = report_files(&a.reports)?;
    let table = build_table(&reports, &a.metric)?;
    let methods: Vec<String> = {
        let mut m: Vec<String> = table.values().flat_map(|r| r.keys().cloned()).collect();
        m.sort();
        m.dedup();
        m
    };

    let mut text: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["dataset".to_string()];
    header.extend(methods.iter().cloned());
    text.push(header);
    for (dataset, row) in &table {
        let mut line = vec![dataset.clone()];
        for m in &methods {
            line.push(match row.get(m) {
                Some(c) => format!("{:.4}{}", c.mean, c.stratum.map_or("", Stratum::mark)),
                None => "-".into(),
            });
        }
        text.push(line);
    }
    let mut ranks = vec!["avg rank".to_string()];
    for m in &methods {
        let r: Vec<f64> = table.values().filter_map(|row| row.get(m)).map(|c| c.rank).collect();
        ranks.push(format!("{:.2}", r.iter().sum::<f64>() / r.len() as f64));
    }
    text.push(ranks);
    let widths: Vec<usize> = (0..text[0].len())
        .map(|j| text.iter().map(|l| l[j].chars().count()).max().unwrap_or(0))
        .collect();
    for line in &text {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", cells.join("  ").trim_end())?;
    }
    if methods.len() > 1 {
        writeln!(out, "* best, = p>=0.05, ~ 0.001<=p<0.05, unmarked p<0.001 (paired t-test against the best)")?;
    }

    let csv_path = a.out.clone().unwrap_or_else(|| a.reports.join("table.csv"));
    let file = fs::File::create(&csv_path).map_err(|e| Error::file(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["dataset", "method", "mean", "stratum", "p_value", "t", "rank"])
        .map_err(|e| Error::invalid(e.to_string()))?;
    for (dataset, row) in &table {
        for (m, c) in row {
            w.write_record([
                dataset.clone(),
                m.clone(),
                format!("{:.6}", c.mean),
                c.stratum.map_or(String::new(), |s| s.name().into()),
                c.p_value.map_or(String::new(), |p| format!("{p}")),
                c.t.map_or(String::new(), |t| format!("{t}")),
                format!("{}", c.rank),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
    }
    w.flush()?;
    writeln!(out, "table written to {}", csv_path.display())?;
    Ok(())
}

fn plot_label(path: &Path, report: &QuantReport) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.split_once("__") {
        Some((_, m)) => m.to_string(),
        None if !report.meta.method.is_empty() => report.meta.method.clone(),
        None => stem,
    }
}

pub fn run_plot(a: &PlotArgs, out: &mut dyn Write) -> Result<()> {
    let reports: Vec<(String, QuantReport)> = a
        .reports
        .iter()
        .map(|p| {
            let r = QuantReport::load(p)?;
            Ok((plot_label(p, &r), r))
        })
        .collect::<Result<_>>()?;
    fs::create_dir_all(&a.out).map_err(|e| Error::file(&a.out, e))?;
    let (name, csv, svg) = match a.kind {
        PlotKind::Diagonal => {
            let pts = plots::diagonal_data(&reports, a.target, a.bins.unwrap_or(10))?;
            let mut buf = Vec::new();
            plots::write_diagonal_csv(&pts, &mut buf)?;
            ("diagonal", buf, plots::diagonal_svg(&pts))
        }
        PlotKind::Shift => {
            let training = a.training_prev.as_deref().map(PrevalenceVector::from_field).transpose()?;
            let pts = plots::shift_data(
                &reports,
                training.as_ref(),
                ErrorMeasure::parse(&a.shift_measure)?,
                ErrorMeasure::parse(&a.error)?,
                a.bins.unwrap_or(10),
            )?;
            let mut buf = Vec::new();
            plots::write_shift_csv(&pts, &mut buf)?;
            ("shift", buf, plots::shift_svg(&pts))
        }
        PlotKind::Bias => {
            let boxes = plots::bias_box_data(&reports, a.target, a.bins.unwrap_or(5))?;
            let mut buf = Vec::new();
            plots::write_bias_csv(&boxes, &mut buf)?;
            ("bias", buf, plots::bias_svg(&boxes))
        }
    };
    for (ext, bytes) in [("csv", csv), ("svg", svg.into_bytes())] {
        let path = a.out.join(format!("{name}.{ext}"));
        fs::write(&path, bytes).map_err(|e| Error::file(&path, e))?;
        writeln!(out, "{}", path.display())?;
    }
    Ok(())
}

pub fn run_combinations(a: &CombinationsArgs, out: &mut dyn Write) -> Result<()> {
    match (a.n_prevpoints, a.budget) {
        (Some(n), _) => writeln!(out, "{}", num_prevalence_combinations(n, a.classes, a.repeats)?)?,
        (None, Some(b)) => {
            let n = get_nprevpoints_approximation(b, a.classes, a.repeats)?;
            let samples = num_prevalence_combinations(n, a.classes, a.repeats)?;
            writeln!(out, "n_prevpoints={n} samples={samples}")?;
        }
        (None, None) => return Err(Error::invalid("give --n-prevpoints or --budget")),
    }
    Ok(())
}
