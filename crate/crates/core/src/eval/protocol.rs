//! Sampling protocols: the artificial prevalence protocol (APP) over a
//! prevalence grid, and the natural protocol (NPP) of uniform samples.

use rayon::prelude::*;

use super::combinatorics::{get_nprevpoints_approximation, grid_numerators};
use super::measures::{default_smoothing, error, ErrorMeasure};
use super::report::{QuantReport, ReportMeta, ReportRow, Segment};
use crate::data::{LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::math::derive_seed;
use crate::quantifier::Quantifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    App,
    Npp,
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "app" => Ok(Protocol::App),
            "npp" => Ok(Protocol::Npp),
            _ => Err(Error::invalid(format!("unknown protocol `{s}` (expected app or npp)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::App => "app",
            Protocol::Npp => "npp",
        }
    }
}

/// Grid resolution of the APP, given directly or through a sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    Points(usize),
    Budget(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub sample_size: usize,
    pub grid: Grid,
    pub n_repetitions: usize,
    pub seed: u64,
    /// Worker threads; 0 runs on the current rayon pool.
    pub jobs: usize,
    /// Smoothing for rae/kld/nkld; `None` means `1 / (2T)`.
    pub smoothing: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            protocol: Protocol::App,
            sample_size: 100,
            grid: Grid::Points(21),
            n_repetitions: 1,
            seed: 0,
            jobs: 0,
            smoothing: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        if self.n_repetitions == 0 {
            return Err(Error::invalid("n_repetitions must be positive"));
        }
        if let Grid::Points(n) = self.grid {
            if n < 2 {
                return Err(Error::invalid("n_prevpoints must be at least 2"));
            }
        }
        if let Some(e) = self.smoothing {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::invalid("smoothing must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing.unwrap_or_else(|| default_smoothing(self.sample_size))
    }

    /// Grid resolution for `n_classes` categories.
    pub fn n_prevpoints(&self, n_classes: usize) -> Result<usize> {
        match self.grid {
            Grid::Points(n) => Ok(n),
            Grid::Budget(b) => get_nprevpoints_approximation(b, n_classes, self.n_repetitions),
        }
    }

    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        if self.jobs == 0 {
            return Ok(None);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map(Some)
            .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))
    }
}

/// One sample of a campaign: the drawn test indices.
struct Draw {
    indices: Vec<usize>,
    replacement: bool,
}

fn parse_metrics(metrics: &[String]) -> Result<Vec<ErrorMeasure>> {
    if metrics.is_empty() {
        return Err(Error::invalid("at least one error measure is required"));
    }
    metrics.iter().map(|m| ErrorMeasure::parse(m)).collect()
}

fn run(
    quantifier: &dyn Quantifier,
    test: &LabelledCollection,
    cfg: &ProtocolConfig,
    metrics: &[String],
    draws: Vec<Result<Draw>>,
    mut meta: ReportMeta,
) -> Result<QuantReport> {
    let measures = parse_metrics(metrics)?;
    let eps = cfg.smoothing();
    let c = test.n_categories();
    let cached = match quantifier.as_aggregative() {
        Some(agg) => Some(agg.classify(test.instances())?),
        None => None,
    };
    let work = || -> Vec<Result<(ReportRow, bool)>> {
        draws
            .into_par_iter()
            .enumerate()
            .map(|(sample, draw)| {
                let draw = draw?;
                let mut counts = vec![0usize; c];
                for &i in &draw.indices {
                    counts[test.labels()[i]] += 1;
                }
                let true_prev = PrevalenceVector::from_counts(&counts)?;
                let estim_prev = match (&cached, quantifier.as_aggregative()) {
                    (Some(rows), Some(agg)) => {
                        let sel: Vec<&[f64]> = draw.indices.iter().map(|&i| rows[i].as_slice()).collect();
                        agg.aggregate(&sel)?
                    }
                    _ => {
                        let inst: Vec<_> = draw.indices.iter().map(|&i| test.instances()[i].clone()).collect();
                        quantifier.quantify(&inst)?
                    }
                };
                if estim_prev.len() != c {
                    return Err(Error::DimensionMismatch {
                        expected: c,
                        found: estim_prev.len(),
                    });
                }
                let errors = measures
                    .iter()
                    .map(|&m| error(m, &true_prev, &estim_prev, eps))
                    .collect::<Result<Vec<_>>>()?;
                Ok((
                    ReportRow {
                        sample,
                        true_prev,
                        estim_prev,
                        errors,
                    },
                    draw.replacement,
                ))
            })
            .collect()
    };
    let rows = match cfg.pool()? {
        Some(pool) => pool.install(work),
        None => work(),
    };
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let (row, repl) = r?;
        meta.replacement |= repl;
        out.push(row);
    }
    meta.warnings = quantifier.warnings();
    Ok(QuantReport {
        meta,
        metrics: metrics.to_vec(),
        rows: out,
    })
}

fn base_meta(quantifier: &dyn Quantifier, cfg: &ProtocolConfig) -> ReportMeta {
    ReportMeta {
        method: quantifier.name(),
        params: quantifier
            .get_params()
            .into_iter()
            .map(|(k, v)| (k, v.to_string()))
            .collect(),
        protocol: cfg.protocol.name().into(),
        sample_size: cfg.sample_size,
        n_repetitions: cfg.n_repetitions,
        seed: cfg.seed,
        smoothing: cfg.smoothing(),
        ..Default::default()
    }
}

/// Target prevalences of an APP campaign in report row order.
pub fn app_targets(n_classes: usize, cfg: &ProtocolConfig) -> Result<Vec<(usize, usize, PrevalenceVector)>> {
    let n = cfg.n_prevpoints(n_classes)?;
    let m = (n - 1) as f64;
    let mut out = Vec::new();
    for (ci, nums) in grid_numerators(n, n_classes)?.into_iter().enumerate() {
        let prev = PrevalenceVector::new(nums.iter().map(|&v| v as f64 / m).collect())?;
        for rep in 0..cfg.n_repetitions {
            out.push((ci, rep, prev.clone()));
        }
    }
    Ok(out)
}

/// Evaluates on `n_repetitions` samples at every grid prevalence. The sample
/// for combination `i`, repetition `j` is seeded by `(seed, i, j)`, so the
/// report does not depend on thread scheduling.
pub fn app_evaluate(
    quantifier: &dyn Quantifier,
    test: &LabelledCollection,
    cfg: &ProtocolConfig,
    metrics: &[String],
) -> Result<QuantReport> {
    cfg.validate()?;
    let targets = app_targets(test.n_categories(), cfg)?;
    let draws = targets
        .par_iter()
        .map(|(ci, rep, prev)| {
            let seed = derive_seed(cfg.seed, *ci as u64, *rep as u64);
            let counts = test.counts_at_prevalence(cfg.sample_size, prev)?;
            let avail = test.counts();
            let replacement = counts.iter().zip(&avail).any(|(want, have)| want > have);
            Ok(Draw {
                indices: test.sample_indices_at_prevalence(cfg.sample_size, prev, seed)?,
                replacement,
            })
        })
        .collect();
    let mut meta = base_meta(quantifier, cfg);
    meta.n_prevpoints = Some(cfg.n_prevpoints(test.n_categories())?);
    run(quantifier, test, cfg, metrics, draws, meta)
}

/// Evaluates on `n_repetitions` uniform samples of the test set.
pub fn npp_evaluate(
    quantifier: &dyn Quantifier,
    test: &LabelledCollection,
    cfg: &ProtocolConfig,
    metrics: &[String],
) -> Result<QuantReport> {
    cfg.validate()?;
    let draws = (0..cfg.n_repetitions)
        .map(|rep| {
            let (indices, replacement) =
                test.uniform_sample_indices(cfg.sample_size, derive_seed(cfg.seed, 0, rep as u64))?;
            Ok(Draw { indices, replacement })
        })
        .collect();
    run(quantifier, test, cfg, metrics, draws, base_meta(quantifier, cfg))
}

/// Dispatches on `cfg.protocol`; the report records the quantifier's
/// training prevalence when `training` is given.
pub fn evaluate(
    quantifier: &dyn Quantifier,
    training: Option<&LabelledCollection>,
    test: &LabelledCollection,
    cfg: &ProtocolConfig,
    metrics: &[String],
) -> Result<QuantReport> {
    let mut report = match cfg.protocol {
        Protocol::App => app_evaluate(quantifier, test, cfg, metrics)?,
        Protocol::Npp => npp_evaluate(quantifier, test, cfg, metrics)?,
    };
    if let Some(t) = training {
        report.meta.segments = vec![Segment {
            start: 0,
            training_prevalence: t.prevalence().into_inner(),
        }];
    }
    Ok(report)
}
