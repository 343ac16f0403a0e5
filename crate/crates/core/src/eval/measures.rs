//! Quantification error measures.

use crate::data::PrevalenceVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorMeasure {
    /// Absolute error.
    Ae,
    /// Relative absolute error, on smoothed values.
    Rae,
    /// Squared error.
    Se,
    /// Kullback-Leibler divergence, on smoothed values.
    Kld,
    /// KLD pushed through `2σ(x) − 1`.
    Nkld,
}

pub const ALL_MEASURES: [ErrorMeasure; 5] = [
    ErrorMeasure::Ae,
    ErrorMeasure::Rae,
    ErrorMeasure::Se,
    ErrorMeasure::Kld,
    ErrorMeasure::Nkld,
];

impl ErrorMeasure {
    /// Accepts both the per-sample name (`ae`) and the mean form (`mae`).
    pub fn from_name(name: &str) -> Option<Self> {
        let n = name.trim().to_ascii_lowercase();
        ALL_MEASURES
            .iter()
            .copied()
            .find(|m| n == m.name() || n == m.mean_name())
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::from_name(name).ok_or_else(|| Error::invalid(format!("unknown error measure `{name}`")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorMeasure::Ae => "ae",
            ErrorMeasure::Rae => "rae",
            ErrorMeasure::Se => "se",
            ErrorMeasure::Kld => "kld",
            ErrorMeasure::Nkld => "nkld",
        }
    }

    pub fn mean_name(self) -> &'static str {
        match self {
            ErrorMeasure::Ae => "mae",
            ErrorMeasure::Rae => "mrae",
            ErrorMeasure::Se => "mse",
            ErrorMeasure::Kld => "mkld",
            ErrorMeasure::Nkld => "mnkld",
        }
    }

    pub fn needs_smoothing(self) -> bool {
        matches!(self, ErrorMeasure::Rae | ErrorMeasure::Kld | ErrorMeasure::Nkld)
    }
}

/// The customary smoothing constant `1 / (2T)` for samples of size `T`.
pub fn default_smoothing(sample_size: usize) -> f64 {
    1.0 / (2.0 * sample_size as f64)
}

/// `(p + eps) / (1 + c·eps)` element-wise.
pub fn smooth(p: &[f64], eps: f64) -> Vec<f64> {
    let denom = 1.0 + eps * p.len() as f64;
    p.iter().map(|v| (v + eps) / denom).collect()
}

/// Error between a true and an estimated prevalence. `eps` smooths the
/// measures that divide or take logarithms.
pub fn error(measure: ErrorMeasure, true_prev: &PrevalenceVector, est_prev: &PrevalenceVector, eps: f64) -> Result<f64> {
    let c = true_prev.len();
    if est_prev.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: est_prev.len(),
        });
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("smoothing must be a finite value >= 0, got {eps}")));
    }
    let n = c as f64;
    let pairs = || true_prev.iter().zip(est_prev.iter());
    match measure {
        ErrorMeasure::Ae => return Ok(pairs().map(|(p, q)| (q - p).abs()).sum::<f64>() / n),
        ErrorMeasure::Se => return Ok(pairs().map(|(p, q)| (q - p) * (q - p)).sum::<f64>() / n),
        _ => {}
    }
    if eps == 0.0 && pairs().any(|(&p, &q)| p == 0.0 || q == 0.0) {
        return Err(Error::Domain(format!(
            "{} is undefined on a zero prevalence without smoothing",
            measure.name()
        )));
    }
    let p = smooth(true_prev, eps);
    let q = smooth(est_prev, eps);
    let kld = || -> f64 { p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0) };
    Ok(match measure {
        ErrorMeasure::Rae => p.iter().zip(&q).map(|(a, b)| (b - a).abs() / a).sum::<f64>() / n,
        ErrorMeasure::Kld => kld(),
        ErrorMeasure::Nkld => 2.0 / (1.0 + (-kld()).exp()) - 1.0,
        ErrorMeasure::Ae | ErrorMeasure::Se => unreachable!(),
    })
}
