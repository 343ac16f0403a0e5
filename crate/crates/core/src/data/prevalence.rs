use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Tolerance on the sum of a prevalence vector.
pub const SUM_TOLERANCE: f64 = 1e-8;

/// Nonnegative per-category values summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceVector(Vec<f64>);

impl PrevalenceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPrevalence("empty vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidPrevalence(format!("entry {v} is not a nonnegative real")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidPrevalence(format!("entries sum to {sum}")));
        }
        Ok(PrevalenceVector(values))
    }

    pub fn uniform(n: usize) -> Self {
        PrevalenceVector(vec![1.0 / n as f64; n])
    }

    /// Point mass on category `index`.
    pub fn point(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        PrevalenceVector(v)
    }

    /// Binary vector `[1 - positive, positive]`.
    pub fn binary(positive: f64) -> Result<Self> {
        Self::new(vec![1.0 - positive, positive])
    }

    /// Clips negatives (and non-finite values) to zero and L1-normalizes.
    /// Falls back to uniform when nothing positive remains.
    pub fn from_unnormalized(values: &[f64]) -> Self {
        let clipped: Vec<f64> = values
            .iter()
            .map(|v| if v.is_finite() && *v > 0.0 { *v } else { 0.0 })
            .collect();
        let sum: f64 = clipped.iter().sum();
        if sum <= 0.0 {
            return Self::uniform(values.len());
        }
        PrevalenceVector(clipped.into_iter().map(|v| v / sum).collect())
    }

    /// Relative frequencies of `counts`.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidPrevalence("no counts".into()));
        }
        Ok(PrevalenceVector(
            counts.iter().map(|&c| c as f64 / total as f64).collect(),
        ))
    }

    /// Additive smoothing `(p + eps) / (1 + c * eps)`.
    pub fn smoothed(&self, eps: f64) -> Vec<f64> {
        let denom = 1.0 + self.0.len() as f64 * eps;
        self.0.iter().map(|p| (p + eps) / denom).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Renders the vector as `;`-joined reals with six decimals.
    pub fn to_field(&self) -> String {
        self.0
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Parses the `;`-joined form written by [`PrevalenceVector::to_field`].
    /// Values are renormalized to absorb the six-decimal rounding.
    pub fn from_field(field: &str) -> Result<Self> {
        let values = field
            .split(';')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidPrevalence(format!("bad entry `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidPrevalence(format!("bad vector `{field}`")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-5 * values.len() as f64 {
            return Err(Error::InvalidPrevalence(format!("`{field}` does not sum to 1")));
        }
        Ok(PrevalenceVector(values.iter().map(|v| v / sum).collect()))
    }
}

impl Deref for PrevalenceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for PrevalenceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.3}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_vectors() {
        assert!(PrevalenceVector::new(vec![0.5, 0.6]).is_err());
        assert!(PrevalenceVector::new(vec![-0.1, 1.1]).is_err());
        assert!(PrevalenceVector::new(vec![]).is_err());
        assert!(PrevalenceVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(PrevalenceVector::new(vec![0.3, 0.7]).is_ok());
    }

    #[test]
    fn unnormalized_input() {
        assert_eq!(PrevalenceVector::from_unnormalized(&[0.0, 0.0]).values(), &[0.5, 0.5]);
        assert_eq!(PrevalenceVector::from_unnormalized(&[-1.0, 2.0]).values(), &[0.0, 1.0]);
    }

    #[test]
    fn smoothing_is_close_for_small_eps() {
        let p = PrevalenceVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let eps = 1e-4;
        for (s, o) in p.smoothed(eps).iter().zip(p.values()) {
            assert!((s - o).abs() <= 3.0 * eps);
        }
        let sum: f64 = p.smoothed(0.01).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_form() {
        let p = PrevalenceVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(p.to_field(), "0.250000;0.750000");
        assert_eq!(PrevalenceVector::from_field("0.250000;0.750000").unwrap(), p);
        assert!(PrevalenceVector::from_field("0.2;x").is_err());
    }
}
