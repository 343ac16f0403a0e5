use nalgebra::{DMatrix, DVector};

use crate::classify::argmax;
use crate::data::PrevalenceVector;
use crate::error::{Error, Result};

/// Denominator below which the binary adjustment is considered undefined.
pub const MIN_DENOMINATOR: f64 = 1e-6;
/// Largest accepted condition number of the normal-equations matrix.
pub const MAX_CONDITION: f64 = 1e8;

/// Per-true-category classifier behaviour, `M[i][j] = P(predicted i | true j)`
/// (hard rates) or the mean posterior of `i` over items of true category `j`
/// (soft rates). Columns sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalRates {
    matrix: Vec<Vec<f64>>,
}

impl ConditionalRates {
    pub fn identity(c: usize) -> Self {
        let matrix = (0..c)
            .map(|i| (0..c).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        ConditionalRates { matrix }
    }

    /// Validates a row-major `M[i][j]` matrix.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let c = matrix.len();
        if c < 2 || matrix.iter().any(|r| r.len() != c) {
            return Err(Error::invalid("rates must be a square matrix with c >= 2"));
        }
        if matrix.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("rates must lie in [0,1]"));
        }
        for j in 0..c {
            let s: f64 = matrix.iter().map(|r| r[j]).sum();
            if (s - 1.0).abs() > 1e-8 {
                return Err(Error::invalid(format!("column {j} sums to {s}")));
            }
        }
        Ok(ConditionalRates { matrix })
    }

    /// Hard rates from validation posteriors (prediction = argmax).
    pub fn hard(posteriors: &[Vec<f64>], labels: &[usize], c: usize) -> Self {
        Self::accumulate(posteriors, labels, c, |row, acc| acc[argmax(row)] += 1.0)
    }

    /// Soft rates: mean posterior per true category.
    pub fn soft(posteriors: &[Vec<f64>], labels: &[usize], c: usize) -> Self {
        Self::accumulate(posteriors, labels, c, |row, acc| {
            for (a, p) in acc.iter_mut().zip(row) {
                *a += p;
            }
        })
    }

    fn accumulate(
        posteriors: &[Vec<f64>],
        labels: &[usize],
        c: usize,
        add: impl Fn(&[f64], &mut [f64]),
    ) -> Self {
        let mut cols = vec![vec![0.0; c]; c];
        let mut counts = vec![0usize; c];
        for (row, &y) in posteriors.iter().zip(labels) {
            add(row, &mut cols[y]);
            counts[y] += 1;
        }
        let mut matrix = vec![vec![0.0; c]; c];
        for j in 0..c {
            for i in 0..c {
                matrix[i][j] = if counts[j] == 0 {
                    // unseen category: assume it is recognised perfectly
                    f64::from(u8::from(i == j))
                } else {
                    cols[j][i] / counts[j] as f64
                };
            }
        }
        ConditionalRates { matrix }
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn n_categories(&self) -> usize {
        self.matrix.len()
    }

    pub fn tpr(&self) -> f64 {
        self.matrix[1][1]
    }

    pub fn fpr(&self) -> f64 {
        self.matrix[1][0]
    }
}

/// Result of inverting classifier bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    pub prevalence: PrevalenceVector,
    /// Solution before clipping and renormalization.
    pub raw: Vec<f64>,
    /// Set when the system was singular and the input was returned unchanged.
    pub fallback: bool,
}

/// Corrects a CC-style (or, with soft rates, PCC-style) estimate.
///
/// Binary: `(p - fpr) / (tpr - fpr)` on the category at index 1, clipped to
/// [0, 1]. Otherwise `M p = est` is solved by least squares on the normal
/// equations, negatives are clipped and the result renormalized. A singular
/// system returns `est` with `fallback` set.
pub fn acc_adjust(est: &PrevalenceVector, rates: &ConditionalRates) -> Result<Adjustment> {
    let c = rates.n_categories();
    if est.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: est.len(),
        });
    }
    let unchanged = || Adjustment {
        prevalence: est.clone(),
        raw: est.to_vec(),
        fallback: true,
    };
    if c == 2 {
        let denom = rates.tpr() - rates.fpr();
        if denom.abs() < MIN_DENOMINATOR {
            return Ok(unchanged());
        }
        let pos = (est[1] - rates.fpr()) / denom;
        return Ok(Adjustment {
            prevalence: PrevalenceVector::binary(pos.clamp(0.0, 1.0))?,
            raw: vec![1.0 - pos, pos],
            fallback: false,
        });
    }
    let m = DMatrix::from_fn(c, c, |i, j| rates.matrix[i][j]);
    let ata = m.transpose() * &m;
    let atb = m.transpose() * DVector::from_column_slice(est);
    let eig = ata.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())));
    if !(lo > 0.0) || !(hi / lo <= MAX_CONDITION) {
        return Ok(unchanged());
    }
    let Some(chol) = ata.cholesky() else {
        return Ok(unchanged());
    };
    let p = chol.solve(&atb);
    let raw: Vec<f64> = p.iter().cloned().collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Ok(unchanged());
    }
    Ok(Adjustment {
        prevalence: PrevalenceVector::from_unnormalized(&raw),
        raw,
        fallback: false,
    })
}

/// Same correction as [`acc_adjust`], applied to a PCC estimate with soft rates.
pub fn pacc_adjust(est: &PrevalenceVector, soft_rates: &ConditionalRates) -> Result<Adjustment> {
    acc_adjust(est, soft_rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_rates(tpr: f64, fpr: f64) -> ConditionalRates {
        ConditionalRates::from_matrix(vec![vec![1.0 - fpr, 1.0 - tpr], vec![fpr, tpr]]).unwrap()
    }

    fn pos(p: f64) -> PrevalenceVector {
        PrevalenceVector::binary(p).unwrap()
    }

    #[test]
    fn binary_formula() {
        let a = acc_adjust(&pos(0.6), &binary_rates(1.0, 0.0)).unwrap();
        assert!((a.prevalence[1] - 0.6).abs() < 1e-12);
        let a = acc_adjust(&pos(0.5), &binary_rates(0.9, 0.1)).unwrap();
        assert!((a.prevalence[1] - 0.5).abs() < 1e-12);
        let a = acc_adjust(&pos(0.05), &binary_rates(0.8, 0.1)).unwrap();
        assert!((a.raw[1] + 1.0 / 14.0).abs() < 1e-12);
        assert_eq!(a.prevalence.values(), &[1.0, 0.0]);
        assert!(!a.fallback);
    }

    #[test]
    fn soft_binary_formula() {
        let a = pacc_adjust(&pos(0.55), &binary_rates(0.8, 0.3)).unwrap();
        assert!((a.prevalence[1] - 0.5).abs() < 1e-12);
        let a = pacc_adjust(&pos(0.55), &ConditionalRates::identity(2)).unwrap();
        assert!((a.prevalence[1] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn singular_falls_back() {
        let a = pacc_adjust(&pos(0.55), &binary_rates(0.4, 0.4)).unwrap();
        assert!(a.fallback);
        assert_eq!(a.prevalence, pos(0.55));
        let same_cols = ConditionalRates::from_matrix(vec![
            vec![0.5, 0.5, 0.5],
            vec![0.3, 0.3, 0.3],
            vec![0.2, 0.2, 0.2],
        ])
        .unwrap();
        let est = PrevalenceVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let a = acc_adjust(&est, &same_cols).unwrap();
        assert!(a.fallback);
        assert_eq!(a.prevalence, est);
    }

    #[test]
    fn multiclass_identity_and_planted() {
        let est = PrevalenceVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let a = acc_adjust(&est, &ConditionalRates::identity(3)).unwrap();
        for (x, y) in a.prevalence.iter().zip(est.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let m = vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.2, 0.7]];
        let planted = [0.1, 0.3, 0.6];
        let observed: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m[i][j] * planted[j]).sum()).collect();
        let rates = ConditionalRates::from_matrix(m).unwrap();
        let a = acc_adjust(&PrevalenceVector::new(observed).unwrap(), &rates).unwrap();
        for (x, y) in a.raw.iter().zip(planted) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn rates_from_posteriors() {
        let rows = vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.2, 0.8], vec![0.3, 0.7]];
        let labels = [0, 0, 1, 1];
        let hard = ConditionalRates::hard(&rows, &labels, 2);
        assert_eq!(hard.tpr(), 1.0);
        assert_eq!(hard.fpr(), 0.5);
        let soft = ConditionalRates::soft(&rows, &labels, 2);
        assert!((soft.tpr() - 0.75).abs() < 1e-12);
        assert!((soft.fpr() - 0.35).abs() < 1e-12);
        for j in 0..2 {
            let s: f64 = soft.matrix().iter().map(|r| r[j]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
