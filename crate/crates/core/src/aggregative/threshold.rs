//! Decision-threshold variants of ACC for binary problems.

use std::sync::Arc;

use super::{require_binary, Base, MIN_DENOMINATOR};
use crate::classify::{cross_val_posteriors, Classifier, Learner, ValSplit};
use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::math::median;
use crate::quantifier::{quantify_aggregative, unknown_param, Aggregative, ParamMap, Quantifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdPolicy {
    /// tpr closest to 0.5.
    T50,
    /// tpr closest to 1 - fpr.
    X,
    /// Largest tpr - fpr.
    Max,
    /// Median estimate over all thresholds.
    Ms,
    /// Median over thresholds with tpr - fpr > 0.25.
    Ms2,
}

impl ThresholdPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdPolicy::T50 => "t50",
            ThresholdPolicy::X => "x",
            ThresholdPolicy::Max => "max",
            ThresholdPolicy::Ms => "ms",
            ThresholdPolicy::Ms2 => "ms2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "t50" => ThresholdPolicy::T50,
            "x" => ThresholdPolicy::X,
            "max" => ThresholdPolicy::Max,
            "ms" => ThresholdPolicy::Ms,
            "ms2" => ThresholdPolicy::Ms2,
            _ => return None,
        })
    }
}

pub const MS2_MIN_GAP: f64 = 0.25;

/// Validation tpr/fpr at every candidate threshold. An item counts as
/// positive at threshold `t` when its score is `>= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
}

impl ThresholdTable {
    /// Candidates are the unique scores, ascending.
    pub fn new(scores: &[f64], positive: &[bool]) -> Result<Self> {
        if scores.len() != positive.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                found: positive.len(),
            });
        }
        let n_pos = positive.iter().filter(|&&p| p).count();
        let n_neg = positive.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::invalid("threshold rates need validation items of both categories"));
        }
        let mut items: Vec<(f64, bool)> = scores.iter().cloned().zip(positive.iter().cloned()).collect();
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut table = ThresholdTable {
            thresholds: Vec::new(),
            tpr: Vec::new(),
            fpr: Vec::new(),
        };
        let mut i = 0;
        while i < items.len() {
            let t = items[i].0;
            while i < items.len() && items[i].0 == t {
                if items[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            table.thresholds.push(t);
            table.tpr.push(tp as f64 / n_pos as f64);
            table.fpr.push(fp as f64 / n_neg as f64);
        }
        table.thresholds.reverse();
        table.tpr.reverse();
        table.fpr.reverse();
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    fn usable(&self, i: usize) -> bool {
        (self.tpr[i] - self.fpr[i]).abs() >= MIN_DENOMINATOR
    }

    /// Candidate indices each policy draws from, ascending by threshold.
    pub fn selected(&self, policy: ThresholdPolicy) -> Vec<usize> {
        let usable: Vec<usize> = (0..self.len()).filter(|&i| self.usable(i)).collect();
        let best_by = |key: &dyn Fn(usize) -> f64| -> Vec<usize> {
            let mut best: Option<(usize, f64)> = None;
            for &i in &usable {
                let k = key(i);
                if best.is_none_or(|(_, b)| k < b) {
                    best = Some((i, k));
                }
            }
            best.map(|(i, _)| vec![i]).unwrap_or_default()
        };
        match policy {
            ThresholdPolicy::T50 => best_by(&|i| (self.tpr[i] - 0.5).abs()),
            ThresholdPolicy::X => best_by(&|i| (self.tpr[i] - (1.0 - self.fpr[i])).abs()),
            ThresholdPolicy::Max => best_by(&|i| -(self.tpr[i] - self.fpr[i])),
            ThresholdPolicy::Ms => usable,
            ThresholdPolicy::Ms2 => {
                let kept: Vec<usize> = usable
                    .iter()
                    .cloned()
                    .filter(|&i| self.tpr[i] - self.fpr[i] > MS2_MIN_GAP)
                    .collect();
                if kept.is_empty() {
                    usable
                } else {
                    kept
                }
            }
        }
    }

    /// Clipped adjusted positive prevalence at candidate `i`.
    pub fn adjusted(&self, i: usize, sorted_test: &[f64]) -> f64 {
        let above = sorted_test.len() - sorted_test.partition_point(|&s| s < self.thresholds[i]);
        let cc = above as f64 / sorted_test.len() as f64;
        ((cc - self.fpr[i]) / (self.tpr[i] - self.fpr[i])).clamp(0.0, 1.0)
    }
}

/// Positive prevalence estimate under `policy`, or `None` if no candidate has
/// a usable denominator.
pub fn threshold_quantify(table: &ThresholdTable, policy: ThresholdPolicy, test_scores: &[f64]) -> Result<Option<f64>> {
    if table.is_empty() {
        return Err(Error::invalid("empty threshold candidate set"));
    }
    if test_scores.is_empty() {
        return Err(Error::invalid("cannot quantify an empty sample"));
    }
    let mut sorted = test_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let estimates: Vec<f64> = table
        .selected(policy)
        .into_iter()
        .map(|i| table.adjusted(i, &sorted))
        .collect();
    Ok(match estimates.len() {
        0 => None,
        1 => Some(estimates[0]),
        _ => Some(median(&estimates)),
    })
}

/// Threshold quantifier; falls back to CC at threshold 0.5 when no candidate
/// is usable.
#[derive(Debug, Clone)]
pub struct ThresholdMethod {
    policy: ThresholdPolicy,
    base: Base,
    pub val_split: ValSplit,
    fitted: Option<(Arc<dyn Classifier>, ThresholdTable)>,
}

impl ThresholdMethod {
    pub fn new(policy: ThresholdPolicy, learner: Box<dyn Learner>) -> Self {
        ThresholdMethod {
            policy,
            base: Base::new(learner),
            val_split: ValSplit::default(),
            fitted: None,
        }
    }

    pub fn with_val_split(mut self, split: ValSplit) -> Self {
        self.val_split = split;
        self
    }

    pub fn table(&self) -> Option<&ThresholdTable> {
        self.fitted.as_ref().map(|(_, t)| t)
    }
}

impl Aggregative for ThresholdMethod {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        self.fitted.as_ref().ok_or(Error::NotFitted)?.0.posteriors(instances)
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let (_, table) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        let scores: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let pos = match threshold_quantify(table, self.policy, &scores)? {
            Some(p) => p,
            None => {
                self.base.fallbacks.bump();
                scores.iter().filter(|&&s| s >= 0.5).count() as f64 / scores.len() as f64
            }
        };
        PrevalenceVector::binary(pos)
    }
}

impl Quantifier for ThresholdMethod {
    fn name(&self) -> String {
        self.policy.name().into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        require_binary(training, self.policy.name())?;
        let cv = cross_val_posteriors(training, self.base.learner.as_ref(), &self.val_split, self.base.seed)?;
        let scores: Vec<f64> = cv.posteriors.iter().map(|r| r[1]).collect();
        let positive: Vec<bool> = cv.labels.iter().map(|&l| l == 1).collect();
        let table = ThresholdTable::new(&scores, &positive)?;
        self.base.record_fit(training, cv.classifier.as_ref());
        self.fitted = Some((cv.classifier, table));
        Ok(())
    }

    fn quantify(&self, instances: &[FeatureVec]) -> Result<PrevalenceVector> {
        quantify_aggregative(self, instances)
    }

    fn get_params(&self) -> ParamMap {
        let mut p = self.base.params();
        p.insert("val_split".into(), self.val_split.to_param());
        p
    }

    fn set_params(&mut self, params: &ParamMap) -> Result<()> {
        let name = self.name();
        let mut split = None;
        self.base.set_params(params, |k, v| match k {
            "val_split" => {
                split = Some(ValSplit::from_param(v)?);
                Ok(())
            }
            _ => Err(unknown_param(&name, k)),
        })?;
        if let Some(s) = split {
            self.val_split = s;
        }
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Quantifier> {
        Box::new(self.clone())
    }

    fn as_aggregative(&self) -> Option<&dyn Aggregative> {
        Some(self)
    }

    fn training_size(&self) -> Option<usize> {
        self.base.training_size
    }

    fn warnings(&self) -> Vec<String> {
        self.base.warnings(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [ThresholdPolicy; 5] = [
        ThresholdPolicy::T50,
        ThresholdPolicy::X,
        ThresholdPolicy::Max,
        ThresholdPolicy::Ms,
        ThresholdPolicy::Ms2,
    ];

    fn brute_rates(scores: &[f64], pos: &[bool], t: f64) -> (f64, f64) {
        let np = pos.iter().filter(|&&p| p).count() as f64;
        let nn = pos.len() as f64 - np;
        let tp = scores.iter().zip(pos).filter(|(&s, &p)| p && s >= t).count() as f64;
        let fp = scores.iter().zip(pos).filter(|(&s, &p)| !p && s >= t).count() as f64;
        (tp / np, fp / nn)
    }

    #[test]
    fn table_matches_brute_force() {
        let scores = [0.1, 0.4, 0.4, 0.35, 0.8, 0.9, 0.2, 0.7];
        let pos = [false, false, true, false, true, true, false, true];
        let t = ThresholdTable::new(&scores, &pos).unwrap();
        assert_eq!(t.thresholds, vec![0.1, 0.2, 0.35, 0.4, 0.7, 0.8, 0.9]);
        for (i, &th) in t.thresholds.iter().enumerate() {
            let (tpr, fpr) = brute_rates(&scores, &pos, th);
            assert!((t.tpr[i] - tpr).abs() < 1e-12 && (t.fpr[i] - fpr).abs() < 1e-12);
        }
    }

    #[test]
    fn two_valued_separated_scores_give_plain_cc() {
        let scores = [0.0, 0.0, 0.0, 1.0, 1.0];
        let pos = [false, false, false, true, true];
        let t = ThresholdTable::new(&scores, &pos).unwrap();
        let test = [0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        for policy in [ThresholdPolicy::T50, ThresholdPolicy::X, ThresholdPolicy::Max] {
            let sel = t.selected(policy);
            assert_eq!(sel.len(), 1);
            assert_eq!((t.tpr[sel[0]], t.fpr[sel[0]]), (1.0, 0.0));
            assert!((threshold_quantify(&t, policy, &test).unwrap().unwrap() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_scores_max_and_x_pick_perfect_threshold() {
        let scores = [0.05, 0.1, 0.2, 0.3, 0.7, 0.75, 0.8, 0.95];
        let pos = [false, false, false, false, true, true, true, true];
        let t = ThresholdTable::new(&scores, &pos).unwrap();
        for policy in [ThresholdPolicy::X, ThresholdPolicy::Max] {
            let i = t.selected(policy)[0];
            assert_eq!((t.tpr[i], t.fpr[i]), (1.0, 0.0));
            assert_eq!(t.thresholds[i], 0.7);
        }
        let test = [0.1, 0.2, 0.9, 0.05, 0.15, 0.3, 0.85, 0.1, 0.2, 0.99];
        let est = threshold_quantify(&t, ThresholdPolicy::Max, &test).unwrap().unwrap();
        assert!((est - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_ms_is_that_estimate() {
        // the lowest threshold has tpr = fpr = 1, leaving one usable candidate
        let scores = [0.2, 0.2, 0.6];
        let pos = [false, true, true];
        let t = ThresholdTable::new(&scores, &pos).unwrap();
        assert_eq!(t.selected(ThresholdPolicy::Ms), vec![1]);
        let test = [0.7, 0.1, 0.1, 0.1];
        let sorted = [0.1, 0.1, 0.1, 0.7];
        assert_eq!(
            threshold_quantify(&t, ThresholdPolicy::Ms, &test).unwrap(),
            Some(t.adjusted(1, &sorted))
        );
    }

    #[test]
    fn no_usable_candidate_is_none() {
        let scores = [0.5, 0.5];
        let pos = [false, true];
        let t = ThresholdTable::new(&scores, &pos).unwrap();
        for p in ALL {
            assert_eq!(threshold_quantify(&t, p, &[0.5]).unwrap(), None);
        }
    }

    #[test]
    fn one_sided_validation_is_an_error() {
        assert!(ThresholdTable::new(&[0.1, 0.2], &[true, true]).is_err());
    }

    proptest! {
        #[test]
        fn ms2_keeps_exactly_the_wide_gap_candidates(
            items in prop::collection::vec((0u32..20, any::<bool>()), 4..40),
            test in prop::collection::vec(0u32..20, 1..30),
        ) {
            let scores: Vec<f64> = items.iter().map(|(s, _)| *s as f64 / 20.0).collect();
            let pos: Vec<bool> = items.iter().map(|(_, p)| *p).collect();
            prop_assume!(pos.iter().any(|&p| p) && pos.iter().any(|&p| !p));
            let table = ThresholdTable::new(&scores, &pos).unwrap();
            let mut uniq = scores.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let test: Vec<f64> = test.iter().map(|&s| s as f64 / 20.0).collect();
            let cc = |t: f64| test.iter().filter(|&&s| s >= t).count() as f64 / test.len() as f64;
            let mut wide = Vec::new();
            let mut all = Vec::new();
            for &t in &uniq {
                let (tpr, fpr) = brute_rates(&scores, &pos, t);
                if (tpr - fpr).abs() < 1e-6 { continue; }
                let est = ((cc(t) - fpr) / (tpr - fpr)).clamp(0.0, 1.0);
                all.push(est);
                if tpr - fpr > 0.25 { wide.push(est); }
            }
            let chosen = if wide.is_empty() { all.clone() } else { wide };
            let got = threshold_quantify(&table, ThresholdPolicy::Ms2, &test).unwrap();
            if chosen.is_empty() {
                prop_assert_eq!(got, None);
            } else {
                let mut c = chosen.clone();
                c.sort_by(f64::total_cmp);
                let n = c.len();
                let expect = if n % 2 == 1 { c[n / 2] } else { (c[n / 2 - 1] + c[n / 2]) / 2.0 };
                prop_assert!((got.unwrap() - expect).abs() < 1e-12);
            }
            for p in ALL {
                if let Some(v) = threshold_quantify(&table, p, &test).unwrap() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
