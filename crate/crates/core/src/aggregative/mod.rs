//! Aggregative quantifiers: estimates computed from per-item classifier
//! outputs.
//!
//! The category at index 1 plays the role of the positive class in every
//! binary-only method.

mod hdy;
mod rates;
mod sld;
mod threshold;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub use hdy::{hdy_quantify, Hdy, HdyModel, HdyOutcome, HDY_ALPHA_STEPS, HDY_BIN_COUNTS};
pub use rates::{acc_adjust, pacc_adjust, Adjustment, ConditionalRates, MAX_CONDITION, MIN_DENOMINATOR};
pub use sld::{sld_quantify, Sld, SldOutcome};
pub use threshold::{threshold_quantify, ThresholdMethod, ThresholdPolicy, ThresholdTable};

use crate::classify::{argmax, cross_val_posteriors, Classifier, Learner, ValSplit};
use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::quantifier::{
    expect_usize, quantify_aggregative, split_learner_params, unknown_param, Aggregative, ParamMap, ParamValue,
    Quantifier, LEARNER_PREFIX,
};

/// Fraction of predictions per category.
pub fn cc_quantify(predictions: &[usize], n_categories: usize) -> Result<PrevalenceVector> {
    let mut counts = vec![0usize; n_categories];
    for &p in predictions {
        *counts
            .get_mut(p)
            .ok_or_else(|| Error::invalid(format!("prediction {p} out of range")))? += 1;
    }
    PrevalenceVector::from_counts(&counts)
}

/// Column-wise mean of posterior rows.
pub fn pcc_quantify<R: AsRef<[f64]>>(posteriors: &[R]) -> Result<PrevalenceVector> {
    let first = posteriors
        .first()
        .ok_or_else(|| Error::invalid("cannot quantify an empty sample"))?;
    let c = first.as_ref().len();
    let mut acc = vec![0.0; c];
    for row in posteriors {
        let row = row.as_ref();
        if row.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: row.len(),
            });
        }
        for (a, p) in acc.iter_mut().zip(row) {
            *a += p;
        }
    }
    let n = posteriors.len() as f64;
    Ok(PrevalenceVector::from_unnormalized(
        &acc.into_iter().map(|a| a / n).collect::<Vec<_>>(),
    ))
}

fn cc_from_rows(rows: &[&[f64]], c: usize) -> Result<PrevalenceVector> {
    let preds: Vec<usize> = rows.iter().map(|r| argmax(r)).collect();
    cc_quantify(&preds, c)
}

/// Counts quantify calls that had to skip an adjustment.
#[derive(Debug, Default)]
pub(crate) struct FallbackCounter(AtomicUsize);

impl FallbackCounter {
    pub(crate) fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

impl Clone for FallbackCounter {
    fn clone(&self) -> Self {
        FallbackCounter(AtomicUsize::new(self.get()))
    }
}

/// State shared by every learner-backed quantifier.
#[derive(Debug, Clone)]
pub(crate) struct Base {
    pub learner: Box<dyn Learner>,
    pub seed: u64,
    pub training_size: Option<usize>,
    pub warnings: Vec<String>,
    pub fallbacks: FallbackCounter,
}

impl Base {
    pub fn new(learner: Box<dyn Learner>) -> Self {
        Base {
            learner,
            seed: 0,
            training_size: None,
            warnings: Vec::new(),
            fallbacks: FallbackCounter::default(),
        }
    }

    pub fn params(&self) -> ParamMap {
        let mut p: ParamMap = self
            .learner
            .get_params()
            .into_iter()
            .map(|(k, v)| (format!("{LEARNER_PREFIX}{k}"), v))
            .collect();
        p.insert("seed".into(), (self.seed as f64).into());
        p
    }

    /// Routes `learner.*` names to the learner and `seed` here; everything
    /// else goes to `own`.
    pub fn set_params(
        &mut self,
        params: &ParamMap,
        mut own: impl FnMut(&str, &ParamValue) -> Result<()>,
    ) -> Result<()> {
        let (learner, rest) = split_learner_params(params);
        self.learner.set_params(&learner)?;
        for (k, v) in &rest {
            if k == "seed" {
                self.seed = expect_usize(k, v)? as u64;
            } else {
                own(k, v)?;
            }
        }
        Ok(())
    }

    pub fn record_fit(&mut self, training: &LabelledCollection, classifier: &dyn Classifier) {
        self.training_size = Some(training.len());
        self.warnings = classifier.warnings();
        self.fallbacks = FallbackCounter::default();
    }

    pub fn warnings(&self, what: &str) -> Vec<String> {
        let mut w = self.warnings.clone();
        let n = self.fallbacks.get();
        if n > 0 {
            w.push(format!("{what} fell back to the unadjusted estimate {n} time(s)"));
        }
        w
    }
}

pub(crate) fn require_binary(training: &LabelledCollection, method: &str) -> Result<()> {
    if training.n_categories() != 2 {
        return Err(Error::invalid(format!(
            "{method} is binary only; got {} categories",
            training.n_categories()
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) fn default_learner() -> Box<dyn Learner> {
    Box::new(crate::classify::LogisticRegression::default())
}

/// CC (crisp predictions) and PCC (posterior means).
#[derive(Debug, Clone)]
pub struct ClassifyAndCount {
    probabilistic: bool,
    base: Base,
    classifier: Option<Arc<dyn Classifier>>,
}

impl ClassifyAndCount {
    pub fn cc(learner: Box<dyn Learner>) -> Self {
        ClassifyAndCount {
            probabilistic: false,
            base: Base::new(learner),
            classifier: None,
        }
    }

    pub fn pcc(learner: Box<dyn Learner>) -> Self {
        ClassifyAndCount {
            probabilistic: true,
            ..Self::cc(learner)
        }
    }
}

impl Aggregative for ClassifyAndCount {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        self.classifier.as_ref().ok_or(Error::NotFitted)?.posteriors(instances)
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let c = self.classifier.as_ref().ok_or(Error::NotFitted)?.n_categories();
        if self.probabilistic {
            pcc_quantify(rows)
        } else {
            cc_from_rows(rows, c)
        }
    }
}

impl Quantifier for ClassifyAndCount {
    fn name(&self) -> String {
        if self.probabilistic { "pcc" } else { "cc" }.into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        let classifier = self.base.learner.train(training)?;
        self.base.record_fit(training, classifier.as_ref());
        self.classifier = Some(classifier);
        Ok(())
    }

    fn quantify(&self, instances: &[FeatureVec]) -> Result<PrevalenceVector> {
        quantify_aggregative(self, instances)
    }

    fn get_params(&self) -> ParamMap {
        self.base.params()
    }

    fn set_params(&mut self, params: &ParamMap) -> Result<()> {
        let name = self.name();
        self.base.set_params(params, |k, _| Err(unknown_param(&name, k)))
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

/// ACC (hard misclassification rates) and PACC (mean-posterior rates).
#[derive(Debug, Clone)]
pub struct AdjustedClassifyAndCount {
    probabilistic: bool,
    base: Base,
    pub val_split: ValSplit,
    fitted: Option<(Arc<dyn Classifier>, ConditionalRates)>,
}

impl AdjustedClassifyAndCount {
    pub fn acc(learner: Box<dyn Learner>) -> Self {
        AdjustedClassifyAndCount {
            probabilistic: false,
            base: Base::new(learner),
            val_split: ValSplit::default(),
            fitted: None,
        }
    }

    pub fn pacc(learner: Box<dyn Learner>) -> Self {
        AdjustedClassifyAndCount {
            probabilistic: true,
            ..Self::acc(learner)
        }
    }

    pub fn with_val_split(mut self, split: ValSplit) -> Self {
        self.val_split = split;
        self
    }

    pub fn rates(&self) -> Option<&ConditionalRates> {
        self.fitted.as_ref().map(|(_, r)| r)
    }
}

impl Aggregative for AdjustedClassifyAndCount {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        self.fitted.as_ref().ok_or(Error::NotFitted)?.0.posteriors(instances)
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let (classifier, rates) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        let est = if self.probabilistic {
            pcc_quantify(rows)?
        } else {
            cc_from_rows(rows, classifier.n_categories())?
        };
        let adj = acc_adjust(&est, rates)?;
        if adj.fallback {
            self.base.fallbacks.bump();
        }
        Ok(adj.prevalence)
    }
}

impl Quantifier for AdjustedClassifyAndCount {
    fn name(&self) -> String {
        if self.probabilistic { "pacc" } else { "acc" }.into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        let cv = cross_val_posteriors(training, self.base.learner.as_ref(), &self.val_split, self.base.seed)?;
        let c = training.n_categories();
        let rates = if self.probabilistic {
            ConditionalRates::soft(&cv.posteriors, &cv.labels, c)
        } else {
            ConditionalRates::hard(&cv.posteriors, &cv.labels, c)
        };
        self.base.record_fit(training, cv.classifier.as_ref());
        self.fitted = Some((cv.classifier, rates));
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
