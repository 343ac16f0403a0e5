//! HDy: mixture matching of posterior histograms under the Hellinger distance.

use std::sync::Arc;

use super::{require_binary, Base};
use crate::classify::{cross_val_posteriors, Classifier, Learner, ValSplit};
use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::math::{hellinger, median, unit_histogram};
use crate::quantifier::{quantify_aggregative, unknown_param, Aggregative, ParamMap, Quantifier};

pub const HDY_BIN_COUNTS: [usize; 11] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110];
pub const HDY_ALPHA_STEPS: usize = 100;

/// Validation histograms of positive-category scores for every bin count.
#[derive(Debug, Clone, PartialEq)]
pub struct HdyModel {
    pub positive: Vec<Vec<f64>>,
    pub negative: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdyOutcome {
    pub prevalence: f64,
    /// Best α per bin count, in the order of [`HDY_BIN_COUNTS`].
    pub alphas: Vec<f64>,
}

impl HdyModel {
    pub fn new(val_pos_scores: &[f64], val_neg_scores: &[f64]) -> Result<Self> {
        if val_pos_scores.is_empty() || val_neg_scores.is_empty() {
            return Err(Error::invalid("hdy needs validation items of both categories"));
        }
        Ok(HdyModel {
            positive: HDY_BIN_COUNTS
                .iter()
                .map(|&b| unit_histogram(val_pos_scores.iter().cloned(), b))
                .collect(),
            negative: HDY_BIN_COUNTS
                .iter()
                .map(|&b| unit_histogram(val_neg_scores.iter().cloned(), b))
                .collect(),
        })
    }

    pub fn quantify(&self, test_scores: &[f64]) -> Result<HdyOutcome> {
        if test_scores.is_empty() {
            return Err(Error::invalid("cannot quantify an empty sample"));
        }
        let alphas: Vec<f64> = HDY_BIN_COUNTS
            .iter()
            .enumerate()
            .map(|(k, &b)| {
                let test = unit_histogram(test_scores.iter().cloned(), b);
                let (pos, neg) = (&self.positive[k], &self.negative[k]);
                let mut best = (0.0, f64::INFINITY);
                for step in 0..=HDY_ALPHA_STEPS {
                    let a = step as f64 / HDY_ALPHA_STEPS as f64;
                    let mix: Vec<f64> = pos.iter().zip(neg).map(|(p, n)| a * p + (1.0 - a) * n).collect();
                    let d = hellinger(&mix, &test);
                    if d < best.1 {
                        best = (a, d);
                    }
                }
                best.0
            })
            .collect();
        Ok(HdyOutcome {
            prevalence: median(&alphas),
            alphas,
        })
    }
}

/// Positive prevalence from validation and test positive-category scores.
pub fn hdy_quantify(val_pos_scores: &[f64], val_neg_scores: &[f64], test_scores: &[f64]) -> Result<HdyOutcome> {
    HdyModel::new(val_pos_scores, val_neg_scores)?.quantify(test_scores)
}

#[derive(Debug, Clone)]
pub struct Hdy {
    base: Base,
    pub val_split: ValSplit,
    fitted: Option<(Arc<dyn Classifier>, HdyModel)>,
}

impl Hdy {
    pub fn new(learner: Box<dyn Learner>) -> Self {
        Hdy {
            base: Base::new(learner),
            val_split: ValSplit::default(),
            fitted: None,
        }
    }

    pub fn with_val_split(mut self, split: ValSplit) -> Self {
        self.val_split = split;
        self
    }
}

impl Aggregative for Hdy {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        self.fitted.as_ref().ok_or(Error::NotFitted)?.0.posteriors(instances)
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let (_, model) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        let scores: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        PrevalenceVector::binary(model.quantify(&scores)?.prevalence)
    }
}

impl Quantifier for Hdy {
    fn name(&self) -> String {
        "hdy".into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        require_binary(training, "hdy")?;
        let cv = cross_val_posteriors(training, self.base.learner.as_ref(), &self.val_split, self.base.seed)?;
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (row, &l) in cv.posteriors.iter().zip(&cv.labels) {
            if l == 1 { &mut pos } else { &mut neg }.push(row[1]);
        }
        let model = HdyModel::new(&pos, &neg)?;
        self.base.record_fit(training, cv.classifier.as_ref());
        self.fitted = Some((cv.classifier, model));
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
        let mut split = None;
        self.base.set_params(params, |k, v| match k {
            "val_split" => {
                split = Some(ValSplit::from_param(v)?);
                Ok(())
            }
            _ => Err(unknown_param("hdy", k)),
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
        self.base.warnings("hdy")
    }
}
