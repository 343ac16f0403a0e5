//! One-vs-all: one binary quantifier per category, L1-normalized.

use rayon::prelude::*;

use super::{join_segments, split_segments};
use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::quantifier::{quantify_aggregative, Aggregative, ParamMap, Quantifier};

/// L1-normalizes per-category positive estimates; all zeros give uniform.
pub fn one_vs_all_normalize(raw: &[f64]) -> PrevalenceVector {
    PrevalenceVector::from_unnormalized(raw)
}

/// Quantifies with one fitted binary quantifier per category.
pub fn one_vs_all_quantify(
    members: &[Box<dyn Quantifier>],
    n_categories: usize,
    instances: &[FeatureVec],
) -> Result<PrevalenceVector> {
    if members.len() != n_categories {
        return Err(Error::DimensionMismatch {
            expected: n_categories,
            found: members.len(),
        });
    }
    let raw = members
        .par_iter()
        .map(|m| positive(&m.quantify(instances)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(one_vs_all_normalize(&raw))
}

fn positive(p: &PrevalenceVector) -> Result<f64> {
    if p.len() != 2 {
        return Err(Error::invalid("one-vs-all members must be binary"));
    }
    Ok(p[1])
}

#[derive(Clone)]
pub struct OneVsAll {
    base: Box<dyn Quantifier>,
    members: Vec<Box<dyn Quantifier>>,
    training_size: Option<usize>,
}

impl std::fmt::Debug for OneVsAll {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OneVsAll")
            .field("base", &self.base.name())
            .field("members", &self.members.len())
            .finish()
    }
}

impl OneVsAll {
    pub fn new(base: Box<dyn Quantifier>) -> Self {
        OneVsAll {
            base,
            members: Vec::new(),
            training_size: None,
        }
    }

    pub fn members(&self) -> &[Box<dyn Quantifier>] {
        &self.members
    }

    fn all_aggregative(&self) -> bool {
        !self.members.is_empty() && self.members.iter().all(|m| m.as_aggregative().is_some())
    }
}

impl Aggregative for OneVsAll {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        if self.members.is_empty() {
            return Err(Error::NotFitted);
        }
        let parts = self
            .members
            .par_iter()
            .map(|m| m.as_aggregative().ok_or(Error::NotFitted)?.classify(instances))
            .collect::<Result<Vec<_>>>()?;
        Ok(join_segments(&parts, instances.len()))
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let segments = split_segments(rows)?;
        let raw = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let seg: Vec<&[f64]> = segments.iter().map(|s| s[i]).collect();
                positive(&m.as_aggregative().ok_or(Error::NotFitted)?.aggregate(&seg)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(one_vs_all_normalize(&raw))
    }
}

impl Quantifier for OneVsAll {
    fn name(&self) -> String {
        "ova".into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        self.members = (0..training.n_categories())
            .into_par_iter()
            .map(|k| {
                let mut q = self.base.box_clone();
                q.fit(&training.binarize(k)?)?;
                Ok(q)
            })
            .collect::<Result<Vec<_>>>()?;
        self.training_size = Some(training.len());
        Ok(())
    }

    fn quantify(&self, instances: &[FeatureVec]) -> Result<PrevalenceVector> {
        if self.members.is_empty() {
            return Err(Error::NotFitted);
        }
        if self.all_aggregative() {
            return quantify_aggregative(self, instances);
        }
        one_vs_all_quantify(&self.members, self.members.len(), instances)
    }

    fn get_params(&self) -> ParamMap {
        self.base.get_params()
    }

    fn set_params(&mut self, params: &ParamMap) -> Result<()> {
        self.base.set_params(params)
    }

    fn box_clone(&self) -> Box<dyn Quantifier> {
        Box::new(self.clone())
    }

    fn as_aggregative(&self) -> Option<&dyn Aggregative> {
        if self.all_aggregative() {
            Some(self)
        } else {
            None
        }
    }

    fn training_size(&self) -> Option<usize> {
        self.training_size
    }

    fn warnings(&self) -> Vec<String> {
        let mut w: Vec<String> = Vec::new();
        for m in &self.members {
            for x in m.warnings() {
                if !w.contains(&x) {
                    w.push(x);
                }
            }
        }
        w
    }
}
