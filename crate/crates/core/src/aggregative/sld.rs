//! Expectation-maximization re-estimation of priors and posteriors (SLD/EMQ).

use std::sync::Arc;

use super::{Base, FallbackCounter};
use crate::classify::{Classifier, Learner};
use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::quantifier::{
    expect_f64, expect_usize, quantify_aggregative, unknown_param, Aggregative, ParamMap, Quantifier,
};

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SldOutcome {
    pub prevalence: PrevalenceVector,
    pub posteriors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Every prior iterate, starting with the training prevalence.
    pub history: Vec<PrevalenceVector>,
}

/// One E-step: rescale each row by `q / train_prev` and renormalize. A
/// category with zero training prior gets ratio 0; a row left without mass
/// becomes `q`.
pub(crate) fn e_step<R: AsRef<[f64]>>(train_prev: &[f64], q: &[f64], rows: &[R]) -> Vec<Vec<f64>> {
    let ratio: Vec<f64> = q
        .iter()
        .zip(train_prev)
        .map(|(&a, &b)| if b > 0.0 { a / b } else { 0.0 })
        .collect();
    rows.iter()
        .map(|row| {
            let mut r: Vec<f64> = row.as_ref().iter().zip(&ratio).map(|(p, w)| p * w).collect();
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter_mut().for_each(|x| *x /= s);
                r
            } else {
                q.to_vec()
            }
        })
        .collect()
}

pub(crate) fn m_step(rows: &[Vec<f64>], c: usize) -> Vec<f64> {
    let mut q = vec![0.0; c];
    for r in rows {
        for (a, b) in q.iter_mut().zip(r) {
            *a += b;
        }
    }
    let n = rows.len() as f64;
    q.iter_mut().for_each(|x| *x /= n);
    q
}

/// Runs EM from `train_prev` until the mean absolute change of the prior
/// drops below `epsilon` or `max_iter` iterations pass.
pub fn sld_quantify<R: AsRef<[f64]>>(
    train_prev: &PrevalenceVector,
    posteriors: &[R],
    epsilon: f64,
    max_iter: usize,
) -> Result<SldOutcome> {
    let c = train_prev.len();
    if posteriors.is_empty() {
        return Err(Error::invalid("cannot quantify an empty sample"));
    }
    if let Some(r) = posteriors.iter().find(|r| r.as_ref().len() != c) {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: r.as_ref().len(),
        });
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be positive"));
    }
    let mut q = train_prev.to_vec();
    let mut history = vec![train_prev.clone()];
    let mut iterations = 0;
    let mut converged = false;
    let mut rows = Vec::new();
    while iterations < max_iter {
        rows = e_step(train_prev, &q, posteriors);
        let next = m_step(&rows, c);
        iterations += 1;
        let diff = q.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() / c as f64;
        q = next;
        history.push(PrevalenceVector::from_unnormalized(&q));
        if diff < epsilon {
            converged = true;
            break;
        }
    }
    Ok(SldOutcome {
        prevalence: PrevalenceVector::from_unnormalized(&q),
        posteriors: rows,
        iterations,
        converged,
        history,
    })
}

/// SLD quantifier: a classifier fit on the whole training set, corrected by
/// EM at quantification time.
#[derive(Debug, Clone)]
pub struct Sld {
    base: Base,
    pub epsilon: f64,
    pub max_iter: usize,
    nonconverged: FallbackCounter,
    fitted: Option<(Arc<dyn Classifier>, PrevalenceVector)>,
}

impl Sld {
    pub fn new(learner: Box<dyn Learner>) -> Self {
        Sld {
            base: Base::new(learner),
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            nonconverged: FallbackCounter::default(),
            fitted: None,
        }
    }

    pub fn training_prevalence(&self) -> Option<&PrevalenceVector> {
        self.fitted.as_ref().map(|(_, p)| p)
    }

    pub fn run(&self, rows: &[&[f64]]) -> Result<SldOutcome> {
        let (_, prev) = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        sld_quantify(prev, rows, self.epsilon, self.max_iter)
    }
}

impl Aggregative for Sld {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        self.fitted.as_ref().ok_or(Error::NotFitted)?.0.posteriors(instances)
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let out = self.run(rows)?;
        if !out.converged {
            self.nonconverged.bump();
        }
        Ok(out.prevalence)
    }
}

impl Quantifier for Sld {
    fn name(&self) -> String {
        "sld".into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        let classifier = self.base.learner.train(training)?;
        self.base.record_fit(training, classifier.as_ref());
        self.nonconverged = FallbackCounter::default();
        self.fitted = Some((classifier, training.prevalence()));
        Ok(())
    }

    fn quantify(&self, instances: &[FeatureVec]) -> Result<PrevalenceVector> {
        quantify_aggregative(self, instances)
    }

    fn get_params(&self) -> ParamMap {
        let mut p = self.base.params();
        p.insert("epsilon".into(), self.epsilon.into());
        p.insert("max_iter".into(), self.max_iter.into());
        p
    }

    fn set_params(&mut self, params: &ParamMap) -> Result<()> {
        let (mut eps, mut iters) = (self.epsilon, self.max_iter);
        self.base.set_params(params, |k, v| {
            match k {
                "epsilon" => eps = expect_f64(k, v)?,
                "max_iter" => iters = expect_usize(k, v)?,
                _ => return Err(unknown_param("sld", k)),
            }
            Ok(())
        })?;
        if !(eps > 0.0) || iters == 0 {
            return Err(Error::invalid("sld needs epsilon > 0 and max_iter >= 1"));
        }
        self.epsilon = eps;
        self.max_iter = iters;
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
        let mut w = self.base.warnings("sld");
        let n = self.nonconverged.get();
        if n > 0 {
            w.push(format!("sld hit max_iter without converging {n} time(s)"));
        }
        w
    }
}
