//! Ensembles of quantifiers trained on samples at random prevalences.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;

use super::{join_segments, split_segments};
use crate::classify::{Classifier, Learner, LogisticRegression};
use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::eval::{app_evaluate, summarize, ErrorMeasure, Grid, ProtocolConfig};
use crate::math::{derive_seed, hellinger, rng, unit_histogram, Rng};
use crate::quantifier::{
    expect_usize, split_learner_params, Aggregative, ParamMap, ParamValue, Quantifier,
};

pub const DS_BINS: usize = 8;
pub const DEFAULT_MEMBER_SAMPLE: usize = 1000;
pub const DEFAULT_MIN_PER_CATEGORY: usize = 5;
const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum EnsemblePolicy {
    /// Mean of all members.
    Ave,
    /// Members whose training prevalence is closest to a preliminary estimate.
    Ptr,
    /// Members whose training posterior histogram is closest to the sample's.
    Ds,
    /// Members with the lowest validation error, fixed at fit time.
    Performance(ErrorMeasure),
}

impl EnsemblePolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ave" => Ok(EnsemblePolicy::Ave),
            "ptr" => Ok(EnsemblePolicy::Ptr),
            "ds" => Ok(EnsemblePolicy::Ds),
            other => ErrorMeasure::from_name(other)
                .map(EnsemblePolicy::Performance)
                .ok_or_else(|| Error::invalid(format!("unknown ensemble policy `{s}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EnsemblePolicy::Ave => "ave".into(),
            EnsemblePolicy::Ptr => "ptr".into(),
            EnsemblePolicy::Ds => "ds".into(),
            EnsemblePolicy::Performance(m) => m.mean_name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub size: usize,
    pub red_size: usize,
    pub policy: EnsemblePolicy,
    /// Member training sample size; `None` means `min(n, 1000)`.
    pub sample_size: Option<usize>,
    /// Member prevalences are redrawn until every category gets at least
    /// this many items (capped at `sample_size / c`).
    pub min_per_category: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            size: 30,
            red_size: 15,
            policy: EnsemblePolicy::Ave,
            sample_size: None,
            min_per_category: DEFAULT_MIN_PER_CATEGORY,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        if self.red_size == 0 || self.red_size > self.size {
            return Err(Error::invalid(format!(
                "red_size must lie in 1..={}, got {}",
                self.size, self.red_size
            )));
        }
        if self.sample_size == Some(0) {
            return Err(Error::invalid("member sample size must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct EnsembleMember {
    pub quantifier: Box<dyn Quantifier>,
    /// Actual prevalence of the member's training sample.
    pub prevalence: PrevalenceVector,
    /// Per-category posterior histograms of the training sample (ds only).
    pub histogram: Vec<f64>,
    /// Validation error (performance policy only).
    pub score: Option<f64>,
}

impl std::fmt::Debug for EnsembleMember {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleMember")
            .field("quantifier", &self.quantifier.name())
            .field("prevalence", &self.prevalence)
            .field("score", &self.score)
            .finish()
    }
}

/// Draws a point uniformly from the probability simplex.
pub fn uniform_simplex(c: usize, rng: &mut Rng) -> Vec<f64> {
    if c == 2 {
        let p: f64 = rng.random();
        return vec![1.0 - p, p];
    }
    let mut cuts: Vec<f64> = (0..c - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(c);
    let mut last = 0.0;
    for x in cuts {
        out.push(x - last);
        last = x;
    }
    out.push(1.0 - last);
    out
}

/// Concatenated per-category histograms of posterior columns.
pub fn posterior_histogram<R: AsRef<[f64]>>(rows: &[R], c: usize) -> Vec<f64> {
    (0..c)
        .flat_map(|k| unit_histogram(rows.iter().map(|r| r.as_ref()[k]), DS_BINS))
        .collect()
}

fn mean_prevalence(estimates: &[&PrevalenceVector]) -> PrevalenceVector {
    if estimates.len() == 1 {
        return estimates[0].clone();
    }
    let c = estimates[0].len();
    let mut acc = vec![0.0; c];
    for e in estimates {
        for (a, v) in acc.iter_mut().zip(e.iter()) {
            *a += v;
        }
    }
    let n = estimates.len() as f64;
    PrevalenceVector::from_unnormalized(&acc.into_iter().map(|a| a / n).collect::<Vec<_>>())
}

/// Indices of the `k` smallest distances, ties to the lower index.
fn closest(distances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

#[derive(Clone)]
pub struct Ensemble {
    base: Box<dyn Quantifier>,
    pub cfg: EnsembleConfig,
    ds_learner: LogisticRegression,
    members: Vec<EnsembleMember>,
    ds_classifier: Option<Arc<dyn Classifier>>,
    training_size: Option<usize>,
    n_categories: usize,
}

impl std::fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ensemble")
            .field("base", &self.base.name())
            .field("cfg", &self.cfg)
            .field("members", &self.members)
            .finish()
    }
}

impl Ensemble {
    pub fn new(base: Box<dyn Quantifier>, cfg: EnsembleConfig) -> Self {
        Ensemble {
            base,
            cfg,
            ds_learner: LogisticRegression::default(),
            members: Vec::new(),
            ds_classifier: None,
            training_size: None,
            n_categories: 0,
        }
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    fn member_sample_size(&self, n: usize) -> usize {
        self.cfg.sample_size.unwrap_or(n.min(DEFAULT_MEMBER_SAMPLE))
    }

    /// Draws a member prevalence whose sample gives every category enough items.
    fn draw_prevalence(&self, coll: &LabelledCollection, size: usize, seed: u64) -> Result<PrevalenceVector> {
        let c = coll.n_categories();
        let need = self.cfg.min_per_category.min(size / c);
        let mut r = rng(seed);
        for _ in 0..MAX_DRAWS {
            let p = PrevalenceVector::from_unnormalized(&uniform_simplex(c, &mut r));
            if coll.counts_at_prevalence(size, &p)?.iter().all(|&k| k >= need) {
                return Ok(p);
            }
        }
        Err(Error::invalid(format!(
            "could not draw a member prevalence with {need} items per category in a sample of {size}"
        )))
    }

    fn fit_member(&self, coll: &LabelledCollection, index: usize) -> Result<EnsembleMember> {
        let size = self.member_sample_size(coll.len());
        let prev = self.draw_prevalence(coll, size, derive_seed(self.cfg.seed, index as u64, 0))?;
        let sample = coll.sample_at_prevalence(size, &prev, derive_seed(self.cfg.seed, index as u64, 1))?;
        let mut q = self.base.box_clone();
        let mut seed = ParamMap::new();
        seed.insert(
            "seed".into(),
            ParamValue::Num((derive_seed(self.cfg.seed, index as u64, 2) >> 11) as f64),
        );
        // quantifiers without a seed keep their own
        let _ = q.set_params(&seed);
        q.fit(&sample)?;
        let histogram = match &self.ds_classifier {
            Some(cls) => posterior_histogram(&cls.posteriors(sample.instances())?, coll.n_categories()),
            None => Vec::new(),
        };
        Ok(EnsembleMember {
            quantifier: q,
            prevalence: sample.prevalence(),
            histogram,
            score: None,
        })
    }

    fn fit_members(&self, coll: &LabelledCollection) -> Result<Vec<EnsembleMember>> {
        (0..self.cfg.size)
            .into_par_iter()
            .map(|i| self.fit_member(coll, i))
            .collect()
    }

    /// Keeps the `k` members selected by the policy, in member order.
    pub fn selected(&self, estimates: &[PrevalenceVector], test_hist: Option<&[f64]>) -> Vec<usize> {
        let k = self.cfg.red_size.min(self.members.len());
        let mut idx = match &self.cfg.policy {
            EnsemblePolicy::Ave | EnsemblePolicy::Performance(_) => return (0..self.members.len()).collect(),
            EnsemblePolicy::Ptr => {
                let prelim = mean_prevalence(&estimates.iter().collect::<Vec<_>>());
                let d: Vec<f64> = self
                    .members
                    .iter()
                    .map(|m| m.prevalence.iter().zip(prelim.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
                    .collect();
                closest(&d, k)
            }
            EnsemblePolicy::Ds => {
                let h = test_hist.unwrap_or(&[]);
                let d: Vec<f64> = self.members.iter().map(|m| hellinger(&m.histogram, h)).collect();
                closest(&d, k)
            }
        };
        idx.sort();
        idx
    }

    fn combine(&self, estimates: Vec<PrevalenceVector>, test_hist: Option<&[f64]>) -> PrevalenceVector {
        let keep = self.selected(&estimates, test_hist);
        mean_prevalence(&keep.iter().map(|&i| &estimates[i]).collect::<Vec<_>>())
    }

    fn all_aggregative(&self) -> bool {
        !self.members.is_empty() && self.members.iter().all(|m| m.quantifier.as_aggregative().is_some())
    }
}

impl Aggregative for Ensemble {
    /// Each row holds every member's per-item output followed by the ds
    /// posteriors, as length-prefixed segments.
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        if self.members.is_empty() {
            return Err(Error::NotFitted);
        }
        let mut parts = self
            .members
            .par_iter()
            .map(|m| {
                m.quantifier
                    .as_aggregative()
                    .ok_or_else(|| Error::invalid("ensemble member is not aggregative"))?
                    .classify(instances)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(cls) = &self.ds_classifier {
            parts.push(cls.posteriors(instances)?);
        }
        Ok(join_segments(&parts, instances.len()))
    }

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector> {
        let segments = split_segments(rows)?;
        let estimates = self
            .members
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let seg: Vec<&[f64]> = segments.iter().map(|s| s[i]).collect();
                m.quantifier.as_aggregative().ok_or(Error::NotFitted)?.aggregate(&seg)
            })
            .collect::<Result<Vec<_>>>()?;
        let hist = self.ds_classifier.as_ref().map(|_| {
            let ds: Vec<&[f64]> = segments.iter().map(|s| s[self.members.len()]).collect();
            posterior_histogram(&ds, self.n_categories)
        });
        Ok(self.combine(estimates, hist.as_deref()))
    }
}

impl Quantifier for Ensemble {
    fn name(&self) -> String {
        "ensemble".into()
    }

    fn fit(&mut self, training: &LabelledCollection) -> Result<()> {
        self.cfg.validate()?;
        if training.is_empty() {
            return Err(Error::invalid("cannot fit an ensemble on an empty collection"));
        }
        self.n_categories = training.n_categories();
        self.ds_classifier = match self.cfg.policy {
            EnsemblePolicy::Ds => Some(self.ds_learner.train(training)?),
            _ => None,
        };
        self.members = Vec::new();
        let members = match self.cfg.policy.clone() {
            EnsemblePolicy::Performance(measure) => {
                let (train, held) = training.split_stratified(0.4, self.cfg.seed)?;
                let mut members = self.fit_members(&train)?;
                let pcfg = ProtocolConfig {
                    sample_size: held.len().min(100),
                    grid: Grid::Points(21),
                    n_repetitions: 5,
                    seed: self.cfg.seed,
                    ..Default::default()
                };
                let metric = measure.mean_name().to_string();
                let scores = members
                    .par_iter()
                    .map(|m| summarize(&app_evaluate(m.quantifier.as_ref(), &held, &pcfg, &[metric.clone()])?, &metric))
                    .collect::<Result<Vec<_>>>()?;
                for (m, s) in members.iter_mut().zip(&scores) {
                    m.score = Some(*s);
                }
                let mut keep = closest(&scores, self.cfg.red_size);
                keep.sort();
                keep.into_iter().map(|i| members[i].clone()).collect()
            }
            _ => self.fit_members(training)?,
        };
        self.members = members;
        self.training_size = Some(training.len());
        Ok(())
    }

    fn quantify(&self, instances: &[FeatureVec]) -> Result<PrevalenceVector> {
        if self.members.is_empty() {
            return Err(Error::NotFitted);
        }
        if self.all_aggregative() {
            return crate::quantifier::quantify_aggregative(self, instances);
        }
        let estimates = self
            .members
            .par_iter()
            .map(|m| m.quantifier.quantify(instances))
            .collect::<Result<Vec<_>>>()?;
        let hist = match &self.ds_classifier {
            Some(cls) => Some(posterior_histogram(&cls.posteriors(instances)?, self.n_categories)),
            None => None,
        };
        Ok(self.combine(estimates, hist.as_deref()))
    }

    fn get_params(&self) -> ParamMap {
        let mut p = self.base.get_params();
        p.insert("size".into(), self.cfg.size.into());
        p.insert("red_size".into(), self.cfg.red_size.into());
        p.insert("policy".into(), ParamValue::Text(self.cfg.policy.name()));
        p.insert("seed".into(), (self.cfg.seed as f64).into());
        if let Some(s) = self.cfg.sample_size {
            p.insert("sample_size".into(), s.into());
        }
        p.insert("min_per_category".into(), self.cfg.min_per_category.into());
        p
    }

    fn set_params(&mut self, params: &ParamMap) -> Result<()> {
        let mut cfg = self.cfg.clone();
        let mut rest = ParamMap::new();
        for (k, v) in params {
            match k.as_str() {
                "size" => cfg.size = expect_usize(k, v)?,
                "red_size" => cfg.red_size = expect_usize(k, v)?,
                "policy" => cfg.policy = EnsemblePolicy::parse(&v.to_string())?,
                "seed" => cfg.seed = expect_usize(k, v)? as u64,
                "sample_size" => cfg.sample_size = Some(expect_usize(k, v)?),
                "min_per_category" => cfg.min_per_category = expect_usize(k, v)?,
                _ => {
                    rest.insert(k.clone(), v.clone());
                }
            }
        }
        cfg.validate()?;
        if !rest.is_empty() {
            let (learner, _) = split_learner_params(&rest);
            self.base.set_params(&rest)?;
            self.ds_learner.set_params(&learner)?;
        }
        self.cfg = cfg;
        Ok(())
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
            for x in m.quantifier.warnings() {
                if !w.contains(&x) {
                    w.push(x);
                }
            }
        }
        w
    }
}
