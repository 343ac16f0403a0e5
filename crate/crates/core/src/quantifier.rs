//! The quantifier contract and its hyperparameter representation.

use std::collections::BTreeMap;
use std::fmt;

use crate::data::{FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};

/// A hyperparameter value as it travels through `get_params`/`set_params`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl ParamValue {
    /// Numbers parse as [`ParamValue::Num`], anything else stays text.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => ParamValue::Num(v),
            _ => ParamValue::Text(s.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Num(v) if *v >= 0.0 && v.fract() == 0.0 && *v <= usize::MAX as f64 => Some(*v as usize),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Num(v)
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Num(v as f64)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

/// Flat name → value map; learner hyperparameters carry a `learner.` prefix.
pub type ParamMap = BTreeMap<String, ParamValue>;

pub const LEARNER_PREFIX: &str = "learner.";

/// Splits a parameter map into `(learner params without prefix, own params)`.
pub fn split_learner_params(params: &ParamMap) -> (ParamMap, ParamMap) {
    let mut learner = ParamMap::new();
    let mut own = ParamMap::new();
    for (k, v) in params {
        match k.strip_prefix(LEARNER_PREFIX) {
            Some(rest) => learner.insert(rest.to_string(), v.clone()),
            None => own.insert(k.clone(), v.clone()),
        };
    }
    (learner, own)
}

pub(crate) fn expect_f64(name: &str, v: &ParamValue) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::invalid(format!("parameter `{name}` expects a number, got `{v}`")))
}

pub(crate) fn expect_usize(name: &str, v: &ParamValue) -> Result<usize> {
    v.as_usize()
        .ok_or_else(|| Error::invalid(format!("parameter `{name}` expects a nonnegative integer, got `{v}`")))
}

pub(crate) fn unknown_param(quantifier: &str, name: &str) -> Error {
    Error::invalid(format!("`{quantifier}` has no parameter `{name}`"))
}

/// A model fit on labelled data that estimates the prevalence vector of an
/// unlabelled sample.
pub trait Quantifier: Send + Sync {
    /// Registered identifier (`cc`, `acc`, ...).
    fn name(&self) -> String;

    fn fit(&mut self, training: &LabelledCollection) -> Result<()>;

    /// Fails with [`Error::NotFitted`] before `fit`.
    fn quantify(&self, instances: &[FeatureVec]) -> Result<PrevalenceVector>;

    fn get_params(&self) -> ParamMap;

    fn set_params(&mut self, params: &ParamMap) -> Result<()>;

    fn box_clone(&self) -> Box<dyn Quantifier>;

    /// Present when quantification factors into one classification pass
    /// followed by an aggregation of per-item outputs.
    fn as_aggregative(&self) -> Option<&dyn Aggregative> {
        None
    }

    /// Number of labelled items used by the last `fit`.
    fn training_size(&self) -> Option<usize>;

    /// Non-fatal conditions seen so far (non-convergence, adjustment fallbacks).
    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

impl Clone for Box<dyn Quantifier> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Quantifiers whose estimate is a function of per-item outputs.
///
/// `classify` maps instances to output rows once; `aggregate` turns any
/// subset of those rows into an estimate. Evaluating many samples drawn from
/// one pool therefore needs a single classification pass.
pub trait Aggregative: Sync {
    fn classify(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>>;

    fn aggregate(&self, rows: &[&[f64]]) -> Result<PrevalenceVector>;
}

/// `aggregate(classify(instances))`.
pub fn quantify_aggregative(q: &dyn Aggregative, instances: &[FeatureVec]) -> Result<PrevalenceVector> {
    if instances.is_empty() {
        return Err(Error::invalid("cannot quantify an empty sample"));
    }
    let rows = q.classify(instances)?;
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    q.aggregate(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_parsing() {
        assert_eq!(ParamValue::parse("0.1"), ParamValue::Num(0.1));
        assert_eq!(ParamValue::parse("balanced"), ParamValue::Text("balanced".into()));
        assert_eq!(ParamValue::parse("5").as_usize(), Some(5));
        assert_eq!(ParamValue::parse("5.5").as_usize(), None);
        assert_eq!(ParamValue::parse("inf"), ParamValue::Text("inf".into()));
    }

    #[test]
    fn learner_prefix_routing() {
        let mut p = ParamMap::new();
        p.insert("learner.C".into(), 1.0.into());
        p.insert("epsilon".into(), 1e-4.into());
        let (l, o) = split_learner_params(&p);
        assert_eq!(l.keys().collect::<Vec<_>>(), vec!["C"]);
        assert_eq!(o.keys().collect::<Vec<_>>(), vec!["epsilon"]);
    }
}
