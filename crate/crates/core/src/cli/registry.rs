//! Method names accepted by `--method` and their construction.

use crate::aggregative::{AdjustedClassifyAndCount, ClassifyAndCount, Hdy, Sld, ThresholdMethod, ThresholdPolicy};
use crate::classify::{Learner, LogisticRegression};
use crate::error::Error;
use crate::meta::{Ensemble, EnsembleConfig, OneVsAll};
use crate::quantifier::{ParamMap, ParamValue, Quantifier};

use super::spec::{parse_method_spec, MethodSpec};

pub const METHODS: &[&str] = &[
    "cc", "pcc", "acc", "pacc", "t50", "x", "max", "ms", "ms2", "sld", "hdy", "ensemble", "ova",
];

#[derive(Debug)]
pub enum BuildError {
    UnknownMethod(String),
    Invalid(Error),
}

impl From<Error> for BuildError {
    fn from(e: Error) -> Self {
        BuildError::Invalid(e)
    }
}

pub fn unknown_method_message(name: &str) -> String {
    format!("unknown method `{name}`; registered methods: {}", METHODS.join(", "))
}

/// Builds an unfitted quantifier; arguments other than `base` go through
/// `set_params`.
pub fn build_method(spec: &MethodSpec, learner: &LogisticRegression) -> std::result::Result<Box<dyn Quantifier>, BuildError> {
    let l = || -> Box<dyn Learner> { Box::new(learner.clone()) };
    let base = || -> std::result::Result<Box<dyn Quantifier>, BuildError> {
        let s = spec.arg("base").unwrap_or("cc");
        build_method(&parse_method_spec(s)?, learner)
    };
    let threshold = |p| -> Box<dyn Quantifier> { Box::new(ThresholdMethod::new(p, l())) };
    let mut q: Box<dyn Quantifier> = match spec.name.as_str() {
        "cc" => Box::new(ClassifyAndCount::cc(l())),
        "pcc" => Box::new(ClassifyAndCount::pcc(l())),
        "acc" => Box::new(AdjustedClassifyAndCount::acc(l())),
        "pacc" => Box::new(AdjustedClassifyAndCount::pacc(l())),
        "t50" => threshold(ThresholdPolicy::T50),
        "x" => threshold(ThresholdPolicy::X),
        "max" => threshold(ThresholdPolicy::Max),
        "ms" => threshold(ThresholdPolicy::Ms),
        "ms2" => threshold(ThresholdPolicy::Ms2),
        "sld" | "emq" => Box::new(Sld::new(l())),
        "hdy" => Box::new(Hdy::new(l())),
        "ensemble" => Box::new(Ensemble::new(base()?, EnsembleConfig::default())),
        "ova" => Box::new(OneVsAll::new(base()?)),
        other => return Err(BuildError::UnknownMethod(other.to_string())),
    };
    let mut params: ParamMap = spec
        .args
        .iter()
        .filter(|(k, _)| k != "base")
        .map(|(k, v)| (k.clone(), ParamValue::parse(v)))
        .collect();
    if spec.name == "ensemble" && !params.contains_key("red_size") {
        if let Some(size) = params.get("size").and_then(ParamValue::as_usize) {
            let red = EnsembleConfig::default().red_size.min(size.max(1));
            params.insert("red_size".into(), red.into());
        }
    }
    if !params.is_empty() {
        q.set_params(&params)?;
    }
    Ok(q)
}
