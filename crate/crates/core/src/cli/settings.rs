//! Typed run settings resolved from the flag, file and environment layers.

use std::path::PathBuf;

use crate::classify::{Learner, LogisticRegression, ValSplit};
use crate::data::LabelColumn;
use crate::error::{Error, Result};
use crate::eval::{ErrorMeasure, Grid, Protocol, ProtocolConfig};
use crate::quantifier::ParamValue;

use super::config::Layers;
use super::spec::{parse_method_list, parse_param_flag, MethodSpec};

pub const DEFAULT_DATA: &str = "synth:gaussian";
pub const DEFAULT_METRICS: &str = "mae,mrae,mkld";
pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_OUT: &str = "qk-out";
pub const DEFAULT_SEARCH_SPLIT: f64 = 0.4;
/// Held-out share of a data file given without `--test`.
pub const DEFAULT_TEST_FRACTION: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub data: Vec<String>,
    pub test: Option<String>,
    pub label_column: LabelColumn,
    pub header: bool,
    pub zero_based: bool,
    pub methods: Vec<MethodSpec>,
    pub learner: LogisticRegression,
    pub protocol: ProtocolConfig,
    pub metrics: Vec<String>,
    pub seed: u64,
    pub jobs: usize,
    pub folds: Option<usize>,
    pub val_split: Option<ParamValue>,
    pub search_split: ValSplit,
    pub error: String,
    pub refit: bool,
    pub params: Vec<(String, Vec<ParamValue>)>,
    pub out: PathBuf,
}

fn parse_label_column(s: &str) -> LabelColumn {
    if s.eq_ignore_ascii_case("last") {
        LabelColumn::Last
    } else if let Ok(i) = s.parse() {
        LabelColumn::Index(i)
    } else {
        LabelColumn::Name(s.to_string())
    }
}

impl RunSettings {
    pub fn resolve(layers: &Layers) -> Result<Self> {
        let mut data: Vec<String> = layers.list("data").to_vec();
        if data.is_empty() {
            data.push(DEFAULT_DATA.into());
        }
        let test = layers.get("test").map(String::from);
        if test.is_some() && data.len() != 1 {
            return Err(Error::invalid("--test needs exactly one --data file"));
        }

        let mut methods = Vec::new();
        for m in layers.list("method") {
            methods.extend(parse_method_list(m)?);
        }
        if methods.is_empty() {
            return Err(Error::invalid("no method given (use --method)"));
        }

        let mut learner = LogisticRegression::default();
        if let Some(c) = layers.get("learner_c") {
            learner.set_param("C", &ParamValue::parse(c))?;
        }
        if let Some(w) = layers.get("class_weight") {
            learner.set_param("class_weight", &ParamValue::parse(w))?;
        }

        let seed = layers.parse::<u64>("seed")?.unwrap_or(0);
        let jobs = layers.parse::<usize>("jobs")?.unwrap_or(0);
        let grid = match (layers.find("n_prevpoints"), layers.find("budget")) {
            (Some((a, _)), Some((b, _))) if a == b => {
                return Err(Error::invalid("n_prevpoints and budget are mutually exclusive"))
            }
            (Some((a, _)), Some((b, _))) if b < a => Grid::Budget(layers.parse("budget")?.unwrap()),
            (Some(_), _) => Grid::Points(layers.parse("n_prevpoints")?.unwrap()),
            (None, Some(_)) => Grid::Budget(layers.parse("budget")?.unwrap()),
            (None, None) => ProtocolConfig::default().grid,
        };
        let protocol = ProtocolConfig {
            protocol: match layers.get("protocol") {
                Some(p) => Protocol::parse(p)?,
                None => Protocol::App,
            },
            sample_size: layers
                .parse("sample_size")?
                .unwrap_or(ProtocolConfig::default().sample_size),
            grid,
            n_repetitions: layers.parse("repeats")?.unwrap_or(DEFAULT_REPEATS),
            seed,
            jobs: 0,
            smoothing: layers.parse("smoothing")?,
        };
        protocol.validate()?;

        let metrics: Vec<String> = layers
            .get("metrics")
            .map(|_| layers.list("metrics").join(","))
            .unwrap_or_else(|| DEFAULT_METRICS.into())
            .split(',')
            .map(|s| s.trim().to_ascii_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        if metrics.is_empty() {
            return Err(Error::invalid("no metric given"));
        }
        for m in &metrics {
            ErrorMeasure::parse(m)?;
        }
        let error = match layers.get("error") {
            Some(e) => {
                ErrorMeasure::parse(e)?;
                e.trim().to_ascii_lowercase()
            }
            None => metrics[0].clone(),
        };

        let folds = layers.parse::<usize>("folds")?;
        if matches!(folds, Some(k) if k < 2) {
            return Err(Error::invalid("--folds needs at least 2"));
        }
        let val_split = match layers.get("val_split") {
            Some(v) => {
                ValSplit::parse(v)?;
                Some(ParamValue::parse(v))
            }
            None => None,
        };
        let search_split = match layers.get("search_split") {
            Some(v) => ValSplit::parse(v)?,
            None => ValSplit::Fraction(DEFAULT_SEARCH_SPLIT),
        };
        let refit = match layers.get("refit") {
            Some(_) => layers.flag("refit")?,
            None => true,
        };

        let mut params: Vec<(String, Vec<ParamValue>)> = Vec::new();
        for p in layers.list("param") {
            let (name, values) = parse_param_flag(p)?;
            if params.iter().any(|(n, _)| *n == name) {
                return Err(Error::invalid(format!("parameter `{name}` given twice")));
            }
            params.push((name, values));
        }

        Ok(RunSettings {
            data,
            test,
            label_column: layers.get("label_column").map(parse_label_column).unwrap_or(LabelColumn::Last),
            header: layers.flag("header")?,
            zero_based: layers.flag("zero_based")?,
            methods,
            learner,
            protocol,
            metrics,
            seed,
            jobs,
            folds,
            val_split,
            search_split,
            error,
            refit,
            params,
            out: PathBuf::from(layers.get("out").unwrap_or(DEFAULT_OUT)),
        })
    }

    pub fn grid_search_needed(&self) -> bool {
        self.params.iter().any(|(_, v)| v.len() > 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Layer;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), vec![v.to_string()])).collect()
    }

    #[test]
    fn defaults() {
        let s = RunSettings::resolve(&Layers(vec![layer(&[("method", "cc")])])).unwrap();
        assert_eq!(s.data, vec![DEFAULT_DATA]);
        assert_eq!(s.metrics, vec!["mae", "mrae", "mkld"]);
        assert_eq!(s.protocol.grid, Grid::Points(21));
        assert_eq!(s.protocol.n_repetitions, DEFAULT_REPEATS);
        assert_eq!(s.error, "mae");
        assert!(s.refit);
        assert!(!s.grid_search_needed());
    }

    #[test]
    fn grid_choice_follows_precedence() {
        let flags = layer(&[("method", "cc"), ("budget", "500")]);
        let file = layer(&[("n_prevpoints", "11")]);
        let s = RunSettings::resolve(&Layers(vec![flags, file])).unwrap();
        assert_eq!(s.protocol.grid, Grid::Budget(500));
        let same = layer(&[("method", "cc"), ("budget", "500"), ("n_prevpoints", "11")]);
        assert!(RunSettings::resolve(&Layers(vec![same])).is_err());
    }

    #[test]
    fn invalid_values() {
        for (k, v) in [
            ("sample_size", "x"),
            ("protocol", "zzz"),
            ("metrics", "mae,foo"),
            ("folds", "1"),
            ("val_split", "1.5"),
            ("class_weight", "heavy"),
            ("learner_c", "-1"),
            ("header", "maybe"),
            ("param", "C"),
        ] {
            let l = layer(&[("method", "cc"), (k, v)]);
            assert!(RunSettings::resolve(&Layers(vec![l])).is_err(), "{k}={v}");
        }
        assert!(RunSettings::resolve(&Layers(vec![Layer::new()])).is_err());
    }
}
