//! Grid search over quantifier hyperparameters, scored by a quantification
//! error under a sampling protocol.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::classify::ValSplit;
use crate::data::LabelledCollection;
use crate::error::{Error, Result};
use crate::eval::{evaluate, summarize, ErrorMeasure, ProtocolConfig};
use crate::quantifier::{ParamMap, ParamValue, Quantifier};

#[derive(Debug, Clone)]
pub struct GridSearchConfig {
    /// Candidate values per parameter; combinations iterate names in sorted
    /// order and values in the listed order.
    pub grid: Vec<(String, Vec<ParamValue>)>,
    pub protocol: ProtocolConfig,
    pub error: String,
    pub val_split: ValSplit,
    pub refit: bool,
    pub seed: u64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig {
            grid: Vec::new(),
            protocol: ProtocolConfig::default(),
            error: "mae".into(),
            val_split: ValSplit::Fraction(0.4),
            refit: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub params: ParamMap,
    /// `+inf` when the combination failed.
    pub score: f64,
    pub failure: Option<String>,
}

pub struct GridSearchResult {
    pub quantifier: Box<dyn Quantifier>,
    pub best_params: ParamMap,
    pub best_score: f64,
    pub trace: Vec<TraceEntry>,
    /// Items the returned quantifier was fit on.
    pub training_size: usize,
}

/// Cartesian product of the grid in iteration order.
pub fn combinations(grid: &[(String, Vec<ParamValue>)]) -> Result<Vec<ParamMap>> {
    if grid.is_empty() {
        return Err(Error::invalid("the parameter grid is empty"));
    }
    let mut names: Vec<&(String, Vec<ParamValue>)> = grid.iter().collect();
    names.sort_by(|a, b| a.0.cmp(&b.0));
    for w in names.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::invalid(format!("parameter `{}` listed twice", w[0].0)));
        }
    }
    let mut out = vec![ParamMap::new()];
    for (name, values) in names {
        if values.is_empty() {
            return Err(Error::invalid(format!("parameter `{name}` has no values")));
        }
        out = out
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut m = base.clone();
                    m.insert(name.clone(), v.clone());
                    m
                })
            })
            .collect();
    }
    Ok(out)
}

fn score_one(
    template: &dyn Quantifier,
    params: &ParamMap,
    training: &LabelledCollection,
    cfg: &GridSearchConfig,
) -> Result<(f64, Box<dyn Quantifier>, usize)> {
    let mut q = template.box_clone();
    q.set_params(params)?;
    let metric = ErrorMeasure::parse(&cfg.error)?.mean_name().to_string();
    let run = |train: &LabelledCollection, val: &LabelledCollection, q: &mut Box<dyn Quantifier>| -> Result<f64> {
        q.fit(train)?;
        let report = evaluate(q.as_ref(), None, val, &cfg.protocol, &[metric.clone()])?;
        summarize(&report, &metric)
    };
    match &cfg.val_split {
        ValSplit::Fraction(f) => {
            let (train, val) = training.split_stratified(*f, cfg.seed)?;
            let s = run(&train, &val, &mut q)?;
            Ok((s, q, train.len()))
        }
        ValSplit::Explicit(val) => {
            let s = run(training, val, &mut q)?;
            Ok((s, q, training.len()))
        }
        ValSplit::Folds(k) => {
            let mut total = 0.0;
            let mut first: Option<(Box<dyn Quantifier>, usize)> = None;
            for (train, val) in training.kfold(*k, cfg.seed)? {
                let mut fq = q.box_clone();
                total += run(&train, &val, &mut fq)?;
                if first.is_none() {
                    first = Some((fq, train.len()));
                }
            }
            let (fq, n) = first.expect("k >= 2 folds");
            Ok((total / *k as f64, fq, n))
        }
    }
}

/// Scores every combination and keeps the lowest (earliest on ties). With
/// `refit` the winner is refit on all of `training`.
pub fn grid_search_fit(
    quantifier: &dyn Quantifier,
    training: &LabelledCollection,
    cfg: &GridSearchConfig,
) -> Result<GridSearchResult> {
    ErrorMeasure::parse(&cfg.error)?;
    let combos = combinations(&cfg.grid)?;
    let results: Vec<Result<(f64, Box<dyn Quantifier>, usize)>> = combos
        .par_iter()
        .map(|p| score_one(quantifier, p, training, cfg))
        .collect();
    let mut trace = Vec::with_capacity(combos.len());
    let mut best: Option<(usize, f64)> = None;
    let mut fitted = Vec::with_capacity(combos.len());
    for (i, (params, r)) in combos.iter().zip(results).enumerate() {
        match r {
            Ok((score, q, n)) => {
                let score = if score.is_nan() { f64::INFINITY } else { score };
                trace.push(TraceEntry {
                    params: params.clone(),
                    score,
                    failure: None,
                });
                if score.is_finite() && best.is_none_or(|(_, b)| score < b) {
                    best = Some((i, score));
                }
                fitted.push(Some((q, n)));
            }
            Err(e) => {
                trace.push(TraceEntry {
                    params: params.clone(),
                    score: f64::INFINITY,
                    failure: Some(e.to_string()),
                });
                fitted.push(None);
            }
        }
    }
    let Some((bi, best_score)) = best else {
        return Err(Error::AllCombinationsFailed(
            trace
                .iter()
                .map(|t| format!("{}: {}", format_params(&t.params), t.failure.as_deref().unwrap_or("non-finite score")))
                .collect(),
        ));
    };
    let best_params = combos[bi].clone();
    let (quantifier, training_size) = if cfg.refit {
        let mut q = quantifier.box_clone();
        q.set_params(&best_params)?;
        q.fit(training)?;
        (q, training.len())
    } else {
        fitted[bi].take().expect("winner has a fitted quantifier")
    };
    Ok(GridSearchResult {
        quantifier,
        best_params,
        best_score,
        trace,
        training_size,
    })
}

pub fn format_params(p: &ParamMap) -> String {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Writes the trace as CSV: one column per parameter, then `score,failure`.
pub fn write_trace(trace: &[TraceEntry], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<String> = trace.first().map(|t| t.params.keys().cloned().collect()).unwrap_or_default();
    let mut header = names.clone();
    header.push("score".into());
    header.push("failure".into());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(&header).map_err(io)?;
    for t in trace {
        let mut rec: Vec<String> = names
            .iter()
            .map(|n| t.params.get(n).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        rec.push(t.score.to_string());
        rec.push(t.failure.clone().unwrap_or_default());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(trace: &[TraceEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_trace(trace, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregative::{AdjustedClassifyAndCount, ClassifyAndCount};
    use crate::classify::LogisticRegression;
    use crate::data::synth_gaussian;
    use crate::eval::{app_evaluate, Grid};

    fn lr() -> Box<dyn crate::classify::Learner> {
        Box::new(LogisticRegression::default())
    }

    fn protocol() -> ProtocolConfig {
        ProtocolConfig {
            sample_size: 50,
            grid: Grid::Points(11),
            n_repetitions: 2,
            seed: 1,
            ..Default::default()
        }
    }

    fn cfg(grid: Vec<(String, Vec<ParamValue>)>) -> GridSearchConfig {
        GridSearchConfig {
            grid,
            protocol: protocol(),
            ..Default::default()
        }
    }

    #[test]
    fn combination_order_and_count() {
        let grid = vec![
            (
                "learner.class_weight".to_string(),
                vec!["balanced".into(), "none".into()],
            ),
            (
                "learner.C".to_string(),
                (0..10).map(|i| ParamValue::Num(10f64.powi(i - 4))).collect(),
            ),
        ];
        let c = combinations(&grid).unwrap();
        assert_eq!(c.len(), 20);
        assert_eq!(c[0]["learner.C"], ParamValue::Num(1e-4));
        assert_eq!(c[0]["learner.class_weight"], "balanced".into());
        assert_eq!(c[1]["learner.class_weight"], "none".into());
        assert!(combinations(&[]).is_err());
        assert!(combinations(&[("a".into(), vec![])]).is_err());
    }

    #[test]
    fn single_combination() {
        let d = synth_gaussian(300, 2, 2.0, 1).unwrap();
        let q = ClassifyAndCount::cc(lr());
        let r = grid_search_fit(&q, &d.training, &cfg(vec![("learner.C".into(), vec![1.0.into()])])).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best_params["learner.C"], ParamValue::Num(1.0));
        assert_eq!(r.best_score, r.trace[0].score);
        assert_eq!(r.training_size, d.training.len());
    }

    #[test]
    fn picks_the_non_underfitting_c_and_agrees_with_direct_evaluation() {
        let d = synth_gaussian(600, 2, 4.0, 2).unwrap();
        let q = ClassifyAndCount::pcc(lr());
        let c = cfg(vec![("learner.C".into(), vec![1e-5.into(), 10.0.into()])]);
        let r = grid_search_fit(&q, &d.training, &c).unwrap();
        assert_eq!(r.best_params["learner.C"], ParamValue::Num(10.0));
        let (train, val) = d.training.split_stratified(0.4, c.seed).unwrap();
        for t in &r.trace {
            let mut m = ClassifyAndCount::pcc(lr());
            m.set_params(&t.params).unwrap();
            m.fit(&train).unwrap();
            let rep = app_evaluate(&m, &val, &c.protocol, &["mae".into()]).unwrap();
            assert_eq!(summarize(&rep, "mae").unwrap(), t.score);
        }
        let min = r.trace.iter().map(|t| t.score).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_score, min);
    }

    #[test]
    fn refit_uses_more_data() {
        let d = synth_gaussian(300, 2, 2.0, 3).unwrap();
        let q = AdjustedClassifyAndCount::acc(lr());
        let grid = vec![("learner.C".to_string(), vec![0.1.into(), 1.0.into()])];
        let a = grid_search_fit(&q, &d.training, &GridSearchConfig { refit: false, ..cfg(grid.clone()) }).unwrap();
        let b = grid_search_fit(&q, &d.training, &cfg(grid)).unwrap();
        assert!(b.training_size > a.training_size);
        assert_eq!(a.quantifier.training_size(), Some(a.training_size));
        assert_eq!(b.quantifier.training_size(), Some(d.training.len()));
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn failing_combinations() {
        let d = synth_gaussian(300, 2, 2.0, 3).unwrap();
        let q = ClassifyAndCount::cc(lr());
        let c = cfg(vec![("learner.C".into(), vec![(-1.0).into(), 1.0.into()])]);
        let r = grid_search_fit(&q, &d.training, &c).unwrap();
        assert_eq!(r.trace[0].score, f64::INFINITY);
        assert!(r.trace[0].failure.is_some());
        assert_eq!(r.best_params["learner.C"], ParamValue::Num(1.0));
        let bad = cfg(vec![("nonsense".into(), vec![1.0.into(), 2.0.into()])]);
        match grid_search_fit(&q, &d.training, &bad) {
            Err(Error::AllCombinationsFailed(v)) => assert_eq!(v.len(), 2),
            other => panic!("{:?}", other.map(|r| r.best_score)),
        }
    }

    #[test]
    fn kfold_validation_and_trace_csv() {
        let d = synth_gaussian(300, 2, 2.0, 4).unwrap();
        let q = ClassifyAndCount::cc(lr());
        let c = GridSearchConfig {
            val_split: ValSplit::Folds(3),
            ..cfg(vec![("learner.C".into(), vec![0.5.into(), 2.0.into()])])
        };
        let r = grid_search_fit(&q, &d.training, &c).unwrap();
        let again = grid_search_fit(&q, &d.training, &c).unwrap();
        assert_eq!(r.trace, again.trace);
        let mut buf = Vec::new();
        write_trace(&r.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("learner.C,score,failure\n0.5,"));
        assert_eq!(text.lines().count(), 3);
    }
}
