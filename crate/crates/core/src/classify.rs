//! Multinomial logistic regression and cross-validated posteriors.
//!
//! The learner minimizes the L2-regularized weighted cross-entropy
//!
//! ```text
//! sum_i w_i * -ln softmax(W x_i + b)[y_i]  +  ||W||^2 / (2C)
//! ```
//!
//! (biases are not penalized) by full-batch gradient descent with a
//! backtracking (Armijo) line search, starting from all-zero weights. The
//! whole procedure is deterministic.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{FeatureVec, LabelledCollection};
use crate::error::{Error, Result};
use crate::quantifier::{expect_f64, expect_usize, ParamMap, ParamValue};

/// Maps instances to posterior rows (nonnegative, summing to one).
pub trait Classifier: Send + Sync + fmt::Debug {
    fn n_categories(&self) -> usize;

    fn posteriors(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>>;

    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Something that trains a [`Classifier`] from labelled data.
pub trait Learner: Send + Sync + fmt::Debug {
    fn train(&self, coll: &LabelledCollection) -> Result<Arc<dyn Classifier>>;

    fn get_params(&self) -> ParamMap;

    fn set_param(&mut self, name: &str, value: &ParamValue) -> Result<()>;

    fn box_clone(&self) -> Box<dyn Learner>;

    fn set_params(&mut self, params: &ParamMap) -> Result<()> {
        for (k, v) in params {
            self.set_param(k, v)?;
        }
        Ok(())
    }
}

impl Clone for Box<dyn Learner> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Index of the largest entry; lowest index on exact ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn predict(classifier: &dyn Classifier, instances: &[FeatureVec]) -> Result<Vec<usize>> {
    Ok(classifier.posteriors(instances)?.iter().map(|r| argmax(r)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeight {
    None,
    Balanced,
}

/// Logistic regression hyperparameters; also the [`Learner`] implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    /// Inverse regularization strength.
    pub c: f64,
    pub class_weight: ClassWeight,
    pub max_iterations: usize,
    /// Stop once the sup-norm of the (weight-normalized) gradient falls below this.
    pub tolerance: f64,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        LogisticRegression {
            c: 1.0,
            class_weight: ClassWeight::None,
            max_iterations: 1000,
            tolerance: 1e-6,
        }
    }
}

impl LogisticRegression {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }

    /// Per-item loss weights for `coll` under this configuration.
    pub fn item_weights(&self, coll: &LabelledCollection) -> Vec<f64> {
        match self.class_weight {
            ClassWeight::None => vec![1.0; coll.len()],
            ClassWeight::Balanced => {
                let counts = coll.counts();
                let present = counts.iter().filter(|&&n| n > 0).count() as f64;
                let total = coll.len() as f64;
                coll.labels()
                    .iter()
                    .map(|&l| total / (present * counts[l] as f64))
                    .collect()
            }
        }
    }

    pub fn fit(&self, coll: &LabelledCollection) -> Result<TrainedLogistic> {
        self.validate()?;
        if coll.counts().iter().filter(|&&n| n > 0).count() < 2 {
            return Err(Error::DegenerateTraining("only one category is present".into()));
        }
        let c = coll.n_categories();
        let d = coll.dim();
        let weights = self.item_weights(coll);
        let problem = Objective {
            coll,
            weights: &weights,
            inv_c: 1.0 / self.c,
        };

        let mut theta = vec![0.0; c * d + c];
        let (mut loss, mut grad) = problem.eval(&theta);
        let mut history = vec![loss];
        let mut step = 1.0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.max_iterations {
            if sup_norm(&grad) < self.tolerance {
                converged = true;
                break;
            }
            iterations += 1;
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
                let (tl, tg) = problem.eval(&trial);
                if tl.is_finite() && tl <= loss - 1e-4 * step * g2 {
                    accepted = Some((trial, tl, tg));
                    break;
                }
                step *= 0.5;
            }
            let Some((next, next_loss, next_grad)) = accepted else {
                // no decrease representable at this precision
                converged = sup_norm(&grad) < self.tolerance.sqrt();
                break;
            };
            // Barzilai-Borwein guess for the next trial step
            let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(next_grad.iter().zip(&grad)).map(|(s, (a, b))| s * (a - b)).sum();
            let ss: f64 = s.iter().map(|x| x * x).sum();
            step = if sy > 0.0 && (ss / sy).is_finite() {
                (ss / sy).clamp(1e-10, 1e10)
            } else {
                step * 2.0
            };
            theta = next;
            loss = next_loss;
            grad = next_grad;
            history.push(loss);
        }
        if !converged && sup_norm(&grad) < self.tolerance {
            converged = true;
        }

        let bias = theta.split_off(c * d);
        Ok(TrainedLogistic {
            weights: theta,
            bias,
            n_categories: c,
            dim: d,
            categories: coll.categories().to_vec(),
            diagnostics: TrainingDiagnostics {
                iterations,
                converged,
                loss_history: history,
            },
        })
    }
}

impl Learner for LogisticRegression {
    fn train(&self, coll: &LabelledCollection) -> Result<Arc<dyn Classifier>> {
        Ok(Arc::new(self.fit(coll)?))
    }

    fn get_params(&self) -> ParamMap {
        let mut p = ParamMap::new();
        p.insert("C".into(), self.c.into());
        p.insert(
            "class_weight".into(),
            match self.class_weight {
                ClassWeight::None => "none",
                ClassWeight::Balanced => "balanced",
            }
            .into(),
        );
        p.insert("max_iter".into(), self.max_iterations.into());
        p.insert("tol".into(), self.tolerance.into());
        p
    }

    fn set_param(&mut self, name: &str, value: &ParamValue) -> Result<()> {
        match name {
            "C" | "c" => self.c = expect_f64(name, value)?,
            "class_weight" => {
                self.class_weight = match value.to_string().to_ascii_lowercase().as_str() {
                    "balanced" => ClassWeight::Balanced,
                    "none" => ClassWeight::None,
                    other => return Err(Error::invalid(format!("class_weight `{other}` is not balanced|none"))),
                }
            }
            "max_iter" => self.max_iterations = expect_usize(name, value)?,
            "tol" => self.tolerance = expect_f64(name, value)?,
            _ => return Err(Error::invalid(format!("logistic regression has no parameter `{name}`"))),
        }
        self.validate()
    }

    fn box_clone(&self) -> Box<dyn Learner> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start and after every accepted step.
    pub loss_history: Vec<f64>,
}

/// Fitted weights (`c x d`, row-major) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLogistic {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub n_categories: usize,
    pub dim: usize,
    pub categories: Vec<String>,
    pub diagnostics: TrainingDiagnostics,
}

impl TrainedLogistic {
    /// A model with explicit parameters (no training history).
    pub fn from_parts(weights: Vec<f64>, bias: Vec<f64>, categories: Vec<String>) -> Result<Self> {
        let c = categories.len();
        if c < 2 || bias.len() != c || weights.len() % c != 0 {
            return Err(Error::invalid("weights must be c x d and bias of length c"));
        }
        Ok(TrainedLogistic {
            dim: weights.len() / c,
            weights,
            bias,
            n_categories: c,
            categories,
            diagnostics: TrainingDiagnostics {
                iterations: 0,
                converged: true,
                loss_history: Vec::new(),
            },
        })
    }

    fn check_dim(&self, x: &FeatureVec) -> Result<()> {
        let ok = match x {
            FeatureVec::Dense(v) => v.len() == self.dim,
            FeatureVec::Sparse(_) => x.min_dim() <= self.dim,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.min_dim(),
            })
        }
    }

    fn row(&self, x: &FeatureVec) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.n_categories)
            .map(|k| x.dot(&self.weights[k * self.dim..(k + 1) * self.dim]) + self.bias[k])
            .collect();
        softmax(&scores)
    }
}

impl Classifier for TrainedLogistic {
    fn n_categories(&self) -> usize {
        self.n_categories
    }

    fn posteriors(&self, instances: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        instances
            .iter()
            .map(|x| {
                self.check_dim(x)?;
                Ok(self.row(x))
            })
            .collect()
    }

    fn warnings(&self) -> Vec<String> {
        if self.diagnostics.converged {
            Vec::new()
        } else {
            vec![format!(
                "logistic regression did not converge in {} iterations",
                self.diagnostics.iterations
            )]
        }
    }
}

/// Softmax with the row maximum subtracted before exponentiation.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Objective<'a> {
    coll: &'a LabelledCollection,
    weights: &'a [f64],
    inv_c: f64,
}

impl Objective<'_> {
    /// Objective and gradient, both divided by the total item weight.
    fn eval(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let c = self.coll.n_categories();
        let d = self.coll.dim();
        let (w, b) = theta.split_at(c * d);
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        let mut scores = vec![0.0; c];
        for ((x, &y), &wi) in self.coll.instances().iter().zip(self.coll.labels()).zip(self.weights) {
            for k in 0..c {
                scores[k] = x.dot(&w[k * d..(k + 1) * d]) + b[k];
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            let log_z = m + z.ln();
            loss += wi * (log_z - scores[y]);
            for k in 0..c {
                let p = (scores[k] - log_z).exp();
                let r = wi * (p - if k == y { 1.0 } else { 0.0 });
                if r != 0.0 {
                    let gk = &mut grad[k * d..(k + 1) * d];
                    x.for_each_nonzero(|j, v| gk[j] += r * v);
                    grad[c * d + k] += r;
                }
            }
        }
        let norm2: f64 = w.iter().map(|v| v * v).sum();
        loss += 0.5 * self.inv_c * norm2;
        for (g, v) in grad.iter_mut().zip(w) {
            *g += self.inv_c * v;
        }
        let total: f64 = self.weights.iter().sum();
        for g in &mut grad {
            *g /= total;
        }
        (loss / total, grad)
    }
}

/// The training objective and its analytic gradient at `theta`
/// (`c*d` weights row-major followed by `c` biases), normalized by the total
/// item weight. Exposed for gradient checking.
pub fn objective_and_gradient(
    coll: &LabelledCollection,
    cfg: &LogisticRegression,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let expected = coll.n_categories() * (coll.dim() + 1);
    if theta.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: theta.len(),
        });
    }
    let weights = cfg.item_weights(coll);
    Ok(Objective {
        coll,
        weights: &weights,
        inv_c: 1.0 / cfg.c,
    }
    .eval(theta))
}

/// How validation posteriors are produced from a labelled set.
#[derive(Debug, Clone)]
pub enum ValSplit {
    /// Stratified k-fold cross-validation.
    Folds(usize),
    /// Stratified held-out fraction in (0, 1).
    Fraction(f64),
    /// An explicit validation collection.
    Explicit(LabelledCollection),
}

impl Default for ValSplit {
    fn default() -> Self {
        ValSplit::Folds(5)
    }
}

impl ValSplit {
    /// `"5"` means five folds, `"0.4"` a 40% held-out fraction.
    pub fn parse(s: &str) -> Result<Self> {
        Self::from_param(&ParamValue::parse(s))
    }

    pub fn from_param(v: &ParamValue) -> Result<Self> {
        match v {
            ParamValue::Num(x) if x.fract() == 0.0 && *x >= 2.0 => Ok(ValSplit::Folds(*x as usize)),
            ParamValue::Num(x) if *x > 0.0 && *x < 1.0 => Ok(ValSplit::Fraction(*x)),
            _ => Err(Error::invalid(format!(
                "val_split `{v}` is neither a fraction in (0,1) nor a fold count >= 2"
            ))),
        }
    }

    pub fn to_param(&self) -> ParamValue {
        match self {
            ValSplit::Folds(k) => (*k).into(),
            ValSplit::Fraction(f) => (*f).into(),
            ValSplit::Explicit(_) => "explicit".into(),
        }
    }
}

/// Posteriors on validation items plus a classifier for the full set.
#[derive(Debug, Clone)]
pub struct CrossValPosteriors {
    pub posteriors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classifier: Arc<dyn Classifier>,
}

/// Out-of-sample posteriors according to `split`.
///
/// In k-fold mode every item of `coll` receives exactly one out-of-fold
/// posterior (rows in collection order); in fraction and explicit modes only
/// the held-out items do. The returned classifier is always trained on all of
/// `coll`.
pub fn cross_val_posteriors(
    coll: &LabelledCollection,
    learner: &dyn Learner,
    split: &ValSplit,
    seed: u64,
) -> Result<CrossValPosteriors> {
    match split {
        ValSplit::Folds(k) => {
            let folds = coll.kfold_indices(*k, seed)?;
            let parts = folds
                .par_iter()
                .map(|(train, held)| {
                    let model = learner.train(&coll.subset(train)?)?;
                    let held_coll = coll.subset(held)?;
                    Ok((held.clone(), model.posteriors(held_coll.instances())?))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut posteriors = vec![Vec::new(); coll.len()];
            for (held, rows) in parts {
                for (i, row) in held.into_iter().zip(rows) {
                    posteriors[i] = row;
                }
            }
            Ok(CrossValPosteriors {
                posteriors,
                labels: coll.labels().to_vec(),
                classifier: learner.train(coll)?,
            })
        }
        ValSplit::Fraction(f) => {
            let (train, val) = coll.split_stratified(*f, seed)?;
            let model = learner.train(&train)?;
            Ok(CrossValPosteriors {
                posteriors: model.posteriors(val.instances())?,
                labels: val.labels().to_vec(),
                classifier: learner.train(coll)?,
            })
        }
        ValSplit::Explicit(val) => {
            if val.categories() != coll.categories() {
                return Err(Error::invalid("validation categories differ from training"));
            }
            let model = learner.train(coll)?;
            Ok(CrossValPosteriors {
                posteriors: model.posteriors(val.instances())?,
                labels: val.labels().to_vec(),
                classifier: model,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rng;
    use rand::Rng;

    fn line_data() -> LabelledCollection {
        let xs = [-3.0, -2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 3.0];
        LabelledCollection::new(
            xs.iter().map(|&x| FeatureVec::Dense(vec![x])).collect(),
            xs.iter().map(|&x| usize::from(x > 0.0)).collect(),
            vec!["A".into(), "B".into()],
        )
        .unwrap()
    }

    fn random_problem(seed: u64, n: usize, d: usize, c: usize) -> LabelledCollection {
        let mut r = rng(seed);
        let inst = (0..n)
            .map(|_| FeatureVec::Dense((0..d).map(|_| r.random_range(-2.0..2.0)).collect()))
            .collect();
        let mut labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        labels[0] = 0;
        labels[1] = 1;
        LabelledCollection::new(inst, labels, (0..c).map(|i| i.to_string()).collect()).unwrap()
    }

    #[test]
    fn separable_line_has_positive_slope_for_b() {
        let m = LogisticRegression::default().fit(&line_data()).unwrap();
        // weight of B minus weight of A along x
        assert!(m.weights[1] - m.weights[0] > 0.0);
        assert!(m.weights[1] > 0.0);
        assert_eq!(predict(&m, line_data().instances()).unwrap(), line_data().labels());
    }

    #[test]
    fn degenerate_training() {
        let c = LabelledCollection::new(
            vec![FeatureVec::Dense(vec![1.0]); 3],
            vec![1, 1, 1],
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        let err = LogisticRegression::default().fit(&c).unwrap_err();
        assert!(err.to_string().contains("degenerate training set"));
    }

    #[test]
    fn balanced_on_balanced_is_unweighted() {
        let data = line_data();
        let a = LogisticRegression::default().fit(&data).unwrap();
        let b = LogisticRegression {
            class_weight: ClassWeight::Balanced,
            ..Default::default()
        }
        .fit(&data)
        .unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn zero_model_posteriors() {
        let m = TrainedLogistic::from_parts(vec![0.0; 4], vec![0.0; 2], vec!["a".into(), "b".into()]).unwrap();
        let rows = m.posteriors(&[FeatureVec::Dense(vec![3.0, -1.0])]).unwrap();
        assert_eq!(rows[0], vec![0.5, 0.5]);
        assert!(matches!(
            m.posteriors(&[FeatureVec::Dense(vec![1.0])]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn softmax_limits() {
        let p = softmax(&[1000.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = softmax(&[-1e308, 1e308]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..6u64 {
            let c = 2 + (seed as usize % 2);
            let d = 1 + seed as usize % 5;
            let coll = random_problem(seed, 30 + 3 * seed as usize, d, c);
            let cfg = LogisticRegression {
                c: 0.7,
                class_weight: if seed % 2 == 0 { ClassWeight::Balanced } else { ClassWeight::None },
                ..Default::default()
            };
            let mut r = rng(seed + 100);
            let theta: Vec<f64> = (0..c * (d + 1)).map(|_| r.random_range(-1.0..1.0)).collect();
            let (_, g) = objective_and_gradient(&coll, &cfg, &theta).unwrap();
            let h = 1e-5;
            for j in 0..theta.len() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += h;
                tm[j] -= h;
                let fd = (objective_and_gradient(&coll, &cfg, &tp).unwrap().0
                    - objective_and_gradient(&coll, &cfg, &tm).unwrap().0)
                    / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-3);
                assert!(rel < 1e-5, "seed {seed} coord {j}: fd {fd} analytic {}", g[j]);
            }
        }
    }

    #[test]
    fn loss_is_monotone_and_deterministic() {
        let coll = random_problem(9, 50, 4, 3);
        let cfg = LogisticRegression::default();
        let a = cfg.fit(&coll).unwrap();
        for w in a.diagnostics.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let b = cfg.fit(&coll).unwrap();
        assert_eq!(a, b);
        for row in a.posteriors(coll.instances()).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn nonconvergence_is_a_warning() {
        let cfg = LogisticRegression {
            max_iterations: 1,
            tolerance: 1e-14,
            ..Default::default()
        };
        let m = cfg.fit(&random_problem(3, 40, 3, 2)).unwrap();
        assert!(!m.diagnostics.converged);
        assert_eq!(m.warnings().len(), 1);
    }

    #[test]
    fn sparse_and_dense_agree() {
        let dense = random_problem(4, 30, 3, 2);
        let sparse = LabelledCollection::with_dim(
            dense
                .instances()
                .iter()
                .map(|x| match x {
                    FeatureVec::Dense(v) => FeatureVec::Sparse(v.iter().cloned().enumerate().collect()),
                    s => s.clone(),
                })
                .collect(),
            dense.labels().to_vec(),
            dense.categories().to_vec(),
            3,
        )
        .unwrap();
        let a = LogisticRegression::default().fit(&dense).unwrap();
        let b = LogisticRegression::default().fit(&sparse).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_val_modes() {
        let coll = random_problem(5, 100, 2, 2);
        let lr = LogisticRegression::default();
        let cv = cross_val_posteriors(&coll, &lr, &ValSplit::Folds(5), 1).unwrap();
        assert_eq!(cv.posteriors.len(), 100);
        assert!(cv.posteriors.iter().all(|r| r.len() == 2));
        let cv = cross_val_posteriors(&coll, &lr, &ValSplit::Fraction(0.4), 1).unwrap();
        assert_eq!(cv.posteriors.len(), 40);
        let held = coll.subset(&(0..25).collect::<Vec<_>>()).unwrap();
        let cv = cross_val_posteriors(&coll, &lr, &ValSplit::Explicit(held), 1).unwrap();
        assert_eq!(cv.posteriors.len(), 25);
        let direct = lr.fit(&coll).unwrap();
        assert_eq!(
            cv.classifier.posteriors(coll.instances()).unwrap(),
            direct.posteriors(coll.instances()).unwrap()
        );
    }

    #[test]
    fn val_split_parsing() {
        assert!(matches!(ValSplit::parse("5").unwrap(), ValSplit::Folds(5)));
        assert!(matches!(ValSplit::parse("0.4").unwrap(), ValSplit::Fraction(f) if f == 0.4));
        assert!(ValSplit::parse("1").is_err());
        assert!(ValSplit::parse("abc").is_err());
    }
}
