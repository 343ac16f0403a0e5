use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use super::PrevalenceVector;
use crate::error::{Error, Result};
use crate::math::{largest_remainder, rng};

/// One instance, stored densely or as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVec {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

impl FeatureVec {
    pub fn dot(&self, weights: &[f64]) -> f64 {
        match self {
            FeatureVec::Dense(v) => v.iter().zip(weights).map(|(a, b)| a * b).sum(),
            FeatureVec::Sparse(v) => v
                .iter()
                .map(|&(i, x)| weights.get(i).map_or(0.0, |w| w * x))
                .sum(),
        }
    }

    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            FeatureVec::Dense(v) => {
                for (i, &x) in v.iter().enumerate() {
                    if x != 0.0 {
                        f(i, x);
                    }
                }
            }
            FeatureVec::Sparse(v) => {
                for &(i, x) in v {
                    f(i, x);
                }
            }
        }
    }

    /// Smallest dimension able to hold this vector.
    pub fn min_dim(&self) -> usize {
        match self {
            FeatureVec::Dense(v) => v.len(),
            FeatureVec::Sparse(v) => v.last().map_or(0, |(i, _)| i + 1),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            FeatureVec::Dense(v) => v.iter().filter(|x| **x != 0.0).count(),
            FeatureVec::Sparse(v) => v.len(),
        }
    }
}

/// Instances with one category label each.
///
/// Labels are stored as indices into `categories`. Collections are immutable
/// once built; every derived collection is a fresh copy.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledCollection {
    instances: Vec<FeatureVec>,
    labels: Vec<usize>,
    categories: Vec<String>,
    dim: usize,
}

impl LabelledCollection {
    pub fn new(instances: Vec<FeatureVec>, labels: Vec<usize>, categories: Vec<String>) -> Result<Self> {
        let dim = instances.iter().map(FeatureVec::min_dim).max().unwrap_or(0);
        Self::with_dim(instances, labels, categories, dim)
    }

    /// Like [`LabelledCollection::new`] with an explicit feature dimension;
    /// dense rows must match it exactly.
    pub fn with_dim(
        instances: Vec<FeatureVec>,
        labels: Vec<usize>,
        categories: Vec<String>,
        dim: usize,
    ) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::invalid("a collection needs at least one instance"));
        }
        if instances.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} instances but {} labels",
                instances.len(),
                labels.len()
            )));
        }
        if categories.len() < 2 {
            return Err(Error::invalid("a collection needs at least two categories"));
        }
        for (i, c) in categories.iter().enumerate() {
            if categories[..i].contains(c) {
                return Err(Error::invalid(format!("duplicate category `{c}`")));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= categories.len()) {
            return Err(Error::invalid(format!("label index {l} out of range")));
        }
        for x in &instances {
            let found = x.min_dim();
            let bad = match x {
                FeatureVec::Dense(v) => v.len() != dim,
                FeatureVec::Sparse(_) => found > dim,
            };
            if bad {
                return Err(Error::DimensionMismatch { expected: dim, found });
            }
        }
        Ok(LabelledCollection {
            instances,
            labels,
            categories,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn instances(&self) -> &[FeatureVec] {
        &self.instances
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_categories()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn prevalence(&self) -> PrevalenceVector {
        PrevalenceVector::from_counts(&self.counts()).expect("collections are nonempty")
    }

    /// Indices of the items of each category, in collection order.
    pub fn indices_by_category(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_categories()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// New collection holding the items at `indices` (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::with_dim(
            indices.iter().map(|&i| self.instances[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.categories.clone(),
            self.dim,
        )
    }

    /// Category-vs-rest relabeling: `[rest, categories[positive]]`.
    pub fn binarize(&self, positive: usize) -> Result<Self> {
        if positive >= self.n_categories() {
            return Err(Error::invalid(format!("category index {positive} out of range")));
        }
        let name = &self.categories[positive];
        Self::with_dim(
            self.instances.clone(),
            self.labels.iter().map(|&l| usize::from(l == positive)).collect(),
            vec![format!("not-{name}"), name.clone()],
            self.dim,
        )
    }

    /// Per-category counts for a sample of `size` items at `prev`, by
    /// largest-remainder rounding.
    pub fn counts_at_prevalence(&self, size: usize, prev: &PrevalenceVector) -> Result<Vec<usize>> {
        if prev.len() != self.n_categories() {
            return Err(Error::DimensionMismatch {
                expected: self.n_categories(),
                found: prev.len(),
            });
        }
        Ok(largest_remainder(size, prev))
    }

    /// Indices of a sample of `size` items whose category counts follow
    /// `prev`. Within a category items are drawn uniformly without
    /// replacement, switching to with-replacement when the category holds
    /// fewer items than requested.
    pub fn sample_indices_at_prevalence(
        &self,
        size: usize,
        prev: &PrevalenceVector,
        seed: u64,
    ) -> Result<Vec<usize>> {
        if size == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let counts = self.counts_at_prevalence(size, prev)?;
        let pools = self.indices_by_category();
        let mut rng = rng(seed);
        let mut out = Vec::with_capacity(size);
        for (cat, (&want, pool)) in counts.iter().zip(&pools).enumerate() {
            if want == 0 {
                continue;
            }
            if pool.is_empty() {
                return Err(Error::EmptyCategory(self.categories[cat].clone()));
            }
            if want <= pool.len() {
                out.extend(index::sample(&mut rng, pool.len(), want).into_iter().map(|i| pool[i]));
            } else {
                out.extend((0..want).map(|_| pool[rng.random_range(0..pool.len())]));
            }
        }
        Ok(out)
    }

    pub fn sample_at_prevalence(&self, size: usize, prev: &PrevalenceVector, seed: u64) -> Result<Self> {
        self.subset(&self.sample_indices_at_prevalence(size, prev, seed)?)
    }

    /// Indices of a uniform sample of `size` items, without replacement when
    /// possible. The flag reports whether replacement was needed.
    pub fn uniform_sample_indices(&self, size: usize, seed: u64) -> Result<(Vec<usize>, bool)> {
        if size == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let mut rng = rng(seed);
        let n = self.len();
        if size <= n {
            Ok((index::sample(&mut rng, n, size).into_vec(), false))
        } else {
            Ok(((0..size).map(|_| rng.random_range(0..n)).collect(), true))
        }
    }

    /// Stratified split; the second part holds about `fraction` of the items,
    /// with per-category quotas assigned by largest remainder.
    pub fn split_stratified(&self, fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!("split fraction {fraction} not in (0,1)")));
        }
        let counts = self.counts();
        if let Some(c) = counts.iter().position(|&n| n > 0 && n < 2) {
            return Err(Error::invalid(format!(
                "category `{}` has fewer than 2 items",
                self.categories[c]
            )));
        }
        let total = (fraction * self.len() as f64).round() as usize;
        let weights: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
        let quotas = largest_remainder(total, &weights);
        let mut rng = rng(seed);
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (cat, mut pool) in self.indices_by_category().into_iter().enumerate() {
            if pool.is_empty() {
                continue;
            }
            let q = quotas[cat];
            if q == 0 || q >= pool.len() {
                return Err(Error::invalid(format!(
                    "split would leave category `{}` empty on one side",
                    self.categories[cat]
                )));
            }
            pool.shuffle(&mut rng);
            second.extend_from_slice(&pool[..q]);
            first.extend_from_slice(&pool[q..]);
        }
        first.sort_unstable();
        second.sort_unstable();
        Ok((self.subset(&first)?, self.subset(&second)?))
    }

    /// Stratified k-fold partition; returns `(train, heldout)` per fold.
    pub fn kfold(&self, k: usize, seed: u64) -> Result<Vec<(Self, Self)>> {
        Ok(self
            .kfold_indices(k, seed)?
            .into_iter()
            .map(|(tr, te)| Ok((self.subset(&tr)?, self.subset(&te)?)))
            .collect::<Result<Vec<_>>>()?)
    }

    /// Index form of [`LabelledCollection::kfold`].
    pub fn kfold_indices(&self, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        if k < 2 {
            return Err(Error::invalid("k-fold needs k >= 2"));
        }
        let counts = self.counts();
        if let Some(c) = counts.iter().position(|&n| n > 0 && n < k) {
            return Err(Error::invalid(format!(
                "category `{}` has {} items, fewer than k={k}",
                self.categories[c], counts[c]
            )));
        }
        let mut rng = rng(seed);
        let mut fold_of = vec![0usize; self.len()];
        let mut next = 0usize;
        for mut pool in self.indices_by_category() {
            pool.shuffle(&mut rng);
            for i in pool {
                fold_of[i] = next % k;
                next += 1;
            }
        }
        Ok((0..k)
            .map(|f| {
                let (test, train): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| fold_of[i] == f);
                (train, test)
            })
            .collect())
    }
}

/// A training/test pair over the same categories.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub training: LabelledCollection,
    pub test: LabelledCollection,
}

impl Dataset {
    pub fn new(name: impl Into<String>, training: LabelledCollection, test: LabelledCollection) -> Result<Self> {
        if training.categories() != test.categories() {
            return Err(Error::invalid("training and test categories differ"));
        }
        if training.dim() != test.dim() {
            return Err(Error::DimensionMismatch {
                expected: training.dim(),
                found: test.dim(),
            });
        }
        Ok(Dataset {
            name: name.into(),
            training,
            test,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coll(labels: &[usize], c: usize) -> LabelledCollection {
        let inst = labels.iter().enumerate().map(|(i, _)| FeatureVec::Dense(vec![i as f64])).collect();
        let cats = (0..c).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
        LabelledCollection::new(inst, labels.to_vec(), cats).unwrap()
    }

    fn balanced(n: usize) -> LabelledCollection {
        coll(&(0..n).map(|i| i % 2).collect::<Vec<_>>(), 2)
    }

    #[test]
    fn prevalence_counts() {
        assert_eq!(coll(&[0, 0, 1, 1], 2).prevalence().values(), &[0.5, 0.5]);
        assert_eq!(coll(&[0], 2).prevalence().values(), &[1.0, 0.0]);
        let rep: Vec<usize> = [0, 1, 1, 1, 2].repeat(4);
        assert_eq!(coll(&rep, 3).prevalence().values(), &[0.2, 0.6, 0.2]);
    }

    #[test]
    fn construction_errors() {
        let inst = vec![FeatureVec::Dense(vec![1.0]), FeatureVec::Dense(vec![1.0, 2.0])];
        assert!(matches!(
            LabelledCollection::new(inst, vec![0, 1], vec!["a".into(), "b".into()]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(LabelledCollection::new(vec![], vec![], vec!["a".into(), "b".into()]).is_err());
        assert!(LabelledCollection::new(vec![FeatureVec::Dense(vec![])], vec![2], vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn sampling_counts() {
        let c = coll(&[0, 1, 2].repeat(60), 3);
        let prev = PrevalenceVector::new(vec![0.4, 0.1, 0.5]).unwrap();
        let s = c.sample_at_prevalence(100, &prev, 3).unwrap();
        assert_eq!(s.counts(), vec![40, 10, 50]);

        let b = balanced(20);
        let s = b.sample_at_prevalence(10, &PrevalenceVector::point(2, 0), 1).unwrap();
        assert_eq!(s.counts(), vec![10, 0]);
        let s = b.sample_at_prevalence(3, &PrevalenceVector::uniform(2), 1).unwrap();
        assert_eq!(s.counts(), vec![2, 1]);
    }

    #[test]
    fn sampling_with_replacement_when_short() {
        let b = balanced(10);
        let s = b.sample_at_prevalence(100, &PrevalenceVector::point(2, 1), 9).unwrap();
        assert_eq!(s.counts(), vec![0, 100]);
    }

    #[test]
    fn sampling_empty_category_errors() {
        let c = coll(&[0, 0, 0], 2);
        let r = c.sample_at_prevalence(10, &PrevalenceVector::uniform(2), 1);
        assert!(matches!(r, Err(Error::EmptyCategory(_))));
        // zero target count for the empty category is fine
        assert!(c.sample_at_prevalence(10, &PrevalenceVector::point(2, 0), 1).is_ok());
    }

    #[test]
    fn sampling_determinism() {
        let b = balanced(200);
        let p = PrevalenceVector::binary(0.3).unwrap();
        let a = b.sample_indices_at_prevalence(50, &p, 11).unwrap();
        assert_eq!(a, b.sample_indices_at_prevalence(50, &p, 11).unwrap());
        assert_ne!(a, b.sample_indices_at_prevalence(50, &p, 12).unwrap());
    }

    #[test]
    fn stratified_splits() {
        let (a, b) = balanced(100).split_stratified(0.4, 1).unwrap();
        assert_eq!((a.len(), b.len()), (60, 40));
        assert_eq!(a.prevalence().values(), &[0.5, 0.5]);
        assert_eq!(b.prevalence().values(), &[0.5, 0.5]);

        let (a, b) = balanced(4).split_stratified(0.5, 1).unwrap();
        assert_eq!((a.counts(), b.counts()), (vec![1, 1], vec![1, 1]));

        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 92)).collect();
        let (_, v) = coll(&labels, 2).split_stratified(0.4, 5).unwrap();
        assert_eq!(v.counts(), vec![37, 3]);

        assert!(coll(&[0, 0, 1], 2).split_stratified(0.5, 1).is_err());
    }

    #[test]
    fn kfold_partition() {
        let b = balanced(100);
        let folds = b.kfold(5, 2).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = Vec::new();
        for (tr, te) in &folds {
            assert_eq!(te.len(), 20);
            assert_eq!(tr.len(), 80);
            assert_eq!(te.prevalence().values(), &[0.5, 0.5]);
            seen.extend(te.instances().iter().map(|x| x.dot(&[1.0]) as usize));
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());

        let folds = balanced(4).kfold(2, 0).unwrap();
        for (_, te) in folds {
            assert_eq!(te.counts(), vec![1, 1]);
        }
        assert!(balanced(6).kfold(4, 0).is_err());
    }

    proptest! {
        #[test]
        fn fidelity_bound(size in 1usize..300, raw in proptest::collection::vec(0.0f64..1.0, 3), seed: u64) {
            let prev = PrevalenceVector::from_unnormalized(&raw);
            let c = coll(&[0, 1, 2].repeat(50), 3);
            let s = c.sample_at_prevalence(size, &prev, seed).unwrap();
            prop_assert_eq!(s.len(), size);
            let sp = s.prevalence();
            for i in 0..3 {
                prop_assert!((sp[i] - prev[i]).abs() <= 2.0 / size as f64 + 1e-12);
            }
            let sum: f64 = sp.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-8);
        }

        #[test]
        fn split_conserves_items(n in 4usize..120, frac in 0.2f64..0.8, seed: u64) {
            let b = balanced(n);
            if let Ok((x, y)) = b.split_stratified(frac, seed) {
                let mut all: Vec<i64> = x.instances().iter().chain(y.instances()).map(|v| v.dot(&[1.0]) as i64).collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n as i64).collect::<Vec<_>>());
            }
        }
    }
}
