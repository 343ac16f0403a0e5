use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, FeatureVec, LabelledCollection, PrevalenceVector};
use crate::error::{Error, Result};
use crate::math::{derive_seed, largest_remainder, rng};

/// `c` balanced isotropic unit-variance Gaussian blobs in `c` dimensions,
/// with means `separation` apart (scaled simplex vertices), split 50/50
/// stratified into training and test.
pub fn synth_gaussian(n: usize, c: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if c < 2 {
        return Err(Error::invalid("synthetic data needs at least two categories"));
    }
    if n < 2 * c {
        return Err(Error::invalid(format!("n={n} is below 2c={}", 2 * c)));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be a nonnegative real"));
    }
    let per_class = largest_remainder(n, &PrevalenceVector::uniform(c));
    let offset = separation / std::f64::consts::SQRT_2;
    let mut rng = rng(derive_seed(seed, 0, 0));
    let mut instances = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (cat, &count) in per_class.iter().enumerate() {
        for _ in 0..count {
            let x: Vec<f64> = (0..c)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + if j == cat { offset } else { 0.0 }
                })
                .collect();
            instances.push(FeatureVec::Dense(x));
            labels.push(cat);
        }
    }
    let categories = (0..c).map(|i| i.to_string()).collect();
    let all = LabelledCollection::new(instances, labels, categories)?;
    let (training, test) = all.split_stratified(0.5, derive_seed(seed, 0, 1))?;
    Dataset::new(format!("synth-gaussian-c{c}"), training, test)
}
