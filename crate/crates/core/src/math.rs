//! Small numeric helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used for every random draw in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of `(seed, a, b)`, independent of platform and
/// scheduling order.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b.rotate_left(32))
}

/// Largest-remainder (Hamilton) apportionment of `total` seats according to
/// `weights` (nonnegative, summing to ~1). Ties in the remainders go to the
/// lowest index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    // nudge against representation error, e.g. 0.29 * 100 = 28.999999999999996
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let rem = |i: usize| quotas[i] - counts[i] as f64;
    let remainders: Vec<f64> = order.iter().map(|&i| rem(i)).collect();
    order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]).then(a.cmp(&b)));
    if assigned < total {
        for &i in order.iter().take(total - assigned) {
            counts[i] += 1;
        }
    } else if assigned > total {
        // only reachable through the nudge; remove from the smallest remainders
        let drop: Vec<usize> = order.iter().rev().cloned().filter(|&i| counts[i] > 0).take(assigned - total).collect();
        for i in drop {
            counts[i] -= 1;
        }
    }
    counts
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (denominator n).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Quantile with linear interpolation between order statistics (Hyndman-Fan
/// type 7). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Index of the bin of equal width over [0, 1] containing `x`; 1.0 falls in
/// the last bin and values outside the interval are clamped.
pub fn unit_bin(x: f64, bins: usize) -> usize {
    let b = (x * bins as f64).floor();
    if b < 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

/// Normalized histogram of `values` over `bins` equal-width bins on [0, 1].
/// An empty input yields all zeros.
pub fn unit_histogram(values: impl IntoIterator<Item = f64>, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let mut n = 0usize;
    for v in values {
        h[unit_bin(v, bins)] += 1.0;
        n += 1;
    }
    if n > 0 {
        for x in &mut h {
            *x /= n as f64;
        }
    }
    h
}

/// Hellinger distance `sqrt(sum (sqrt p - sqrt q)^2)`; ranges over [0, sqrt 2]
/// for normalized histograms.
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
