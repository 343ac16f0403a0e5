//! Counting and enumerating the prevalence grid of the artificial protocol.

use crate::error::{Error, Result};

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    u64::try_from(acc).ok()
}

/// Number of samples the artificial protocol generates: grid points whose
/// coordinates sum to one, times the repetitions.
pub fn num_prevalence_combinations(n_prevpoints: usize, n_classes: usize, n_repeats: usize) -> Result<u64> {
    if n_prevpoints < 2 || n_classes < 1 || n_repeats < 1 {
        return Err(Error::invalid(
            "need n_prevpoints >= 2, n_classes >= 1 and n_repeats >= 1",
        ));
    }
    (n_prevpoints as u64 - 1)
        .checked_add(n_classes as u64 - 1)
        .and_then(|n| binomial(n, n_classes as u64 - 1))
        .and_then(|b| b.checked_mul(n_repeats as u64))
        .ok_or(Error::Overflow("number of prevalence combinations"))
}

/// Largest grid resolution whose sample count stays within `budget`.
pub fn get_nprevpoints_approximation(budget: u64, n_classes: usize, n_repeats: usize) -> Result<usize> {
    if n_classes < 2 {
        return Err(Error::invalid("the grid resolution is irrelevant with fewer than 2 classes"));
    }
    let fits = |n: usize| matches!(num_prevalence_combinations(n, n_classes, n_repeats), Ok(v) if v <= budget);
    if !fits(2) {
        let minimum = num_prevalence_combinations(2, n_classes, n_repeats)
            .map(|v| v.to_string())
            .unwrap_or_else(|_| "more than u64::MAX".into());
        return Err(Error::BudgetTooSmall(format!(
            "budget {budget} is below the {minimum} samples of the coarsest grid"
        )));
    }
    let mut lo = 2usize;
    let mut hi = 4usize;
    while fits(hi) {
        lo = hi;
        hi = match hi.checked_mul(2) {
            Some(h) => h,
            None if fits(usize::MAX) => return Ok(usize::MAX),
            None => usize::MAX,
        };
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Grid points as integer numerators over `n_prevpoints - 1`, in
/// lexicographic ascending order of the first `c - 1` coordinates.
pub fn grid_numerators(n_prevpoints: usize, n_classes: usize) -> Result<Vec<Vec<usize>>> {
    num_prevalence_combinations(n_prevpoints, n_classes, 1)?;
    let m = n_prevpoints - 1;
    let mut out = Vec::new();
    let mut cur = vec![0usize; n_classes];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
    }
    rec(0, m, &mut cur, &mut out);
    Ok(out)
}

/// Grid points as prevalence values.
pub fn prevalence_grid(n_prevpoints: usize, n_classes: usize) -> Result<Vec<Vec<f64>>> {
    let m = (n_prevpoints - 1).max(1) as f64;
    Ok(grid_numerators(n_prevpoints, n_classes)?
        .into_iter()
        .map(|row| row.into_iter().map(|v| v as f64 / m).collect())
        .collect())
}
