//! Quantifiers composed from other quantifiers.

mod ensemble;
mod ova;

pub use ensemble::{
    posterior_histogram, uniform_simplex, Ensemble, EnsembleConfig, EnsembleMember, EnsemblePolicy,
    DEFAULT_MEMBER_SAMPLE, DEFAULT_MIN_PER_CATEGORY, DS_BINS,
};
pub use ova::{one_vs_all_normalize, one_vs_all_quantify, OneVsAll};

use crate::error::{Error, Result};

/// Packs several per-item outputs into one row per item as
/// `[len, values..., len, values...]`.
pub(crate) fn join_segments(parts: &[Vec<Vec<f64>>], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = Vec::new();
            for p in parts {
                row.push(p[i].len() as f64);
                row.extend_from_slice(&p[i]);
            }
            row
        })
        .collect()
}

pub(crate) fn split_segments<'a>(rows: &[&'a [f64]]) -> Result<Vec<Vec<&'a [f64]>>> {
    rows.iter()
        .map(|row| {
            let mut out = Vec::new();
            let mut rest: &[f64] = row;
            while let Some((&len, tail)) = rest.split_first() {
                let len = len as usize;
                if len > tail.len() {
                    return Err(Error::invalid("malformed composite row"));
                }
                out.push(&tail[..len]);
                rest = &tail[len..];
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_round_trip() {
        let parts = vec![vec![vec![0.1, 0.9], vec![0.5, 0.5]], vec![vec![1.0, 0.0, 0.0], vec![0.2, 0.3, 0.5]]];
        let rows = join_segments(&parts, 2);
        assert_eq!(rows[0], vec![2.0, 0.1, 0.9, 3.0, 1.0, 0.0, 0.0]);
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let back = split_segments(&refs).unwrap();
        assert_eq!(back[1], vec![&[0.5, 0.5][..], &[0.2, 0.3, 0.5][..]]);
        assert!(split_segments(&[&[5.0, 1.0][..]]).is_err());
    }
}
