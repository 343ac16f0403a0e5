//! Error measures, evaluation protocols and reports.

mod combinatorics;
mod measures;
mod protocol;
mod report;
mod stats;

pub use combinatorics::{get_nprevpoints_approximation, grid_numerators, num_prevalence_combinations, prevalence_grid};
pub use measures::{default_smoothing, error, smooth, ErrorMeasure, ALL_MEASURES};
pub use protocol::{app_evaluate, app_targets, evaluate, npp_evaluate, Grid, Protocol, ProtocolConfig};
pub use report::{QuantReport, ReportMeta, ReportRow, Segment};
pub use stats::{paired_t_test, TTest};

use crate::error::{Error, Result};

/// Mean of a metric column.
pub fn summarize(report: &QuantReport, metric: &str) -> Result<f64> {
    if report.is_empty() {
        return Err(Error::invalid("cannot summarize an empty report"));
    }
    let col = report.column(metric)?;
    Ok(col.iter().sum::<f64>() / col.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PrevalenceVector;

    fn report(values: &[f64]) -> QuantReport {
        QuantReport {
            meta: ReportMeta::default(),
            metrics: vec!["mae".into()],
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| ReportRow {
                    sample: i,
                    true_prev: PrevalenceVector::uniform(2),
                    estim_prev: PrevalenceVector::uniform(2),
                    errors: vec![v],
                })
                .collect(),
        }
    }

    #[test]
    fn summarize_means() {
        assert!((summarize(&report(&[0.1, 0.3]), "mae").unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(summarize(&report(&[0.7]), "mae").unwrap(), 0.7);
        assert!(summarize(&report(&[]), "mae").is_err());
        assert!(summarize(&report(&[0.1]), "mse").is_err());
    }
}
