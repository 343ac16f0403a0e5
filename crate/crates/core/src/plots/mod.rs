//! Diagnostic plots over evaluation reports: diagonal (estimated against
//! true prevalence), error by shift, and bias boxes. Each comes as CSV data
//! and as a standalone SVG.

mod files;
mod svg;

pub use files::{
    parse_bias_csv, parse_diagonal_csv, parse_shift_csv, write_bias_csv, write_diagonal_csv, write_shift_csv,
};
pub use svg::{bias_svg, diagonal_svg, shift_svg};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::{default_smoothing, error, ErrorMeasure, QuantReport};
use crate::data::PrevalenceVector;
use crate::math::{mean, quantile_sorted, std_dev};

/// Name of the y = x reference series in diagonal data.
pub const IDEAL_SERIES: &str = "ideal";
pub const WHISKER_IQR: f64 = 1.5;
const EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPoint {
    pub method: String,
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPoint {
    pub method: String,
    pub bin_center: f64,
    pub mean_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasBox {
    pub method: String,
    /// `all`, or the true-prevalence interval of the bin.
    pub bin: String,
    pub lo_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub hi_whisker: f64,
    pub outliers: usize,
}

/// Index of the right-closed bin of `x` among `bins` equal bins on
/// `[lo, lo + bins·width]`; the first bin also holds `lo`.
pub fn right_closed_bin(x: f64, lo: f64, width: f64, bins: usize) -> usize {
    let pos = ((x - lo) / width - EDGE_TOLERANCE).ceil();
    if pos <= 1.0 {
        0
    } else {
        ((pos as usize) - 1).min(bins - 1)
    }
}

fn check_reports(reports: &[(String, QuantReport)]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to plot"));
    }
    if let Some((name, _)) = reports.iter().find(|(_, r)| r.is_empty()) {
        return Err(Error::invalid(format!("report `{name}` is empty")));
    }
    Ok(())
}

fn target_value(p: &PrevalenceVector, target: usize) -> Result<f64> {
    p.get(target)
        .copied()
        .ok_or_else(|| Error::invalid(format!("target category {target} out of range")))
}

/// Mean and population std of the estimated target prevalence grouped by
/// exact true value; NPP reports are grouped into `bins` equal bins on
/// [0, 1] instead. An ideal series is prepended.
pub fn diagonal_data(reports: &[(String, QuantReport)], target: usize, bins: usize) -> Result<Vec<DiagonalPoint>> {
    check_reports(reports)?;
    if bins == 0 {
        return Err(Error::invalid("bin count must be at least 1"));
    }
    let mut series = Vec::new();
    let mut xs_all = BTreeMap::new();
    for (method, report) in reports {
        let binned = report.meta.protocol == "npp";
        let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for row in &report.rows {
            let t = target_value(&row.true_prev, target)?;
            let e = target_value(&row.estim_prev, target)?;
            let x = if binned {
                let w = 1.0 / bins as f64;
                (right_closed_bin(t, 0.0, w, bins) as f64 + 0.5) * w
            } else {
                t
            };
            // non-negative floats order like their bit patterns
            groups.entry((x + 0.0).to_bits()).or_insert((x, Vec::new())).1.push(e);
        }
        for (bits, (x, ys)) in groups {
            xs_all.insert(bits, x);
            series.push(DiagonalPoint {
                method: method.clone(),
                x,
                mean: mean(&ys),
                std: std_dev(&ys),
            });
        }
    }
    let mut out: Vec<DiagonalPoint> = xs_all
        .into_values()
        .map(|x| DiagonalPoint {
            method: IDEAL_SERIES.into(),
            x,
            mean: x,
            std: 0.0,
        })
        .collect();
    out.extend(series);
    Ok(out)
}

fn row_error(report: &QuantReport, idx: usize, measure: ErrorMeasure) -> Result<f64> {
    for name in [measure.mean_name(), measure.name()] {
        if let Ok(i) = report.metric_index(name) {
            return Ok(report.rows[idx].errors[i]);
        }
    }
    let eps = if report.meta.smoothing > 0.0 {
        report.meta.smoothing
    } else {
        default_smoothing(report.meta.sample_size.max(1))
    };
    let row = &report.rows[idx];
    error(measure, &row.true_prev, &row.estim_prev, eps)
}

/// Mean error per equal-width bin of the shift between the training
/// prevalence and each sample's true prevalence. `training` overrides the
/// prevalence recorded in the reports. Only populated bins are emitted.
pub fn shift_data(
    reports: &[(String, QuantReport)],
    training: Option<&PrevalenceVector>,
    shift_measure: ErrorMeasure,
    error_measure: ErrorMeasure,
    bins: usize,
) -> Result<Vec<ShiftPoint>> {
    check_reports(reports)?;
    if bins == 0 {
        return Err(Error::invalid("bin count must be at least 1"));
    }
    let mut per_method = Vec::new();
    for (method, report) in reports {
        let mut pts = Vec::with_capacity(report.len());
        for (i, row) in report.rows.iter().enumerate() {
            let train = match training {
                Some(t) => t.clone(),
                None => PrevalenceVector::new(
                    report
                        .training_prevalence(i)
                        .ok_or_else(|| Error::invalid(format!("report `{method}` records no training prevalence")))?
                        .to_vec(),
                )?,
            };
            let eps = default_smoothing(report.meta.sample_size.max(1));
            let shift = error(shift_measure, &train, &row.true_prev, eps)?;
            pts.push((shift, row_error(report, i, error_measure)?));
        }
        per_method.push((method, pts));
    }
    let all = per_method.iter().flat_map(|(_, p)| p.iter().map(|(s, _)| *s));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)));
    let (bins, width) = if hi - lo > 0.0 { (bins, (hi - lo) / bins as f64) } else { (1, 1.0) };
    let mut out = Vec::new();
    for (method, pts) in per_method {
        let mut acc = vec![(0.0, 0usize); bins];
        for (s, e) in pts {
            let b = right_closed_bin(s, lo, width, bins);
            acc[b].0 += e;
            acc[b].1 += 1;
        }
        for (b, (sum, n)) in acc.into_iter().enumerate() {
            if n > 0 {
                out.push(ShiftPoint {
                    method: method.clone(),
                    bin_center: if bins == 1 && hi == lo { lo } else { lo + (b as f64 + 0.5) * width },
                    mean_error: sum / n as f64,
                    n,
                });
            }
        }
    }
    Ok(out)
}

/// Quartiles (type 7), 1.5·IQR whiskers and outlier count.
pub fn five_number(values: &[f64]) -> Result<(f64, f64, f64, f64, f64, usize)> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty set"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let med = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - WHISKER_IQR * iqr, q3 + WHISKER_IQR * iqr);
    let inside: Vec<f64> = v.iter().cloned().filter(|&x| x >= lo_fence && x <= hi_fence).collect();
    let outliers = v.len() - inside.len();
    Ok((inside[0], q1, med, q3, inside[inside.len() - 1], outliers))
}

fn make_box(method: &str, bin: String, values: &[f64]) -> Result<BiasBox> {
    let (lo_whisker, q1, median, q3, hi_whisker, outliers) = five_number(values)?;
    Ok(BiasBox {
        method: method.into(),
        bin,
        lo_whisker,
        q1,
        median,
        q3,
        hi_whisker,
        outliers,
    })
}

pub fn bin_label(b: usize, bins: usize) -> String {
    let w = 1.0 / bins as f64;
    let open = if b == 0 { '[' } else { '(' };
    format!("{open}{:.3},{:.3}]", b as f64 * w, (b + 1) as f64 * w)
}

/// Signed error (estimated minus true target prevalence) summaries,
/// globally and, for `bins > 1`, per right-closed bin of the true value.
pub fn bias_box_data(reports: &[(String, QuantReport)], target: usize, bins: usize) -> Result<Vec<BiasBox>> {
    check_reports(reports)?;
    if bins == 0 {
        return Err(Error::invalid("bin count must be at least 1"));
    }
    let mut out = Vec::new();
    for (method, report) in reports {
        let mut all = Vec::with_capacity(report.len());
        let mut per_bin = vec![Vec::new(); bins];
        for row in &report.rows {
            let t = target_value(&row.true_prev, target)?;
            let e = target_value(&row.estim_prev, target)? - t;
            all.push(e);
            per_bin[right_closed_bin(t, 0.0, 1.0 / bins as f64, bins)].push(e);
        }
        out.push(make_box(method, "all".into(), &all)?);
        if bins > 1 {
            for (b, vals) in per_bin.iter().enumerate() {
                if !vals.is_empty() {
                    out.push(make_box(method, bin_label(b, bins), vals)?);
                }
            }
        }
    }
    Ok(out)
}

/// Signed errors of one report, for direct analysis.
pub fn signed_errors(report: &QuantReport, target: usize) -> Result<Vec<f64>> {
    report
        .rows
        .iter()
        .map(|r| Ok(target_value(&r.estim_prev, target)? - target_value(&r.true_prev, target)?))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::eval::{ReportMeta, ReportRow, Segment};
    use proptest::prelude::*;

    /// An 11-point binary APP report with `estimate` applied to each true
    /// positive prevalence.
    pub fn grid_report(estimate: impl Fn(f64) -> f64) -> QuantReport {
        QuantReport {
            meta: ReportMeta {
                protocol: "app".into(),
                sample_size: 100,
                segments: vec![Segment {
                    start: 0,
                    training_prevalence: vec![0.5, 0.5],
                }],
                ..Default::default()
            },
            metrics: vec!["mae".into()],
            rows: (0..=10)
                .map(|i| {
                    let t = i as f64 / 10.0;
                    let e = estimate(t);
                    ReportRow {
                        sample: i,
                        true_prev: PrevalenceVector::binary(t).unwrap(),
                        estim_prev: PrevalenceVector::binary(e).unwrap(),
                        errors: vec![(e - t).abs()],
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_quantifier_lies_on_the_diagonal() {
        let d = diagonal_data(&[("perfect".into(), grid_report(|t| t))], 1, 10).unwrap();
        let pts: Vec<_> = d.iter().filter(|p| p.method == "perfect").collect();
        assert_eq!(pts.len(), 11);
        for p in pts {
            assert_eq!(p.mean, p.x);
            assert_eq!(p.std, 0.0);
        }
        assert_eq!(d.iter().filter(|p| p.method == IDEAL_SERIES).count(), 11);
    }

    #[test]
    fn constant_quantifier_is_flat() {
        let d = diagonal_data(&[("c".into(), grid_report(|_| 0.5))], 1, 10).unwrap();
        assert!(d.iter().filter(|p| p.method == "c").all(|p| p.mean == 0.5));
    }

    #[test]
    fn diagonal_std_is_population() {
        let mut r = grid_report(|t| t);
        r.rows[0].estim_prev = PrevalenceVector::binary(0.2).unwrap();
        r.rows[1] = ReportRow {
            true_prev: PrevalenceVector::binary(0.0).unwrap(),
            ..r.rows[1].clone()
        };
        let d = diagonal_data(&[("m".into(), r)], 1, 10).unwrap();
        let g = d.iter().find(|p| p.method == "m" && p.x == 0.0).unwrap();
        assert!((g.mean - 0.15).abs() < 1e-12);
        assert!((g.std - 0.05).abs() < 1e-12);
    }

    #[test]
    fn npp_reports_are_binned() {
        let mut r = grid_report(|t| t);
        r.meta.protocol = "npp".into();
        let d = diagonal_data(&[("m".into(), r)], 1, 5).unwrap();
        let xs: Vec<f64> = d.iter().filter(|p| p.method == "m").map(|p| p.x).collect();
        assert_eq!(xs.len(), 5);
        assert!((xs[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn shift_values_on_the_grid() {
        let r = grid_report(|_| 0.5);
        let s = shift_data(&[("m".into(), r.clone())], None, ErrorMeasure::Ae, ErrorMeasure::Ae, 5).unwrap();
        assert_eq!(s.iter().map(|p| p.n).sum::<usize>(), 11);
        // shifts {0, .1, .2, .3, .4, .5} with multiplicities 1,2,2,2,2,2
        assert_eq!(s.iter().map(|p| p.n).collect::<Vec<_>>(), vec![3, 2, 2, 2, 2]);
        let first = &s[0];
        assert!((first.bin_center - 0.05).abs() < 1e-12);
        // errors equal shifts for a constant 0.5 quantifier
        assert!((first.mean_error - (0.0 + 0.1 + 0.1) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_shift_gives_one_bin() {
        let mut r = grid_report(|t| t);
        for row in r.rows.iter_mut() {
            row.true_prev = PrevalenceVector::binary(0.5).unwrap();
        }
        let s = shift_data(&[("m".into(), r)], None, ErrorMeasure::Ae, ErrorMeasure::Ae, 10).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].bin_center, s[0].n), (0.0, 11));
    }

    #[test]
    fn shift_needs_a_training_prevalence() {
        let mut r = grid_report(|t| t);
        r.meta.segments.clear();
        assert!(shift_data(&[("m".into(), r.clone())], None, ErrorMeasure::Ae, ErrorMeasure::Ae, 3).is_err());
        let t = PrevalenceVector::binary(0.5).unwrap();
        assert!(shift_data(&[("m".into(), r)], Some(&t), ErrorMeasure::Ae, ErrorMeasure::Se, 3).is_ok());
    }

    #[test]
    fn constant_one_zero_quantifier_bias() {
        let r = grid_report(|_| 0.0);
        let signed = signed_errors(&r, 0).unwrap();
        // rows run over true positive prevalence t, so the signed error on
        // category 0 is 1 - (1 - t) = t
        let expect: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for (a, b) in signed.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let b = bias_box_data(&[("m".into(), r)], 0, 1).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].median - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_errors_have_zero_median() {
        assert_eq!(five_number(&[-0.1, 0.1]).unwrap().2, 0.0);
    }

    #[test]
    fn five_bins_partition_rows() {
        let r = grid_report(|t| t);
        let b = bias_box_data(&[("m".into(), r)], 1, 5).unwrap();
        assert_eq!(b[0].bin, "all");
        assert_eq!(b.len(), 6);
        assert_eq!(b[1].bin, "[0.000,0.200]");
        assert_eq!(b[2].bin, "(0.200,0.400]");
        let mut counts = vec![0; 5];
        for i in 0..=10 {
            counts[right_closed_bin(i as f64 / 10.0, 0.0, 0.2, 5)] += 1;
        }
        assert_eq!(counts, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(diagonal_data(&[], 1, 10).is_err());
        let mut r = grid_report(|t| t);
        r.rows.clear();
        assert!(bias_box_data(&[("m".into(), r)], 1, 1).is_err());
        assert!(five_number(&[]).is_err());
    }

    fn oracle_quantile(v: &[f64], q: f64) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (s.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    }

    proptest! {
        #[test]
        fn quartiles_match_sort_oracle(v in prop::collection::vec(-1.0f64..1.0, 1..30)) {
            let (lo, q1, med, q3, hi, out) = five_number(&v).unwrap();
            prop_assert!((q1 - oracle_quantile(&v, 0.25)).abs() < 1e-12);
            prop_assert!((med - oracle_quantile(&v, 0.5)).abs() < 1e-12);
            prop_assert!((q3 - oracle_quantile(&v, 0.75)).abs() < 1e-12);
            let iqr = q3 - q1;
            let inside: Vec<f64> = v.iter().cloned().filter(|&x| x >= q1 - 1.5 * iqr && x <= q3 + 1.5 * iqr).collect();
            prop_assert_eq!(out, v.len() - inside.len());
            prop_assert_eq!(lo, inside.iter().cloned().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(hi, inside.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }

        #[test]
        fn bins_partition(x in 0.0f64..=1.0, bins in 1usize..20) {
            let b = right_closed_bin(x, 0.0, 1.0 / bins as f64, bins);
            prop_assert!(b < bins);
            let w = 1.0 / bins as f64;
            prop_assert!(x <= (b + 1) as f64 * w + 1e-9);
            if b > 0 {
                prop_assert!(x > b as f64 * w - 1e-9);
            }
        }
    }
}
