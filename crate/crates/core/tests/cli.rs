use std::fs;
use std::path::Path;
use std::process::Command;

use quantkit::eval::{QuantReport, ReportMeta, ReportRow};
use quantkit::PrevalenceVector;

fn qk_env(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let lookup = |k: &str| env.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string());
    let argv = std::iter::once("qk").chain(args.iter().copied());
    let code = quantkit::cli::run(argv, &lookup, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn qk(args: &[&str]) -> (i32, String, String) {
    qk_env(args, &[])
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn eval_writes_one_report_per_method_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &Path, jobs: &str| {
        let args = [
            "eval", "--data", "synth:gaussian", "--method", "cc,acc", "--protocol", "app", "--sample-size", "100",
            "--n-prevpoints", "21", "--repeats", "5", "--seed", "7", "--jobs", jobs, "--out", &p(dir),
        ];
        let (code, out, err) = qk(&args);
        assert_eq!(code, 0, "{out}{err}");
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&a, "1");
    run(&b, "3");
    let files = csv_files(&a);
    assert_eq!(files, vec!["gaussian__acc.csv", "gaussian__cc.csv"]);
    for f in &files {
        let r = QuantReport::load(a.join(f)).unwrap();
        assert_eq!(r.len(), 105);
        assert_eq!(r.metrics, vec!["mae", "mrae", "mkld"]);
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_method_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = qk(&["eval", "--method", "cc,nosuch", "--out", &p(tmp.path())]);
    assert_eq!(code, 2);
    for m in quantkit::cli::METHODS {
        assert!(err.contains(m), "{err}");
    }
    let status = Command::new(env!("CARGO_BIN_EXE_qk"))
        .args(["eval", "--method", "nosuch", "--out", &p(tmp.path())])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("registered methods"));
}

#[test]
fn usage_and_runtime_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    assert_eq!(qk(&["eval", "--method", "cc", "--sample-size", "lots", "--out", &out]).0, 2);
    assert_eq!(qk(&["eval", "--method", "cc", "--n-prevpoints", "5", "--budget", "9", "--out", &out]).0, 2);
    assert_eq!(qk(&["eval", "--out", &out]).0, 2);
    assert_eq!(qk(&["frobnicate"]).0, 2);
    assert_eq!(qk(&["eval", "--method", "cc", "--data", "/no/such/file.csv", "--out", &out]).0, 1);
    assert_eq!(qk(&["--help"]).0, 0);
}

#[test]
fn sample_size_layers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("qk.toml");
    fs::write(&cfg, "[protocol]\nsample-size = 30\nrepeats = 1\nn_prevpoints = 3\n").unwrap();
    let size_of = |dir: &str, extra: &[&str], env: &[(&str, &str)]| {
        let out = p(&tmp.path().join(dir));
        let mut args = vec!["eval", "--method", "cc", "--repeats", "1", "--n-prevpoints", "3", "--out", &out];
        args.extend_from_slice(extra);
        let (code, o, e) = qk_env(&args, env);
        assert_eq!(code, 0, "{o}{e}");
        QuantReport::load(tmp.path().join(dir).join("gaussian__cc.csv")).unwrap().meta.sample_size
    };
    let env = [("QK_SAMPLE_SIZE", "20")];
    assert_eq!(size_of("d0", &[], &[]), 100);
    assert_eq!(size_of("d1", &[], &env), 20);
    let c = p(&cfg);
    assert_eq!(size_of("d2", &["--config", &c], &env), 30);
    assert_eq!(size_of("d3", &["--config", &c, "--sample-size", "40"], &env), 40);
}

#[test]
fn report_rows_have_the_documented_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    let (code, o, e) = qk_env(
        &["eval", "--method", "pacc", "--n-prevpoints", "11", "--repeats", "2", "--out", &out],
        &[("QK_SAMPLE_SIZE", "500")],
    );
    assert_eq!(code, 0, "{o}{e}");
    let text = fs::read_to_string(tmp.path().join("gaussian__pacc.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "sample,true_prev,estim_prev,mae,mrae,mkld");
    let r = QuantReport::parse_csv(text.as_bytes()).unwrap();
    assert_eq!(r.meta.sample_size, 500);
    assert_eq!(r.meta.smoothing, 0.001);
    assert!(r.rows.iter().all(|row| row.errors.iter().all(|e| e.is_finite())));
}

#[test]
fn fold_campaign_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    let (code, o, e) = qk(&[
        "eval", "--data", "synth:gaussian:n=600", "--method", "cc", "--folds", "5", "--n-prevpoints", "21",
        "--repeats", "3", "--sample-size", "50", "--out", &out,
    ]);
    assert_eq!(code, 0, "{o}{e}");
    let r = QuantReport::load(tmp.path().join("gaussian_n-600__cc.csv")).unwrap();
    assert_eq!(r.len(), 21 * 3 * 5);
    assert_eq!(r.meta.segments.len(), 5);
    assert_eq!(r.meta.segments[4].start, 4 * 63);
}

#[test]
fn combinations_command() {
    assert_eq!(qk(&["combinations", "--n-prevpoints", "21", "--classes", "4", "--repeats", "1"]).1, "1771\n");
    assert_eq!(
        qk(&["combinations", "--budget", "5000", "--classes", "4", "--repeats", "1"]).1,
        "n_prevpoints=30 samples=4960\n"
    );
    assert_eq!(qk(&["combinations", "--budget", "1", "--classes", "4"]).0, 2);
    assert_eq!(qk(&["combinations", "--classes", "4"]).0, 2);
}

fn planted(errors: &[f64]) -> QuantReport {
    let prev = PrevalenceVector::binary(0.5).unwrap();
    QuantReport {
        meta: ReportMeta::default(),
        metrics: vec!["mae".into()],
        rows: errors
            .iter()
            .enumerate()
            .map(|(i, &e)| ReportRow {
                sample: i,
                true_prev: prev.clone(),
                estim_prev: prev.clone(),
                errors: vec![e],
            })
            .collect(),
    }
}

fn table_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn table_t_statistic_matches_textbook_formula() {
    let tmp = tempfile::tempdir().unwrap();
    let a = [0.12, 0.30, 0.25, 0.41, 0.18, 0.22, 0.35];
    let b = [0.10, 0.21, 0.20, 0.30, 0.19, 0.15, 0.31];
    planted(&a).save(tmp.path().join("d__a.csv")).unwrap();
    planted(&b).save(tmp.path().join("d__b.csv")).unwrap();
    let (code, out, err) = qk(&["table", &p(tmp.path())]);
    assert_eq!(code, 0, "{out}{err}");
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t_oracle = mean / (var / n).sqrt();
    let rows = table_rows(&tmp.path().join("table.csv"));
    let ra = rows.iter().find(|r| &r[1] == "a").unwrap();
    let rb = rows.iter().find(|r| &r[1] == "b").unwrap();
    assert_eq!(&rb[3], "best");
    let t: f64 = ra[5].parse().unwrap();
    assert!((t - t_oracle).abs() < 1e-10, "{t} vs {t_oracle}");
    assert!(out.contains("avg rank"));
}

#[test]
fn table_identical_and_single_method() {
    let tmp = tempfile::tempdir().unwrap();
    let e = [0.1, 0.3, 0.2];
    planted(&e).save(tmp.path().join("d__a.csv")).unwrap();
    planted(&e).save(tmp.path().join("d__b.csv")).unwrap();
    assert_eq!(qk(&["table", &p(tmp.path())]).0, 0);
    let rows = table_rows(&tmp.path().join("table.csv"));
    let strata: Vec<&str> = rows.iter().map(|r| &r[3]).collect();
    assert!(strata.contains(&"best") && strata.contains(&"p>=0.05"), "{strata:?}");
    assert_eq!(rows[0][2], rows[1][2]);

    let single = tempfile::tempdir().unwrap();
    planted(&e).save(single.path().join("d__only.csv")).unwrap();
    let (code, out, _) = qk(&["table", &p(single.path())]);
    assert_eq!(code, 0);
    assert!(!out.contains('*'), "{out}");
    let rows = table_rows(&single.path().join("table.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][3], "");
}

#[test]
fn table_rejects_mismatched_rows() {
    let tmp = tempfile::tempdir().unwrap();
    planted(&[0.1, 0.2]).save(tmp.path().join("d__a.csv")).unwrap();
    planted(&[0.1, 0.2, 0.3]).save(tmp.path().join("d__b.csv")).unwrap();
    let (code, _, err) = qk(&["table", &p(tmp.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("rows"), "{err}");
}

#[test]
fn plot_commands_write_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    let (code, o, e) = qk(&["eval", "--method", "cc,acc", "--repeats", "2", "--n-prevpoints", "11", "--out", &out]);
    assert_eq!(code, 0, "{o}{e}");
    let reports = format!("{},{}", p(&tmp.path().join("gaussian__cc.csv")), p(&tmp.path().join("gaussian__acc.csv")));
    let plots = tmp.path().join("plots");
    for (kind, file) in [("diagonal", "diagonal"), ("shift", "shift"), ("bias", "bias")] {
        let (code, o, e) = qk(&["plot", kind, "--reports", &reports, "--out", &p(&plots)]);
        assert_eq!(code, 0, "{o}{e}");
        assert!(plots.join(format!("{file}.csv")).is_file());
        let svg = fs::read_to_string(plots.join(format!("{file}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    }
    let diag = quantkit::plots::parse_diagonal_csv(fs::File::open(plots.join("diagonal.csv")).unwrap()).unwrap();
    assert_eq!(diag.iter().filter(|d| d.method == "cc").count(), 11);
    assert!(diag.iter().any(|d| d.method == "acc"));
}

#[test]
fn gridsearch_prints_winner_and_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    let (code, o, e) = qk(&[
        "gridsearch", "--data", "synth:gaussian:n=600", "--method", "acc", "--param", "learner.C=0.01,1",
        "--n-prevpoints", "5", "--repeats", "2", "--sample-size", "50", "--out", &out,
    ]);
    assert_eq!(code, 0, "{o}{e}");
    assert!(o.contains("best: learner.C="), "{o}");
    let trace = fs::read_to_string(tmp.path().join("gaussian_n-600__acc.trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "learner.C,score,failure");
    assert_eq!(trace.lines().count(), 3);
    assert_eq!(QuantReport::load(tmp.path().join("gaussian_n-600__acc.csv")).unwrap().len(), 10);
    assert_eq!(qk(&["gridsearch", "--method", "acc", "--out", &out]).0, 2);
}

#[test]
fn eval_with_multi_valued_param_searches() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    let (code, o, e) = qk(&[
        "eval", "--data", "synth:gaussian:n=400", "--method", "cc", "--param", "learner.C=0.1,10",
        "--param", "learner.class_weight=balanced", "--n-prevpoints", "3", "--repeats", "1", "--out", &out,
    ]);
    assert_eq!(code, 0, "{o}{e}");
    assert!(o.contains("best:"));
    assert!(tmp.path().join("gaussian_n-400__cc.trace.csv").is_file());
    let (code, _, _) = qk(&["eval", "--method", "cc", "--param", "bogus=1", "--out", &out]);
    assert_eq!(code, 2);
}

#[test]
fn file_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let d = quantkit::data::synth_gaussian(400, 2, 2.0, 3).unwrap();
    let dense = |c: &quantkit::LabelledCollection| {
        let mut s = String::new();
        for (x, &l) in c.instances().iter().zip(c.labels()) {
            let mut vals = vec![0.0; c.dim()];
            x.for_each_nonzero(|i, v| vals[i] = v);
            let cells: Vec<String> = vals.iter().map(|v| format!("{v}")).collect();
            s.push_str(&format!("{},{}\n", cells.join(","), c.categories()[l]));
        }
        s
    };
    let sparse = |c: &quantkit::LabelledCollection| {
        let mut s = String::new();
        for (x, &l) in c.instances().iter().zip(c.labels()) {
            s.push_str(&c.categories()[l]);
            x.for_each_nonzero(|i, v| s.push_str(&format!(" {}:{v}", i + 1)));
            s.push('\n');
        }
        s
    };
    fs::write(tmp.path().join("train.csv"), dense(&d.training)).unwrap();
    fs::write(tmp.path().join("test.csv"), dense(&d.test)).unwrap();
    fs::write(tmp.path().join("train.svm"), sparse(&d.training)).unwrap();
    fs::write(tmp.path().join("test.svm"), sparse(&d.test)).unwrap();
    let out = p(&tmp.path().join("out"));
    let common = ["--method", "acc", "--n-prevpoints", "3", "--repeats", "1", "--sample-size", "40", "--out", &out];
    for (data, test) in [("train.csv", Some("test.csv")), ("train.svm", Some("test.svm")), ("train.csv", None)] {
        let data = p(&tmp.path().join(data));
        let mut args = vec!["eval", "--data", &data];
        let test_path = test.map(|t| p(&tmp.path().join(t)));
        if let Some(t) = &test_path {
            args.extend(["--test", t.as_str()]);
        }
        args.extend(common);
        let (code, o, e) = qk(&args);
        assert_eq!(code, 0, "{o}{e}");
    }
    assert!(tmp.path().join("out/train__acc.csv").is_file());
}
