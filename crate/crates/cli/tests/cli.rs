use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HEADER: &str = "iter,epoch,f_at_mean,L_estimate,grad_norm,step_norm,trace_sigma,samples_used,wallclock_ns";

fn van(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_van"))
        .current_dir(dir)
        .env_remove("VAN_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn field(summary: &str, key: &str) -> String {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {summary}"))
        .to_string()
}

#[test]
fn newton_on_quadratic_is_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(dir.path(), &["run", "--problem", "quadratic", "--method", "newton"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 2);
    assert_eq!(field(&stdout(&out), "iters"), "1");
    assert_eq!(field(&stdout(&out), "f_at_mean").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |t: &'static str| {
        vec!["run", "--problem", "logistic", "--n", "120", "--dim", "3", "--method", "van", "--samples", "4", "--batch-size", "16", "--max-iters", "40", "--seed", "5", "--trace", t]
    };
    van(dir.path(), &args("a.csv"));
    van(dir.path(), &args("b.csv"));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert!(a.len() > HEADER.len() + 40);
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn budget_exhaustion_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(dir.path(), &["run", "--problem", "sinc", "--method", "van", "--mu0", "-3.2", "--sigma0", "1.5", "--max-iters", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_csv(&dir.path().join("trace.csv")).len(), 6);
    assert_eq!(field(&stdout(&out), "stop"), "max_iters");
}

#[test]
fn newton_from_minus_three_point_two_reports_local_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(dir.path(), &["run", "--problem", "sinc", "--method", "newton", "--mu0", "-3.2"]);
    assert_eq!(out.status.code(), Some(0));
    let mean: f64 = field(&stdout(&out), "mean").parse().unwrap();
    assert!((mean + 3.470889).abs() < 1e-5, "{mean}");
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--problem", "lasso", "--method", "newton"],
        vec!["run", "--problem", "lasso", "--data", "missing.svm"],
        vec!["run", "--no-such-flag", "1"],
        vec!["run", "--method", "sgd"],
        vec!["run", "--config", "absent.conf"],
        vec!["frobnicate"],
    ] {
        let out = van(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), "# sinc demo\nproblem = sinc\nmethod = van-d  # mean field\nstep = 0.2\nseed = 4\n").unwrap();
    let out = van(dir.path(), &["run", "--config", "run.conf", "--step", "0.3", "--dump-config"]);
    assert_eq!(out.status.code(), Some(0));
    let dumped = stdout(&out);
    for line in ["problem = sinc", "method = van-d", "step = 0.3", "seed = 4", "estimator = mc"] {
        assert!(dumped.lines().any(|l| l == line), "{line} missing from\n{dumped}");
    }
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn dumped_config_reproduces_itself() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&van(dir.path(), &["run", "--problem", "lasso", "--schedule", "decay", "--mu0", "0.5", "--batch-size", "20", "--dump-config"]));
    fs::write(dir.path().join("dumped.conf"), &first).unwrap();
    let second = stdout(&van(dir.path(), &["run", "--config", "dumped.conf", "--dump-config"]));
    assert_eq!(first, second);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let dump = |extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_van"))
            .current_dir(dir.path())
            .env("VAN_SEED", "77")
            .args(["run", "--dump-config"])
            .args(extra)
            .output()
            .unwrap();
        stdout(&out)
    };
    assert!(dump(&[]).lines().any(|l| l == "seed = 77"));
    assert!(dump(&["--seed", "2"]).lines().any(|l| l == "seed = 2"));
}

#[test]
fn reads_libsvm_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for i in 0..40 {
        let y = if i % 2 == 0 { 1 } else { -1 };
        text += &format!("{y} 1:{} 2:{}\n", y as f64 * 1.5 + (i % 7) as f64 * 0.1, (i % 5) as f64 * 0.2);
    }
    fs::write(dir.path().join("toy.svm"), text).unwrap();
    let out = van(dir.path(), &["run", "--problem", "logistic", "--data", "toy.svm", "--method", "newton", "--standardize", "true"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(field(&stdout(&out), "test_loss").parse::<f64>().unwrap() < 0.2);
}

#[test]
fn active_learning_writes_a_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(dir.path(), &["run", "--problem", "active-logistic", "--n", "200", "--dim", "3", "--rounds", "4", "--acquire", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("trace.csv"));
    assert_eq!(rows[0], ["round", "examples_seen", "test_loss"]);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5][1], "20");
}

#[test]
fn compare_van_and_newton_on_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(
        dir.path(),
        &["compare", "--problem", "quadratic", "--methods", "van,newton", "--estimator", "exact", "--step", "1", "--sigma0", "1e6", "--out-dir", "cmp"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("cmp/summary.csv"));
    assert_eq!(rows[0][..6], ["method", "seed", "status", "iters", "stop", "final_f_at_mean"]);
    assert_eq!(rows.len(), 3);
    for (row, method) in rows[1..].iter().zip(["van", "newton"]) {
        assert_eq!(row[0], method);
        assert_eq!(row[2], "ok");
        assert!(row[5].parse::<f64>().unwrap() < 1e-8, "{row:?}");
    }
    assert!(dir.path().join("cmp/van-seed0.csv").exists());
    assert!(dir.path().join("cmp/newton-seed0.csv").exists());
}

#[test]
fn compare_stochastic_van_and_adagrad_against_newton() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--problem", "logistic", "--n", "400", "--reg", "1"];
    let newton = van(dir.path(), &[&["run", "--method", "newton"][..], &common].concat());
    let reference: f64 = field(&stdout(&newton), "test_loss").parse().unwrap();
    let out = van(
        dir.path(),
        &[
            &["compare", "--methods", "van,adagrad", "--seeds", "0,1,2,3,4", "--batch-size", "10", "--step", "0.1"][..],
            &["--estimator", "quadrature", "--max-iters", "280", "--out-dir", "cmp"],
            &common,
        ]
        .concat(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("cmp/summary.csv"));
    assert_eq!(rows.len(), 11);
    for row in &rows[1..] {
        let loss: f64 = row[6].parse().unwrap();
        assert!((loss - reference).abs() < 0.05, "{row:?} vs {reference}");
    }
}

#[test]
fn compare_records_failures_and_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(dir.path(), &["compare", "--problem", "lasso", "--methods", "van,newton", "--max-iters", "20", "--out-dir", "cmp"]);
    assert_eq!(out.status.code(), Some(3));
    let text = fs::read_to_string(dir.path().join("cmp/summary.csv")).unwrap();
    let mut rows = text.lines().skip(1);
    assert!(rows.next().unwrap().starts_with("van,0,ok,20,"));
    let failed = rows.next().unwrap();
    assert!(failed.starts_with("newton,0,error,"));
    assert!(failed.contains("smooth"));
}

#[test]
fn compare_needs_two_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = van(dir.path(), &["compare", "--methods", "van", "--out-dir", "cmp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plot_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (fixture("van.csv"), fixture("vsgd.csv"));
    let out = van(dir.path(), &["plot", a.to_str().unwrap(), b.to_str().unwrap(), "--log-y", "--out", "p.svg"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("p.svg")).unwrap(), fs::read_to_string(fixture("plot_golden.svg")).unwrap());
}

#[test]
fn plot_single_trace_and_legend_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = fixture("van.csv");
    let b = fixture("vsgd.csv");
    van(dir.path(), &["plot", a.to_str().unwrap(), "--out", "one.svg"]);
    let one = fs::read_to_string(dir.path().join("one.svg")).unwrap();
    assert_eq!(one.matches("<polyline").count(), 1);
    assert!(one.contains(">iter</text>") && one.contains(">f_at_mean</text>"));

    van(dir.path(), &["plot", b.to_str().unwrap(), a.to_str().unwrap(), "--column", "grad_norm", "--column", "step_norm", "--out", "two.svg"]);
    let two = fs::read_to_string(dir.path().join("two.svg")).unwrap();
    assert_eq!(two.matches("<polyline").count(), 4);
    let order: Vec<usize> = ["vsgd grad_norm", "vsgd step_norm", "van grad_norm", "van step_norm"]
        .iter()
        .map(|l| two.find(&format!(">{l}<")).unwrap())
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn plot_rejects_mixed_schemas_and_unknown_columns() {
    let dir = tempfile::tempdir().unwrap();
    let a = fixture("van.csv");
    let c = fixture("curve.csv");
    let out = van(dir.path(), &["plot", a.to_str().unwrap(), c.to_str().unwrap(), "--out", "x.svg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
    let out = van(dir.path(), &["plot", a.to_str().unwrap(), "--column", "nope", "--out", "x.svg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("x.svg").exists());
}
