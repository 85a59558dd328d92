use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pdikit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdikit")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a summary CSV, skipping the provenance comment and header.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let input = dir.join("ll.csv");
    let (a, b, c) = (0.2f64.ln(), 0.4f64.ln(), 0.5f64.ln());
    fs::write(&input, format!("p1,p2\n{a},{c}\n{b},{c}\n")).unwrap();
    input
}

#[test]
fn compute_on_the_two_point_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let out = dir.path().join("out");
    let run = pdikit(&["compute", "--input", path(&input), "--out", path(&out), "--seed", "3"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(text.starts_with("# pdikit "));
    assert!(text.lines().next().unwrap().ends_with("seed=3"));
    let r = rows(&text);
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][0], "p1");
    let wapdi: f64 = r[0][5].parse().unwrap();
    assert!((wapdi - -0.199529).abs() < 1e-6, "{wapdi}");
    assert_eq!(r[1][5].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn compute_accepts_a_trailing_blank_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ll.csv");
    fs::write(&input, "a\n-1.0\n-2.0\n\n").unwrap();
    let run = pdikit(&["compute", "--input", path(&input), "--out", path(&dir.path().join("o"))]);
    assert!(run.status.success(), "{}", stderr(&run));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let run = pdikit(&["compute", "--input", path(&input), "--out", path(&out), "--format", "csv,ndjson,svg"]);
        assert!(run.status.success(), "{}", stderr(&run));
        outputs.push(["summary.csv", "summary.ndjson", "wapdi.svg"].map(|f| fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let fits: Vec<Vec<u8>> = ["f1", "f2"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let run = pdikit(&["fit", "--model", "gamma-toy", "--seed", "5", "--out", path(&out)]);
            assert!(run.status.success(), "{}", stderr(&run));
            fs::read(out.join("summary.csv")).unwrap()
        })
        .collect();
    assert_eq!(fits[0], fits[1]);
}

#[test]
fn presidents_fit_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit");
    let run = pdikit(&[
        "fit",
        "--model",
        "presidents-nb2",
        "--seed",
        "1",
        "--warmup",
        "1000",
        "--thin",
        "1",
        "--draws",
        "300",
        "--out",
        path(&out),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary = out.join("summary.csv");
    assert_eq!(rows(&fs::read_to_string(&summary).unwrap()).len(), 43);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 1);
    assert_eq!(meta["draws"], 300);

    let report = pdikit(&["report", "--input", path(&summary), "--top-k", "5"]);
    assert!(report.status.success(), "{}", stderr(&report));
    assert_eq!(rows(&String::from_utf8(report.stdout).unwrap()).len(), 5);
}

#[test]
fn fit_can_dump_simulated_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit");
    let run = pdikit(&["fit", "--model", "gamma-toy", "--synthetic-n", "12", "--dump-data", "--out", path(&out)]);
    assert!(run.status.success(), "{}", stderr(&run));
    let data = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(rows(&data).len(), 12);

    // refitting on the dumped data reproduces the summary
    let again = dir.path().join("again");
    let run = pdikit(&["fit", "--model", "gamma-toy", "--data", path(&out.join("data.csv")), "--out", path(&again)]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), fs::read(again.join("summary.csv")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let run = pdikit(&["compute", "--out", "x"]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).starts_with("pdikit: error:"), "{}", stderr(&run));
    let run = pdikit(&["fit", "--model", "gamma-toy", "--warmup", "10", "--out", "x"]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).starts_with("pdikit: error:"));
    let run = pdikit(&["frobnicate"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn input_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let run = pdikit(&["compute", "--input", path(&dir.path().join("missing.csv")), "--out", path(dir.path())]);
    assert_eq!(run.status.code(), Some(3));
    assert!(stderr(&run).starts_with("pdikit: error:"));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "a,b\n-1,-2\n-1\n").unwrap();
    let run = pdikit(&["compute", "--input", path(&ragged), "--out", path(&dir.path().join("o"))]);
    assert_eq!(run.status.code(), Some(3), "{}", stderr(&run));
}

#[test]
fn non_finite_input_exits_4_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("nan.csv");
    fs::write(&input, "a,b\n-1,-2\n-1,NaN\n").unwrap();
    let run = pdikit(&["compute", "--input", path(&input), "--out", path(&dir.path().join("o"))]);
    assert_eq!(run.status.code(), Some(4));
    let msg = stderr(&run);
    assert!(msg.starts_with("pdikit: error:"));
    assert!(msg.contains("line 3") && msg.contains("column 2"), "{msg}");
}
