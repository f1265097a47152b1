use std::fs;
use std::process::Command;

use binorbit::numfmt::estimator_cell;
use binorbit::run_with_io;
use binorbit_core::blocks::decompose_stream;
use binorbit_core::digits::DigitStream;
use binorbit_core::estimators::Estimators;
use binorbit_core::orbit::Exponent;
use binorbit_core::streamspec::parse_spec;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("binorbit").chain(args.iter().copied());
    let code = run_with_io(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn generate_champernowne_digits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("digits.txt");
    let (code, _, err) =
        run(&["generate", "--spec", "champernowne", "--digits", "64", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&path).unwrap();
    let bits = text.trim();
    assert_eq!(bits.len(), 64);
    assert!(bits.starts_with("11011100"));
}

#[test]
fn analyze_csv_shape_and_estimators() {
    let (code, out, err) = run(&["analyze", "--spec", "rational:1/3", "--p", "2", "--n-max", "1000"]);
    assert_eq!(code, 0, "{err}");
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, binorbit::output::CSV_COLUMNS);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert!(records.len() > 20);

    let mut stream = DigitStream::new(parse_spec("rational:1/3").unwrap()).unwrap();
    let d = decompose_stream(&mut stream, 1000).unwrap();
    let est = Estimators::new(&d, Exponent::integer(2));
    let mut prev = 0u64;
    for rec in &records {
        assert_eq!(rec.len(), 14);
        let n: u64 = rec[0].parse().unwrap();
        assert!(n > prev);
        prev = n;
        assert_eq!(&rec[10], estimator_cell(&est.phi(n).unwrap()));
        assert_eq!(&rec[11], estimator_cell(&est.psi(n).unwrap()));
        assert_eq!(&rec[12], estimator_cell(&est.upsilon(n).unwrap()));
        assert_eq!(&rec[13], estimator_cell(&est.lambda(n).unwrap()));
        assert!(!rec[6].is_empty() && !rec[7].is_empty());
    }
    assert_eq!(prev, 1000);
    // S_2(2) = 45/4 for 1/3.
    let second = &records[1];
    assert_eq!((&second[4], &second[5], &second[8], &second[9]), ("11.25", "11.25", "5.625", "5.625"));
}

#[test]
fn analyze_large_values_use_log_columns() {
    let (code, out, err) =
        run(&["analyze", "--spec", "blocks:l=j!;m=1", "--p", "2", "--n-max", "200", "--schedule", "blocks"]);
    assert_eq!(code, 0, "{err}");
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let last = reader.records().map(Result::unwrap).last().unwrap();
    assert_eq!(&last[4], "");
    let log2: f64 = last[6].parse().unwrap();
    assert!(log2 > 200.0);
}

#[test]
fn analyze_json_format() {
    let (code, out, _) = run(&[
        "analyze",
        "--spec",
        "rational:1/5",
        "--p",
        "1",
        "--n-max",
        "4",
        "--schedule",
        "all",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["rows"][3]["S_lo"], "10.4166666666666666");
    assert_eq!(v["rows"][3]["S_hi"], "10.4166666666666667");
}

#[test]
fn verify_exit_codes() {
    let (code, out, _) = run(&["verify", "--spec", "blocks:cycle=[(1,1)]", "--p", "2", "--n-max", "20000"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 6);
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 6);

    let (code, out, _) =
        run(&["verify", "--spec", "blocks:cycle=[(1,1)]", "--p", "2", "--n-max", "10000", "--checks", "divergence"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["checks"][0]["pass"], false);
    assert!(v["checks"][0]["worst_margin"].as_f64().unwrap() <= 0.0);

    let (code, _, err) = run(&["verify", "--spec", "rational:1/4", "--p", "2", "--n-max", "10"]);
    assert_eq!(code, 2);
    assert!(err.contains("BinaryRationalDenominator"), "{err}");

    let (code, _, err) = run(&["verify", "--spec", "rational:1/", "--p", "2", "--n-max", "10", "--error-json"]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "spec");
    assert_eq!(v["error"]["exit_code"], 2);

    assert_eq!(run(&["verify", "--spec", "champernowne", "--p", "2"]).0, 2);
    assert_eq!(run(&["verify", "--spec", "champernowne", "--p", "0", "--n-max", "5"]).0, 2);
    assert_eq!(run(&["verify", "--spec", "champernowne", "--p", "2", "--n-max", "5", "--epsilon", "0.001"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn boundedness_with_explicit_bound() {
    let args = ["verify", "--spec", "blocks:cycle=[(1,1)]", "--p", "2", "--n-max", "5000", "--checks", "boundedness"];
    let (code, out, _) = run(&[&args[..], &["--bound", "9"]].concat());
    assert_eq!(code, 0, "{out}");
    let (code, _, _) = run(&[&args[..], &["--bound", "17/2"]].concat());
    assert_eq!(code, 1);
}

#[test]
fn smaller_epsilon_keeps_passing() {
    for eps in ["2^-20", "2^-40", "2^-60"] {
        let (code, out, _) =
            run(&["verify", "--spec", "champernowne", "--p", "3/2", "--n-max", "3000", "--epsilon", eps]);
        assert_eq!(code, 0, "{eps}: {out}");
    }
}

#[test]
fn verify_is_deterministic() {
    let args = ["verify", "--spec", "random:seed=9", "--p", "3/2", "--n-max", "5000"];
    assert_eq!(run(&args).1, run(&args).1);
}

#[test]
fn verify_csv_format() {
    let (code, out, _) = run(&["verify", "--spec", "rational:1/5", "--p", "2", "--n-max", "10000", "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("spec,p,name,"));
}

#[test]
fn raw_digit_files() {
    let dir = tempfile::tempdir().unwrap();
    let digits = dir.path().join("x.txt");
    let spec = format!("digits:file={}", digits.display());
    let (code, _, _) =
        run(&["generate", "--spec", "champernowne", "--digits", "3000", "--out", digits.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, raw, err) = run(&["analyze", "--spec", &spec, "--p", "2", "--n-max", "1000"]);
    assert_eq!(code, 0, "{err}");
    let (_, direct, _) = run(&["analyze", "--spec", "champernowne", "--p", "2", "--n-max", "1000"]);
    assert_eq!(raw, direct);

    let (code, _, err) = run(&["analyze", "--spec", &spec, "--p", "2", "--n-max", "5000"]);
    assert_eq!(code, 2);
    assert!(err.contains("only 3000"), "{err}");

    fs::write(&digits, "0101x").unwrap();
    assert_eq!(run(&["analyze", "--spec", &spec, "--p", "2", "--n-max", "2"]).0, 2);
    let missing = format!("digits:file={}", dir.path().join("none.txt").display());
    assert_eq!(run(&["analyze", "--spec", &missing, "--p", "2", "--n-max", "2"]).0, 2);
}

#[test]
fn normality_report() {
    let (code, out, err) = run(&["normality", "--spec", "blocks:l=j;m=j", "--n-max", "10100"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["complete_blocks"], 100);
    assert_eq!(v["diagnostics"]["ratio_lm"], "1");
    assert_eq!(v["diagnostics"]["ratio_l"], "2/99");
    let counts = v["pattern_counts"].as_object().unwrap();
    assert_eq!(counts.len(), 4);
    assert_eq!(counts.values().map(|c| c.as_u64().unwrap()).sum::<u64>(), 10100);

    let (code, out, _) =
        run(&["normality", "--spec", "blocks:cycle=[(1,1)]", "--n-max", "1000", "--pattern-length", "3"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pattern_counts"]["010"], 500);
    assert_eq!(v["pattern_counts"]["000"], 0);
    assert_eq!(run(&["normality", "--spec", "champernowne", "--n-max", "100", "--pattern-length", "0"]).0, 2);
}

#[test]
fn sweep_over_specs_and_exponents() {
    let (code, out, err) = run(&[
        "sweep",
        "--spec",
        "blocks:cycle=[(2,3)]",
        "--spec",
        "rational:1/7",
        "--p-list",
        "1,2,3/2",
        "--n-max",
        "3000",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 6);
    assert_eq!(v["runs"][5]["p"], "3/2");

    let (code, out, _) = run(&[
        "sweep",
        "--spec",
        "champernowne",
        "--spec",
        "blocks:cycle=[(1,1)]",
        "--p-list",
        "2",
        "--n-max",
        "1000",
        "--checks",
        "divergence",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_binorbit");
    let ok = Command::new(bin).args(["generate", "--spec", "rational:1/3", "--digits", "8"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim(), "01010101");
    let bad = Command::new(bin).args(["generate", "--spec", "rational:3/2", "--digits", "8"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let fail = Command::new(bin)
        .args(["verify", "--spec", "blocks:cycle=[(1,1)]", "--p", "2", "--n-max", "1000", "--checks", "divergence"])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));
}
