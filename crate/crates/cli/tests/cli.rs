use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riskdesign"))
}

fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn fixture(name: &str) -> String {
    tests_dir().join("fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn golden(name: &str, fixture_file: &str, mode: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let mut args = vec!["solve", "--scenario"];
    let f = fixture(fixture_file);
    args.push(&f);
    args.extend_from_slice(mode);
    args.extend_from_slice(&["--out", &out]);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let golden_dir = tests_dir().join("golden").join(name);
    for file in ["report.json", "sweep.csv"] {
        let got = fs::read_to_string(dir.path().join(file)).unwrap();
        // UPDATE_GOLDEN=1 rewrites the committed reports
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            fs::create_dir_all(&golden_dir).unwrap();
            fs::write(golden_dir.join(file), &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(golden_dir.join(file)).unwrap();
        assert_eq!(got, want, "{name}/{file} differs from golden");
    }
}

#[test]
fn golden_case_study_hidden() {
    golden("case_study", "case_study.json", &["--mode", "hidden"]);
}

#[test]
fn golden_moral_hazard_hidden() {
    golden("moral_hazard", "moral_hazard.json", &["--mode", "hidden"]);
}

#[test]
fn golden_smooth_full_info() {
    golden("smooth", "smooth.json", &[]);
}

#[test]
fn sequential_matches_parallel() {
    let f = fixture("moral_hazard.json");
    let a = run(&["solve", "--scenario", &f, "--mode", "hidden"]);
    let b = run(&["--sequential", "solve", "--scenario", &f, "--mode", "hidden"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_file_is_input_error() {
    let o = run(&["solve", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn schema_error_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("case_study.json"))
        .unwrap()
        .replace("\"p_H\": [0.5, 0.3, 0.2]", "\"p_H\": \"oops\"");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let o = run(&["solve", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("family.p_H"), "{err}");
}

#[test]
fn mu_off_simplex_is_input_error() {
    let o = run(&["imh", "--scenario", &fixture("smooth.json"), "--mu", "0.3,0.3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn infeasible_participation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("case_study.json"))
        .unwrap()
        .replace("\"U_bar\": 3.905", "\"U_bar\": 0.1")
        .replace("\"actions\": [0, 1]", "\"actions\": [1]");
    let path = dir.path().join("infeasible.json");
    fs::write(&path, text).unwrap();
    for mode in ["full-info", "hidden"] {
        let o = run(&["solve", "--scenario", path.to_str().unwrap(), "--mode", mode]);
        assert_eq!(code(&o), 3, "{mode}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn case_study_rejects_out_of_range_coverage() {
    let o = run(&["case-study", "--coverage", "1.5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn case_study_report_values() {
    let o = run(&["--json", "case-study"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bound = v["premium_bound"]["formula"].as_f64().unwrap();
    assert!((bound - 2.71875).abs() < 1e-9, "{bound}");
    assert_eq!(v["imh_before"]["imh"].as_f64(), Some(1.0));
    assert_eq!(v["imh_after"]["imh"].as_f64(), Some(0.0));
}

#[test]
fn zero_step_is_a_no_op() {
    let o = run(&["--json", "design-step", "--scenario", &fixture("smooth.json"), "--step", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["step"]["mu_next"], v["step"]["mu"]);
    assert_eq!(v["step"]["t_decreased"], false);
}

#[test]
fn design_step_without_direction_reports_it() {
    let o = run(&["--json", "design-step", "--preset", "case-study"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["step"].is_null());
    let flags = v["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f == "no beneficial direction"));
}

#[test]
fn csv_output_is_field_value() {
    let o = run(&["--csv", "evaluate", "--preset", "case-study"]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.starts_with("field,value\n"));
}

#[test]
fn linear_contract_argument_forms() {
    let a = run(&["evaluate", "--preset", "case-study", "--linear", "0.5,1"]);
    let b = run(&["evaluate", "--preset", "case-study", "--linear", "0.5", "1"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&run(&["evaluate", "--preset", "case-study", "--linear", "0.5"])), 2);
    assert_eq!(code(&run(&["evaluate", "--preset", "case-study", "--linear", "1.2,1"])), 2);
}
