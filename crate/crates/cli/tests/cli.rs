mod common;

use std::io::Write;

use common::{crate_dir, load_json, run, schema, stdout, validate};
use serde_json::{json, Value};

/// Representative invocations of every command.
const INVOCATIONS: &[&[&str]] = &[
    &["commutators"],
    &["ks-predict", "--model", "qm"],
    &["ks-predict", "--model", "nchv"],
    &["ks-predict", "--trials", "2000", "--seed", "3"],
    &["apparatus", "--stage", "1", "--input", "phi+", "--follow-up", "X1X2", "--trials", "1000"],
    &["apparatus", "--stage", "2", "--input", "1,0;0,0;0,0;0,0"],
    &["apparatus", "--stage", "2", "--input", "singlet", "--follow-up", "Z1", "--trials", "500"],
    &["counterfactual", "--scenario", "fig3"],
    &["counterfactual", "--scenario", "spin-xz", "--input", "x+"],
    &["counterfactual", "--scenario", "apparatus-retrodiction"],
    &["counterfactual", "--scenario", "apparatus-retrodiction", "--input", "1,0;1,0;0,0;0,0"],
    &["verify"],
];

fn with(args: &[&str], extra: &[&str]) -> Vec<String> {
    args.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run_owned(args: &[String]) -> std::process::Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

fn json_of(args: &[&str]) -> Value {
    let o = run_owned(&with(args, &["--format", "json", "--deterministic"]));
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(&o)).expect("JSON output")
}

#[test]
fn every_json_emission_matches_the_results_schema() {
    let s = schema("results.schema.json");
    for args in INVOCATIONS {
        let v = json_of(args);
        validate(&s, &v, "$").unwrap_or_else(|e| panic!("{args:?}: {e}"));
        assert!(v["results"]["analytic"].is_object());
    }
    let v = json_of(&["ks-predict", "--trials", "10"]);
    assert_eq!(v["results"]["sampled"]["trials"], 10);
}

#[test]
fn schema_validator_rejects_broken_emissions() {
    let s = schema("results.schema.json");
    let good = json_of(&["commutators"]);
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("paper_anchor");
    assert!(validate(&s, &missing, "$").is_err());
    let mut extra = good.clone();
    extra["results"]["bogus"] = json!(1);
    assert!(validate(&s, &extra, "$").is_err());
    let mut wrong = good;
    wrong["scenario"] = json!("unknown");
    assert!(validate(&s, &wrong, "$").is_err());
}

#[test]
fn deterministic_runs_are_byte_identical() {
    for args in INVOCATIONS {
        for format in ["text", "json", "csv"] {
            let a = with(args, &["--format", format, "--deterministic"]);
            let (x, y) = (run_owned(&a), run_owned(&a));
            assert_eq!(x.stdout, y.stdout, "{a:?}");
            assert!(x.status.success());
        }
    }
}

#[test]
fn timestamp_only_without_deterministic() {
    let o = run(&["commutators", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["timestamp"].is_u64());
    assert!(json_of(&["commutators"]).get("timestamp").is_none());
}

#[test]
fn csv_header_is_fixed() {
    for args in INVOCATIONS {
        let o = run_owned(&with(args, &["--format", "csv", "--deterministic"]));
        let out = stdout(&o);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("label,probability,count,frequency"), "{args:?}");
        assert!(lines.next().is_some(), "{args:?} emitted no rows");
    }
}

#[test]
fn csv_rows_carry_counts_and_frequencies() {
    let o = run(&["apparatus", "--stage", "2", "--trials", "10000", "--format", "csv"]);
    let out = stdout(&o);
    let bc1 = out.lines().find(|l| l.starts_with("BC1,")).unwrap();
    assert_eq!(bc1, "BC1,1,10000,1");
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["commutators"]), Some(0));
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["no-such-command"]), Some(3));
    assert_eq!(code(&["apparatus", "--stage", "3"]), Some(3));
    assert_eq!(code(&["apparatus", "--stage", "2", "--input", "nonsense"]), Some(3));
    assert_eq!(code(&["apparatus", "--stage", "2", "--input", "1,q;0;0;0"]), Some(3));
    assert_eq!(code(&["apparatus", "--stage", "2", "--input", "0,0;0,0;0,0;0,0"]), Some(1));
    assert_eq!(code(&["apparatus", "--stage", "2", "--input", "z+"]), Some(1));
    assert_eq!(code(&["apparatus", "--stage", "2", "--follow-up", "Q9"]), Some(3));
    assert_eq!(code(&["counterfactual", "--scenario", "spin-xz", "--input", "phi+"]), Some(1));
    assert_eq!(code(&[]), Some(3));
}

#[test]
fn normalization_warning_goes_to_stderr() {
    let o = run(&["apparatus", "--stage", "2", "--input", "1,0;1,0;0,0;0,0", "--deterministic"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("normalized"));
    let quiet = run(&["apparatus", "--stage", "2", "--input", "phi+"]);
    assert!(quiet.stderr.is_empty());
}

fn write_temp(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn corrupted_combiner_fails_verify() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // first row no longer normalized
    let bad = json!([[1.0, 0, 0, s], [s, 0, 0, -s], [0, s, s, 0], [0, s, -s, 0]]);
    let f = write_temp(&bad.to_string());
    let path = f.path().to_str().unwrap();
    let o = run(&["verify", "--combiner-file", path, "--deterministic"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("FAIL apparatus       combiner is unitary"), "{out}");

    let good = json!([[s, 0, 0, s], [s, 0, 0, -s], [0, s, s, 0], [[0, 0], [s, 0], [-s, 0], 0]]);
    let f = write_temp(&good.to_string());
    let o = run(&["verify", "--combiner-file", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let f = write_temp("[[1, 0], [0, 1]]");
    assert_eq!(run(&["verify", "--combiner-file", f.path().to_str().unwrap()]).status.code(), Some(1));
    let f = write_temp("not json");
    assert_eq!(run(&["verify", "--combiner-file", f.path().to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn committed_scenarios_validate_and_run() {
    let s = schema("scenario.schema.json");
    let dir = crate_dir().join("scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        validate(&s, &load_json(&path), "$").unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let o = run(&["--scenario-file", path.to_str().unwrap(), "--format", "json", "--deterministic"]);
        assert!(o.status.success(), "{}", path.display());
        validate(&schema("results.schema.json"), &serde_json::from_str(&stdout(&o)).unwrap(), "$")
            .unwrap();
        n += 1;
    }
    assert_eq!(n, 7);
}

#[test]
fn scenario_schema_rejects_what_the_cli_rejects() {
    let s = schema("scenario.schema.json");
    for bad in [
        json!({"name": "nope"}),
        json!({"name": "apparatus", "parameters": {}}),
        json!({"name": "apparatus", "parameters": {"stage": 3}}),
        json!({"name": "commutators", "parameters": {"x": 1}}),
        json!({"name": "counterfactual", "parameters": {"scenario": "other"}}),
    ] {
        assert!(validate(&s, &bad, "$").is_err(), "{bad}");
        let f = write_temp(&bad.to_string());
        let code = run(&["--scenario-file", f.path().to_str().unwrap()]).status.code();
        assert_eq!(code, Some(1), "{bad}");
    }
    let f = write_temp("{ broken");
    assert_eq!(run(&["--scenario-file", f.path().to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn scenario_file_matches_equivalent_flags() {
    let path = crate_dir().join("scenarios/apparatus-stage2.json");
    let from_file = run(&["--scenario-file", path.to_str().unwrap(), "--format", "json", "--deterministic"]);
    let from_flags = run(&[
        "apparatus", "--stage", "2", "--input", "phi+", "--follow-up", "X1X2", "--trials", "10000",
        "--seed", "0", "--format", "json", "--deterministic",
    ]);
    assert_eq!(from_file.stdout, from_flags.stdout);
}

#[test]
fn echoed_parameters_round_trip_through_a_scenario_file() {
    let cases: &[(&str, &[&str])] = &[
        ("ks-predict", &["ks-predict", "--model", "both", "--trials", "300", "--seed", "9"]),
        ("apparatus", &["apparatus", "--stage", "1", "--follow-up", "X1X2", "--trials", "200"]),
        ("counterfactual", &["counterfactual", "--scenario", "apparatus-retrodiction"]),
        ("verify", &["verify"]),
    ];
    for (name, args) in cases {
        let first = json_of(args);
        let spec = json!({ "name": name, "parameters": first["parameters"].clone() });
        validate(&schema("scenario.schema.json"), &spec, "$").unwrap();
        let f = write_temp(&spec.to_string());
        let again = json_of(&["--scenario-file", f.path().to_str().unwrap()]);
        assert_eq!(first, again, "{name}");
    }
}

#[test]
fn subcommand_and_scenario_file_are_exclusive() {
    let path = crate_dir().join("scenarios/commutators.json");
    let o = run(&["commutators", "--scenario-file", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn text_reports_show_the_key_verdicts() {
    let o = stdout(&run(&["commutators", "--deterministic"]));
    assert!(o.contains("[Z1Z2,X1X2]") && o.contains("[Z1,X1]              4.000000  do not commute"));
    let o = stdout(&run(&["ks-predict", "--deterministic"]));
    assert!(o.contains("disjoint: true"));
    let o = stdout(&run(&["counterfactual", "--scenario", "fig3", "--deterministic"]));
    assert!(o.contains("t2 [recorded +1: Possible 0.500000]"));
    assert!(o.contains("forced equal to the modified outcome in every branch: t2"));
}
