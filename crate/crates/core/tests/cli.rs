use assert_cmd::Command;
use serde_json::Value;

fn blowup() -> Command {
    Command::cargo_bin("blowup").unwrap()
}

fn stdout_of(args: &[&str]) -> String {
    let out = blowup().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn schema() -> jsonschema::JSONSchema {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/schema/output.schema.json"
    ))
    .unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    jsonschema::JSONSchema::compile(&value).unwrap()
}

#[test]
fn constants_table_values() {
    let (h, rows) = csv_rows(&stdout_of(&["constants", "--p", "7"]));
    let r = &rows[0];
    let get = |k: &str| r[col(&h, k)].parse::<f64>().unwrap();
    assert_eq!(r[col(&h, "b_inf")], "0.7782717162");
    assert!((get("b_inf") - 0.778271716).abs() < 1e-8);
    assert!((get("ratio_c") - 2.5005).abs() < 5e-4);
    assert!((get("ratio_b") - 0.6324).abs() < 5e-4);
}

#[test]
fn usage_errors_exit_with_two() {
    blowup().args(["constants", "--p", "4"]).assert().code(2);
    blowup().args(["constants", "--p", "5"]).assert().code(2);
    blowup().args(["spectrum", "--n-max", "x"]).assert().code(2);
    blowup().args(["bogus"]).assert().code(2);
    blowup()
        .args(["constants", "--format", "xml"])
        .assert()
        .code(2);
    blowup()
        .args(["solve", "--n", "1", "--rho-mid", "1.5"])
        .assert()
        .code(2);
    blowup()
        .args(["solve", "--n", "1", "--rtol", "1e-3"])
        .assert()
        .code(2);
}

#[test]
fn spectrum_csv_layout_and_values() {
    let text = stdout_of(&["spectrum", "--n-max", "6"]);
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let (h, rows) = csv_rows(&text);
    assert_eq!(h.join(","), "n,c_n,b_n,delta_c,delta_b,mismatch,zeros");
    assert_eq!(rows.len(), 7);
    let five = &rows[4];
    assert_eq!(five[0], "5");
    let c: f64 = five[1].parse().unwrap();
    let b: f64 = five[2].parse().unwrap();
    assert!((c / 88.26661166 - 1.0).abs() < 1e-5);
    assert!((b - 0.766263419).abs() < 1e-6);
    for (i, r) in rows[..6].iter().enumerate() {
        assert_eq!(r[6], (i + 2).to_string());
    }
    let last = &rows[6];
    assert_eq!(last[0], "inf");
    assert_eq!(last[2], "0.7782717162");
}

#[test]
fn output_is_deterministic_and_thread_independent() {
    let a = stdout_of(&["spectrum", "--n-max", "8"]);
    let b = stdout_of(&["spectrum", "--n-max", "8"]);
    assert_eq!(a, b);
    let out = blowup()
        .env("BLOWUP_THREADS", "1")
        .args(["spectrum", "--n-max", "8"])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), a);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    blowup()
        .args(["spectrum", "--n-max", "3", "--out"])
        .arg(&path)
        .assert()
        .success()
        .stdout("");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, stdout_of(&["spectrum", "--n-max", "3"]));
}

#[test]
fn constant_profile_has_one_zero_at_inverse_sqrt_two() {
    let (h, rows) = csv_rows(&stdout_of(&["profile", "--n", "0", "--samples", "400"]));
    assert_eq!(h.join(","), "rho,u,du,w,Theta,H,Q");
    let (ir, iw) = (col(&h, "rho"), col(&h, "w"));
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[ir].parse().unwrap(), r[iw].parse().unwrap()))
        .collect();
    let crossings: Vec<f64> = pts
        .windows(2)
        .filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0))
        .map(|w| w[0].0 - w[0].1 * (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
        .collect();
    assert_eq!(crossings.len(), 1);
    assert!((crossings[0] - 0.5f64.sqrt()).abs() < 1e-3);

    let v: Value =
        serde_json::from_str(&stdout_of(&["profile", "--n", "0", "--format", "json"])).unwrap();
    let z = v["result"]["zeros"].as_array().unwrap();
    assert_eq!(z.len(), 1);
    assert!((z[0].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn profile_of_first_solution_counts_two_zeros() {
    let v: Value = serde_json::from_str(&stdout_of(&[
        "profile",
        "--n",
        "1",
        "--samples",
        "50",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(v["result"]["zeros"].as_array().unwrap().len(), 2);
    let samples = v["result"]["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 50);
    assert_eq!(samples[49]["rho"].as_f64().unwrap(), 1.0);
}

#[test]
fn curves_tail_approaches_singular_point() {
    let text = stdout_of(&[
        "curves",
        "--rho-mid",
        "0.1",
        "--c-max",
        "1e8",
        "--c-samples",
        "50",
        "--b-samples",
        "10",
    ]);
    let (h, rows) = csv_rows(&text);
    assert_eq!(h.join(","), "side,param,u_mid,du_mid");
    let c0: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "C0").collect();
    assert_eq!(c0.len(), 50);
    assert_eq!(rows.iter().filter(|r| r[0] == "C1").count(), 10);
    let tail = c0.last().unwrap();
    let (u, du): (f64, f64) = (tail[2].parse().unwrap(), tail[3].parse().unwrap());
    assert!(
        (u - 1.6767356).abs() < 1e-3 && (du + 5.589119).abs() < 1e-2,
        "{u} {du}"
    );

    let v: Value = serde_json::from_str(&stdout_of(&[
        "curves",
        "--rho-mid",
        "0.1",
        "--c-samples",
        "2",
        "--b-samples",
        "2",
        "--format",
        "json",
    ]))
    .unwrap();
    let lp = v["result"]["limit_point"].as_array().unwrap();
    assert!((lp[0].as_f64().unwrap() - 1.6767355837).abs() < 1e-9);
    assert!((lp[1].as_f64().unwrap() + 5.5891186124).abs() < 1e-8);
}

#[test]
fn check_passes_by_default() {
    let out = blowup()
        .args(["check", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["all_passed"], Value::Bool(true));
    let checks = v["result"]["checks"].as_array().unwrap();
    let disc = checks.iter().find(|c| c["name"] == "discriminant").unwrap();
    assert!((disc["value"].as_f64().unwrap() + 11.97805).abs() < 1e-5);
    assert!(checks
        .iter()
        .any(|c| c["name"] == "q_first_integral_p5" && c["passed"] == Value::Bool(true)));
}

#[test]
fn extend_stays_positive_and_decreasing() {
    let (h, rows) = csv_rows(&stdout_of(&["extend", "--n", "1", "--rho-max", "100"]));
    assert_eq!(h.join(","), "rho,u,du,f");
    let u: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(u.iter().all(|&x| x > 0.0 && x < 0.8735804647));
    assert!(u.windows(2).all(|w| w[1] < w[0]));
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() > 0.0));
    assert_eq!(rows.last().unwrap()[0], "100");
}

#[test]
fn json_outputs_match_schema() {
    let schema = schema();
    let cases: &[&[&str]] = &[
        &["constants"],
        &["solve", "--n", "2"],
        &["spectrum", "--n-max", "4"],
        &["profile", "--n", "2", "--samples", "20"],
        &["curves", "--c-samples", "10", "--b-samples", "5"],
        &["limit", "--x-max", "1e12"],
        &["extend", "--n", "1", "--rho-max", "5"],
        &["check", "--n-max", "3"],
    ];
    for args in cases {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--format", "json"]);
        let out = blowup().args(&full).output().unwrap();
        let v: Value =
            serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        if let Err(errors) = schema.validate(&v) {
            let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
            panic!("{args:?} violates the schema: {msgs:?}");
        }
        assert_eq!(v["command"], args[0]);
    }
}

#[test]
fn schema_rejects_malformed_envelopes() {
    let schema = schema();
    let bad =
        serde_json::json!({ "command": "constants", "status": "ok", "params": {}, "result": {} });
    assert!(!schema.is_valid(&bad));
    let bad = serde_json::json!({ "command": "nope", "status": "ok", "params": {}, "result": {} });
    assert!(!schema.is_valid(&bad));
}
