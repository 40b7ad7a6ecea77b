//! End-to-end runs of the `timeorder` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_timeorder"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("TIMEORDER_DATA_DIR").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

fn stderr_record(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("JSON error record on stderr")
}

/// Subset of JSON Schema used by the published schemas: type, const,
/// required, properties, items, anyOf, pattern (anchored hex only) and local
/// $ref.
fn validate(schema: &Value, root: &Value, v: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").ok_or(format!("unsupported ref {r}"))?;
        return validate(&root["$defs"][name], root, v, path);
    }
    if let Some(c) = schema.get("const") {
        if c != v {
            return Err(format!("{path}: expected {c}, got {v}"));
        }
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => return Err("bad type".into()),
        };
        let ok = types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{path}: {v} is not of type {t}"));
        }
    }
    if let Some(p) = schema.get("pattern").and_then(Value::as_str) {
        assert_eq!(p, "^[0-9a-f]{64}$", "validator only knows the hash pattern");
        let s = v.as_str().unwrap_or_default();
        if s.len() != 64 || !s.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()) {
            return Err(format!("{path}: {s} is not a hex digest"));
        }
    }
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        for k in req.iter().filter_map(Value::as_str) {
            if v.get(k).is_none() {
                return Err(format!("{path}: missing {k}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        for (k, s) in props {
            if let Some(x) = v.get(k) {
                validate(s, root, x, &format!("{path}.{k}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            validate(items, root, x, &format!("{path}[{i}]"))?;
        }
    }
    if let Some(any) = schema.get("anyOf").and_then(Value::as_array) {
        if !any.iter().any(|s| validate(s, root, v, path).is_ok()) {
            return Err(format!("{path}: matches no alternative"));
        }
    }
    Ok(())
}

fn metrics_schema() -> Value {
    serde_json::from_str(&std::fs::read_to_string(repo_file("docs/schemas/metrics.schema.json")).unwrap()).unwrap()
}

#[test]
fn jsa_table1_normalisation_determinism_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/table1.json");
    let cfg = cfg.to_str().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let o = run(&["jsa", "--config", cfg, "--grid", "101", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(&out1).unwrap();
    assert_eq!(a, std::fs::read(&out2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "d_omega_a,d_omega_b,j1_norm,j3_norm,k3_norm");
    let mut peak = 0.0f64;
    let mut rows = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v.iter().all(|x| x.is_finite()));
        peak = peak.max(v[2].abs());
        rows += 1;
    }
    assert_eq!(rows, 101 * 101);
    assert!((peak - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
    let m1 = std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap();
    let m2 = std::fs::read_to_string(dir.path().join("b.csv.meta.json")).unwrap();
    let (m1, m2): (Value, Value) = (serde_json::from_str(&m1).unwrap(), serde_json::from_str(&m2).unwrap());
    assert_eq!(m1["config_hash"], m2["config_hash"]);
    assert_eq!(m1["data_sha256"], m2["data_sha256"]);
    let v = run(&["verify", out1.to_str().unwrap()]);
    assert!(stdout_json(&v)["verified"].as_bool().unwrap());
    std::fs::write(&out1, text.replacen("e0", "e1", 1)).unwrap();
    assert_eq!(run(&["verify", out1.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn jsa_vanishes_without_group_velocity_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flat.json",
        r#"{"gaussian": {"tau": 1.0, "s_a": 1.5, "s_b": 1.5, "s_p": 0.7, "epsilon": 0.3}, "grid": {"points": 41, "span_sigmas": 4}}"#,
    );
    let o = run(&["jsa", "--config", &cfg, "--format", "json"]);
    let doc = stdout_json(&o);
    for col in ["j3_norm", "k3_norm"] {
        let max = doc["data"][col].as_array().unwrap().iter().map(|x| x.as_f64().unwrap().abs()).fold(0.0, f64::max);
        assert!(max < 1e-12, "{col}: {max}");
    }
}

#[test]
fn metrics_reports_validate() {
    let schema = metrics_schema();
    let dir = tempfile::tempdir().unwrap();
    let separable = write_config(
        dir.path(),
        "sep.json",
        r#"{"gaussian": {"tau": 1.0, "s_a": 1.0, "s_b": 3.0, "s_p": 2.0, "epsilon": 0.2}, "grid": {"points": 121, "span_sigmas": 6}}"#,
    );
    let flat = write_config(
        dir.path(),
        "flat.json",
        r#"{"gaussian": {"tau": 1.0, "s_a": 1.5, "s_b": 1.5, "s_p": 0.7, "epsilon": 0.2}, "grid": {"points": 41, "span_sigmas": 4}}"#,
    );
    let table1 = repo_file("configs/table1.json");
    for cfg in [separable.as_str(), flat.as_str(), table1.to_str().unwrap()] {
        let doc = stdout_json(&run(&["metrics", "--config", cfg, "--grid", "101"]));
        validate(&schema, &schema, &doc, "$").unwrap_or_else(|e| panic!("{cfg}: {e}"));
    }
    let doc = stdout_json(&run(&["metrics", "--config", &separable]));
    assert_eq!(doc["schmidt_analytic"]["value"].as_f64(), Some(1.0));
    assert!((doc["schmidt_numeric"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((doc["tau2_over_r2"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let doc = stdout_json(&run(&["metrics", "--config", &flat]));
    assert_eq!(doc["schmidt_analytic"]["divergent"], Value::Bool(true));
    assert_eq!(doc["schmidt_numeric"]["error"]["kind"], "grid_too_narrow");
    let csv = run(&["metrics", "--config", &flat, "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(2));
}

#[test]
fn fc_targets() {
    let cfg = repo_file("configs/separable_fc.json");
    let cfg = cfg.to_str().unwrap();
    let doc = stdout_json(&run(&["fc", "--config", cfg]));
    assert_eq!(doc["ratio_s"].as_f64(), Some(0.0));
    let solved = stdout_json(&run(&["fc", "--config", cfg, "--target", "solve-eps", "--n", "0"]));
    assert!(solved["epsilon"].as_f64().unwrap().is_finite());
    assert!((solved["efficiency"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let o = run(&["fc", "--config", cfg, "--target", "solve-eps", "--n", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_record(&o)["error"]["kind"], "unreachable");

    let dir = tempfile::tempdir().unwrap();
    let general = write_config(
        dir.path(),
        "fc.json",
        r#"{"gaussian": {"tau": 1.0, "s_a": 1.655, "s_b": 4.839, "s_p": 2.629, "epsilon": 0.3, "process": "fc"}, "grid": {"points": 801, "span_sigmas": 14}}"#,
    );
    let doc = stdout_json(&run(&["fc", "--config", &general, "--n", "6"]));
    let s = doc["ratio_s"].as_f64().unwrap();
    let g: Vec<f64> = doc["couplings"].as_array().unwrap().iter().map(|c| c["g"].as_f64().unwrap()).collect();
    for w in g.windows(2) {
        assert!((w[1] / w[0] - s).abs() < 1e-12);
    }
    let out = dir.path().join("modes.csv");
    let o = run(&["fc", "--config", &general, "--target", "modes", "--n", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("d_omega,a_0,a_1,a_2,a_3,a_4,b_0,"));
    let narrow = run(&[
        "fc",
        "--config",
        &general,
        "--target",
        "modes",
        "--n",
        "8",
        "--span",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(narrow.status.code(), Some(2));
}

#[test]
fn oracle_reports() {
    let cfg = repo_file("configs/reference.json");
    let doc = stdout_json(&run(&["oracle", "--config", cfg.to_str().unwrap()]));
    let pts = doc["points"].as_array().unwrap();
    assert_eq!(pts.len(), 5);
    for p in pts {
        assert!(p["relative_deviation"].as_f64().unwrap() < 1e-4, "{p}");
    }
    let cfg = repo_file("configs/propagator.json");
    let cfg = cfg.to_str().unwrap();
    let doc = stdout_json(&run(&["oracle", "--config", cfg]));
    for r in doc["ratios"].as_array().unwrap() {
        let x = r["ratio"].as_f64().unwrap();
        assert!((10.0..=22.0).contains(&x), "{r}");
    }
    let zero = stdout_json(&run(&["oracle", "--config", cfg, "--eps", "0"]));
    assert_eq!(zero["runs"][0]["distance"].as_f64(), Some(0.0));
}

#[test]
fn dispersion_report() {
    let cfg = repo_file("configs/table1.json");
    let doc = stdout_json(&run(&["dispersion", "--config", cfg.to_str().unwrap()]));
    assert!((doc["poling_period_um"].as_f64().unwrap() - 58.25).abs() < 0.05);
    assert_eq!(doc["energy_conservation"]["passed"], Value::Bool(true));
    for row in doc["table1_comparison"].as_array().unwrap() {
        if row["quantity"] == "refractive_index" {
            assert_eq!(row["within_tolerance"], Value::Bool(true), "{row}");
        }
    }
    assert!(doc["setup"]["model"]["s_p"].as_f64().unwrap() > 0.0);
}

#[test]
fn data_directory_override_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/table1.json");
    let cfg = cfg.to_str().unwrap();
    // Directory without a data file: a data (configuration) error.
    let o = bin().args(["dispersion", "--config", cfg]).env("TIMEORDER_DATA_DIR", dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_record(&o)["error"]["kind"], "data");
    // A copy of the built-in data behaves like the default.
    std::fs::copy(repo_file("crates/core/data/sellmeier.json"), dir.path().join("sellmeier.json")).unwrap();
    let o = bin().args(["dispersion", "--config", cfg]).env("TIMEORDER_DATA_DIR", dir.path()).output().unwrap();
    let with_env = stdout_json(&o);
    let default = stdout_json(&run(&["dispersion", "--config", cfg]));
    assert_eq!(with_env["poling_period_um"], default["poling_period_um"]);
    // Out-of-range wavelength names the offending value.
    let far = write_config(
        dir.path(),
        "far.json",
        r#"{"physical": {"triple": {"pump": {"lambda_um": 2.0, "polarization": "extraordinary"},
             "a": {"lambda_um": 3.0, "polarization": "ordinary"}, "b_polarization": "extraordinary"}}}"#,
    );
    let o = run(&["dispersion", "--config", &far]);
    assert_eq!(o.status.code(), Some(2));
    let rec = stderr_record(&o);
    assert_eq!(rec["error"]["kind"], "out_of_range");
    assert!(rec["error"]["message"].as_str().unwrap().contains("5.99"));
    // Missing and malformed configs.
    assert_eq!(run(&["jsa", "--config", "/does/not/exist.json"]).status.code(), Some(4));
    let bad = write_config(dir.path(), "bad.json", "{not json");
    assert_eq!(run(&["jsa", "--config", &bad]).status.code(), Some(2));
    let unwritable = run(&["jsa", "--config", cfg, "--grid", "11", "--out", "/does/not/exist/x.csv"]);
    assert_eq!(unwritable.status.code(), Some(4));
}
