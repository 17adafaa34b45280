use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn biwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biwave")).args(args).output().expect("binary runs")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn reference(scenario: &str) -> serde_json::Value {
    let out = biwave(&["example", scenario]);
    assert!(out.status.success());
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Shortened two_position run so the tests stay quick.
fn short_two_position() -> serde_json::Value {
    let mut v = reference("two_position");
    v["t2"] = serde_json::json!(0.2);
    v["two_position"]["min_width_ratio"] = serde_json::Value::Null;
    v
}

#[test]
fn shipped_configs_match_built_in_references() {
    for s in ["two_position", "slit", "double_slit", "stern_gerlach", "momentum_consistency", "triple_measurement"] {
        let text = fs::read_to_string(configs_dir().join(format!("{s}.json"))).unwrap();
        let shipped: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(shipped, reference(s), "{s}");
    }
}

#[test]
fn run_writes_csv_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &short_two_position());
    let out_dir = dir.path().join("out");
    let out = biwave(&["run", "two_position", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");

    let mass = fs::read_to_string(out_dir.join("mass.csv")).unwrap();
    assert!(mass.starts_with("t,x,re,im\n"));
    let trace = fs::read_to_string(out_dir.join("amplitude_trace.csv")).unwrap();
    assert!(trace.starts_with("t,re,im\n"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["scenario"], "two_position");
    let names: Vec<&str> = report["assertions"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len(), "each assertion appears once");
    let s = &report["summaries"][0];
    assert_eq!(s["quantity"], "mass");
    assert!((s["total"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

/// Recomputes the width assertions of the emitted mass table from the CSV
/// alone and compares with the report.
#[test]
fn width_assertions_rederive_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &short_two_position());
    let out_dir = dir.path().join("out");
    let out = biwave(&["run", "two_position", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(out_dir.join("mass.csv")).unwrap();
    let mut by_time: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for row in rdr.records() {
        let row = row.unwrap();
        let t: f64 = row[0].parse().unwrap();
        let x: f64 = row[1].parse().unwrap();
        let re: f64 = row[2].parse().unwrap();
        let im: f64 = row[3].parse().unwrap();
        if by_time.last().map(|(s, _)| *s) != Some(t) {
            by_time.push((t, Vec::new()));
        }
        by_time.last_mut().unwrap().1.push((x, re.hypot(im)));
    }
    let width = |pts: &[(f64, f64)]| {
        let w: f64 = pts.iter().map(|p| p.1).sum();
        let mean = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / w;
        (pts.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / w).sqrt()
    };
    let widths: Vec<f64> = by_time.iter().map(|(_, p)| width(p)).collect();
    let dt = 0.001;
    let find = |t: f64| by_time.iter().position(|(s, _)| (s - t).abs() < 1e-9).unwrap();
    let (w0, wm) = (widths[find(dt)], widths[find(0.1)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let measured = report["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["name"] == "width_start_below_mid")
        .unwrap()["measured"]
        .as_f64()
        .unwrap();
    assert!((measured - w0 / wm).abs() < 1e-9 * measured, "{measured} vs {}", w0 / wm);
}

#[test]
fn real_part_flag_drops_imaginary_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &reference("triple_measurement"));
    let out_dir = dir.path().join("out");
    let out = biwave(&[
        "run",
        "triple_measurement",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--real-part",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(out_dir.join("mass_before.csv")).unwrap();
    assert!(text.starts_with("t,x,re\n"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &reference("triple_measurement"));
    let mut outputs = Vec::new();
    for k in 0..2 {
        let o = dir.path().join(format!("out{k}"));
        assert!(biwave(&["run", "triple_measurement", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()])
            .status
            .success());
        outputs.push(o);
    }
    for f in ["mass_before.csv", "mass_after.csv", "amplitude_trace.csv", "report.json"] {
        assert_eq!(fs::read(outputs[0].join(f)).unwrap(), fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = reference("slit");
    v["slit"]["centers"] = serde_json::json!([]);
    let cfg = write_config(dir.path(), "closed.json", &v);
    let out_dir = dir.path().join("out");
    let out = biwave(&["run", "slit", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no consistent history"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["flags"].as_array().unwrap().len() == 1);
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = short_two_position();
    v["schema"] = serde_json::json!(2);
    let cfg = write_config(dir.path(), "bad.json", &v);
    let out = biwave(&["run", "two_position", "--config", cfg.to_str().unwrap(), "--out", "/nonexistent/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let cfg = write_config(dir.path(), "ok.json", &short_two_position());
    let out = biwave(&["run", "slit", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "scenario name must match the config");
    let out = biwave(&["run", "nonsense", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn propcheck_passes() {
    let out = biwave(&["propcheck"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = biwave(&["propcheck", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn quick_check_writes_residual_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("residuals.jsonl");
    let out = biwave(&["check", "--quick", "--residuals", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 10);
    assert!(lines.iter().any(|l| l["quantity"] == "continuity"));
    assert!(lines.iter().all(|l| l["per_time"].is_array()));
}

#[test]
fn propagator_binary_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "schema": 1,
        "grid": {"n_points": 32, "dx": 0.25, "origin": -4.0, "boundary": "periodic"},
        "dt": 0.05, "t1": 0.0, "t2": 1.0,
        "potential": {"preset": "harmonic", "omega": 1.0}
    });
    let cfg = write_config(dir.path(), "cfg.json", &cfg);
    let bin = dir.path().join("p.bin");
    let out = biwave(&["propagator", "--config", cfg.to_str().unwrap(), "--from", "0", "--to", "0.5", "--out", bin.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::metadata(&bin).unwrap().len(), 32 * 32 * 16);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(side["convention"], "P = K*dx");
    assert_eq!(side["t_to"], 0.5);
}
