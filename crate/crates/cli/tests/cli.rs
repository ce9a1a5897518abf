use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn volume_of_the_geodesic_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = crlab(&["volume", "--chart", "geodesic_sphere", "--m", "2", "--n", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["command"], "volume");
    assert_eq!(r["status"], "ok");
    let v = r["result"]["volume"].as_f64().unwrap();
    assert!((v - 4.0 * std::f64::consts::PI).abs() < 1e-8);
    // stable key order: settings first, result last
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.find("\"settings\"").unwrap() < text.find("\"result\"").unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "chart = \"geodesic_sphere\"\nm = 3\nn = 3\nres = 12\nout = \"report.json\"\n").unwrap();
    let o = crlab(&["volume", "--config", cfg.to_str().unwrap(), "--m", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["settings"]["m"], 2);
    assert_eq!(r["settings"]["res"], 12);
    assert!(r["chart"].as_str().unwrap().contains("m=2"));

    std::fs::write(&cfg, "chart = \"geodesic_sphere\"\nresolution = 12\n").unwrap();
    let o = crlab(&["volume", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = crlab(&["cr-volume", "--chart", "whitney_sphere", "--b", "0.2,0,0,0.2,0,0", "--res", "16", "--seed", "3", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read_to_string(&p).unwrap().replace(name, "")
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn scan_csv_feeds_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let out = dir.path().join("scan.json");
    let o = crlab(&[
        "asymptotics", "scan", "--chart", "geodesic_sphere", "--point", "1.0,0.5", "--t", "0.01,0.005,0.002,0.001",
        "--csv", csv.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,value,nodes_per_axis"));
    assert_eq!(text.lines().count(), 5);
    let c0 = read_json(&out)["result"]["fit"]["coefficients"][0].as_f64().unwrap();
    assert!((c0 - 4.0 * std::f64::consts::PI).abs() < 1e-8);

    let fit_out = dir.path().join("fit.json");
    let o = crlab(&["asymptotics", "fit", "--input", csv.to_str().unwrap(), "--out", fit_out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c0_fit = read_json(&fit_out)["result"]["coefficients"][0].as_f64().unwrap();
    assert!((c0_fit - c0).abs() < 1e-9);
}

#[test]
fn verify_suites_pass() {
    for args in [&["verify", "sextic", "--seed", "2"][..], &["verify", "identities", "--cases", "2"][..]] {
        let o = crlab(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn lambda1_of_the_hexagonal_torus() {
    let o = crlab(&["lambda1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("lambda_1 = 2.000000000000"));
    let o = crlab(&["lambda1", "--v1", "1,0", "--v2", "0,1"]);
    assert!(stdout(&o).contains("39.47841760"));
    assert_eq!(crlab(&["lambda1", "--v1", "1,0"]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(crlab(&[]).status.code(), Some(1));
    assert_eq!(crlab(&["volume", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(crlab(&["volume"]).status.code(), Some(1));
    assert_eq!(crlab(&["volume", "--chart", "no_such_chart"]).status.code(), Some(1));
    assert_eq!(crlab(&["--help"]).status.code(), Some(0));
    // the reversing stage coefficients do not normalize: invariant violation
    let o = crlab(&["normalize", "--chart", "whitney_sphere", "--b", "0.3,0,0,0.3,0,0", "--formulas", "reversing"]);
    assert_eq!(o.status.code(), Some(3));
    let o = crlab(&["normalize", "--chart", "whitney_sphere", "--b", "0.3,0,0,0.3,0,0"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn expression_charts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("circle.toml");
    std::fs::write(
        &spec,
        r#"
name = "circle"
m = 1
n = 1
axes = [{ lo = 0.0, hi = 6.283185307179586, periodic = true }]
components = ["cos(u1)", "sin(u1)", "0", "0"]
"#,
    )
    .unwrap();
    let o = crlab(&["volume", "--expr", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("6.28318530"));
    // the Hopf fiber is not horizontal
    std::fs::write(&spec, std::fs::read_to_string(&spec).unwrap().replace(r#""cos(u1)", "sin(u1)", "0", "0""#, r#""cos(u1)", "0", "sin(u1)", "0""#)).unwrap();
    let o = crlab(&["energies", "--expr", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dilation_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let o = crlab(&["dilation", "--chart", "whitney_sphere", "--b", "0.4,0,0,0.4,0,0", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 82);
    assert_eq!(crlab(&["volume", "--chart", "geodesic_sphere", "--csv", csv.to_str().unwrap()]).status.code(), Some(1));
}
