use std::fs;
use std::path::Path;

use kinlv_cli::output::verify_manifest;
use kinlv_cli::run_with;
use serde_json::Value;

fn kinlv(args: &[&str]) -> i32 {
    run_with(std::iter::once("kinlv").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn header(file: &Path) -> String {
    fs::read_to_string(file).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn invalid_parameters_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    // gamma mu <= nu violates the confinement condition
    fs::write(&cfg, r#"{"params": {"gamma": 0.05}}"#).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(kinlv(&["means", "--config", path(&cfg), "--out", path(&out)]), 2);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn unknown_config_key_and_bad_flags_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.json");
    fs::write(&cfg, r#"{"run": {"t_ned": 3}}"#).unwrap();
    assert_eq!(kinlv(&["cv", "--config", path(&cfg)]), 2);
    assert_eq!(kinlv(&["cv", "--risk", "half-two"]), 2);
    assert_eq!(kinlv(&["explode"]), 2);
}

#[test]
fn missing_config_file_exits_with_4() {
    assert_eq!(kinlv(&["means", "--config", "/definitely/not/here.json"]), 4);
}

#[test]
fn same_seed_gives_identical_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let code = kinlv(&["mc", "--agents", "2000", "--eps", "0.05", "--t-end", "2", "--seed", seed, "--out", path(&out)]);
        assert_eq!(code, 0);
        manifest(&out)["files"].clone()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn golden_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path();
    assert_eq!(kinlv(&["means", "--t-end", "5", "--out", path(&o.join("means"))]), 0);
    assert_eq!(kinlv(&["cv", "--t-end", "5", "--risk", "half-one", "--out", path(&o.join("cv"))]), 0);
    assert_eq!(kinlv(&["mc", "--agents", "1000", "--eps", "0.1", "--t-end", "1", "--out", path(&o.join("mc"))]), 0);
    assert_eq!(kinlv(&["fp", "--cells", "128", "--t-end", "0.5", "--out", path(&o.join("fp"))]), 0);
    let ode = "t,m_f,m_g,v_f,v_g,c_f,c_g";
    assert_eq!(header(&o.join("means/means.csv")), ode);
    assert_eq!(header(&o.join("cv/cv.csv")), ode);
    assert_eq!(header(&o.join("mc/mc_moments.csv")), format!("{ode},gini_f,gini_g,skipped_events"));
    assert_eq!(header(&o.join("mc/mc_histogram_t1.0000.csv")), "bin_left,bin_right,density_f,density_g");
    assert_eq!(header(&o.join("mc/report_f.csv")), "t,cv,gini,gini2,source,se");
    assert_eq!(header(&o.join("fp/fp_moments.csv")), format!("{ode},mass_f,mass_g"));
    assert_eq!(header(&o.join("fp/fp_snapshot_t0.5000.csv")), "x,f,g");
    let hist = fs::read_to_string(o.join("mc/mc_histogram_t1.0000.csv")).unwrap();
    assert_eq!(hist.lines().count(), 201);
}

#[test]
fn manifest_lists_every_file_and_detects_edits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig");
    assert_eq!(kinlv(&["figures", "--which", "4", "--out", path(&out)]), 0);
    let m = manifest(&out);
    let listed: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["fig4.csv", "fig4.svg"]);
    assert!(m["notes"]["checks"]["fig4"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!(verify_manifest(&out).unwrap().is_empty());
    let svg = fs::read_to_string(out.join("fig4.svg")).unwrap();
    let digest = m["files"][0]["sha256"].as_str().unwrap();
    assert!(svg.contains(&format!("data-sha256:{digest}")));
    fs::write(out.join("fig4.csv"), "t\n0\n").unwrap();
    assert_eq!(verify_manifest(&out).unwrap(), ["fig4.csv"]);
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"run": {"t_end": 9.0, "output_dt": 0.5}}"#).unwrap();
    let out = tmp.path().join("o");
    assert_eq!(kinlv(&["means", "--config", path(&cfg), "--t-end", "2", "--out", path(&out)]), 0);
    let text = fs::read_to_string(out.join("means.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
    assert_eq!(manifest(&out)["config"]["run"]["t_end"], 2.0);
}
