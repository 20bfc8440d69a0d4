use std::path::Path;
use std::process::{Command, Output};

const FAST: &str = r#"
[cells]
left = { kind = "B" }
right = { kind = "D" }

[mesh]
h0 = 0.1
max_refine_level = 1

[tolerances]
kmax = 2
max_inner = 30
"#;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confluence"))
        .args(args)
        .current_dir(dir)
        .env_remove("CONFLUENCE_OUT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("{FAST}\n{extra}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn morph_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(&["morph", "--config", &cfg, "--out-dir", "res", "--tile", "2x1", "--png-res", "32"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = tmp.path().join("res");
    for f in ["rho_Y.vtk", "rho_LYR.vtk", "flow_Y.vtk", "tiles.png", "rho_Y.png", "history.csv", "config.toml", "manifest.json"] {
        assert!(res.join(f).is_file(), "missing {f}");
    }
    let m = manifest(&res);
    assert!(m["error"].is_null());
    assert!(m["finished_unix"].as_f64().unwrap() >= m["started_unix"].as_f64().unwrap());
    let img = image::open(res.join("tiles.png")).unwrap();
    assert_eq!((img.width(), img.height()), (2 * 64, 32));
    // the echoed config reloads
    let echoed = std::fs::read_to_string(res.join("config.toml")).unwrap();
    confluence::ConfluenceConfig::from_toml_str(&echoed).unwrap();
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = Command::new(env!("CARGO_BIN_EXE_confluence"))
        .args(["morph", "--config", &cfg, "--png-res", "16"])
        .current_dir(tmp.path())
        .env("CONFLUENCE_OUT", tmp.path().join("env_out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("env_out/manifest.json").is_file());
    assert!(!tmp.path().join("results").exists());
}

#[test]
fn zero_delta_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[morph]\ndelta = 0.0\n");
    let out = run(&["morph", "--config", &cfg, "--out-dir", "res"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("MorphSpec"), "{err}");
    // rejected while loading, before any output is written
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn malformed_config_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[mesh]\nh0 = 0.1\nbogus = 3\n").unwrap();
    let out = run(&["morph", "--config", path.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn sweep_without_values_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(&["sweep", "--config", &cfg, "--param", "delta", "--values", "--out-dir", "res"], tmp.path());
    assert!(!out.status.success());
    let out = run(&["sweep", "--config", &cfg, "--param", "delta"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn sweep_isolates_a_failing_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(
        &["sweep", "--config", &cfg, "--param", "delta", "--values", "0.25,-0.1", "--out-dir", "res", "--png-res", "16"],
        tmp.path(),
    );
    // one value failed, so the sweep as a whole reports failure
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("delta=0.25: ok"), "{stdout}");
    assert!(stdout.contains("delta=-0.1: FAILED"), "{stdout}");
    let res = tmp.path().join("res");
    assert!(manifest(&res.join("delta=0.25"))["error"].is_null());
    assert!(res.join("delta=0.25/rho_Y.vtk").is_file());
    assert!(manifest(&res.join("delta=-0.1"))["error"].as_str().unwrap().contains("MorphSpec"));
    assert!(res.join("sheet.png").is_file());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(res.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn inclined_neumann_run_completes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[morph]\ntheta = 1.0471975511965976\nlateral_bc = \"neumann\"\n",
    );
    let out = run(&["morph", "--config", &cfg, "--out-dir", "res", "--png-res", "16"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&tmp.path().join("res"));
    assert!(m["error"].is_null());
    assert_eq!(m["summary"]["flux_balance"], "not_needed");
}

#[test]
fn bad_tile_spec_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(&["morph", "--config", &cfg, "--tile", "0x3"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
