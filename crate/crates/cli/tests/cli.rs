use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const DECAY: &str = r#"
kind = "decay"

[model]
dim = 1
half_width = 10
potential = [{ site = [0], value = 1.0 }, { site = [1], value = -0.5 }]
density = { kind = "triangular", center = 0.5, half_width = 0.5 }
lambda = 30.0
z = [0.5, 0.01]
s = 0.3

[run]
samples = 200
seed = 9

[experiment]
x = [-8]
distances = [2, 4, 6, 8, 10]
"#;

fn alloyfmm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alloyfmm"))
        .args(args)
        .current_dir(dir)
        .env_remove("ALLOYFMM_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn manifest_path(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .last()
        .expect("manifest path printed")
        .to_string()
}

#[test]
fn decay_run_writes_profile_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "decay.toml", DECAY);
    let out = alloyfmm(&["decay", &cfg, "--out", "runs"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = manifest_path(&out);
    let dir = Path::new(&manifest).parent().unwrap();
    let dir = tmp.path().join(dir);
    for f in ["config.toml", "profile.csv", "fit.json", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let resolved = fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(resolved.contains("axis = 0"), "defaults recorded: {resolved}");
}

#[test]
fn missing_lambda_is_schema_error_with_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &DECAY.replace("lambda = 30.0\n", ""));
    let out = alloyfmm(&["run", &cfg, "--out", "runs"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn unknown_key_is_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &DECAY.replace("seed = 9", "seed = 9\nwarmup = 3"));
    assert_eq!(alloyfmm(&["run", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn wrong_subcommand_for_kind_is_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "decay.toml", DECAY);
    assert_eq!(alloyfmm(&["wegner", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn same_config_gives_identical_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "decay.toml", DECAY);
    let a = alloyfmm(&["run", &cfg, "--out", "a"], tmp.path());
    let b = alloyfmm(&["--workers", "3", "run", &cfg, "--out", "b"], tmp.path());
    let read = |o: &Output| -> serde_json::Value {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join(manifest_path(o))).unwrap()).unwrap();
        m["summary"].clone()
    };
    assert_eq!(read(&a), read(&b));
}

#[test]
fn nonlocal_apriori_refuses_without_assumptions() {
    // u = (1, -1) has zero mean
    let tmp = tempfile::tempdir().unwrap();
    let text = DECAY
        .replace("kind = \"decay\"", "kind = \"nonlocal-apriori\"")
        .replace("value = -0.5", "value = -1.0")
        .replace("lambda = 30.0", "lambdas = [10.0, 20.0, 40.0]")
        .replace("distances = [2, 4, 6, 8, 10]\n", "y = [-4]\n");
    let cfg = write_config(tmp.path(), "nl.toml", &text);
    let out = alloyfmm(&["run", &cfg, "--out", "runs"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn report_lists_failures_first_and_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "decay.toml", DECAY);
    let good = alloyfmm(&["run", &cfg, "--out", "runs"], tmp.path());
    let good = tmp.path().join(manifest_path(&good));

    // forge a failing copy
    let bad_dir = tmp.path().join("forged");
    fs::create_dir(&bad_dir).unwrap();
    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&good).unwrap()).unwrap();
    m["pass"] = false.into();
    m["checks"][0]["pass"] = false.into();
    m["artifacts"] = serde_json::json!([]);
    let bad = bad_dir.join("manifest.json");
    fs::write(&bad, serde_json::to_string(&m).unwrap()).unwrap();

    let out = alloyfmm(
        &["report", good.to_str().unwrap(), bad.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let fail = text.find("## FAIL").expect("failure section");
    let pass = text.find("## PASS").expect("pass section");
    assert!(fail < pass);
    assert!(text.contains("| λ | μ fit | A fit | r² |"));
}

#[test]
fn report_names_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "decay.toml", DECAY);
    let out = alloyfmm(&["run", &cfg, "--out", "runs"], tmp.path());
    let manifest = tmp.path().join(manifest_path(&out));
    fs::remove_file(manifest.parent().unwrap().join("profile.csv")).unwrap();
    let out = alloyfmm(&["report", manifest.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("profile.csv"));
}

#[test]
fn report_without_manifest_file_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(alloyfmm(&["report", "nope.json"], tmp.path()).status.code(), Some(5));
}

#[test]
fn fuzz_identities_emits_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let out = alloyfmm(&["fuzz-identities", "--cases", "8", "--seed", "3", "--max-sites", "60"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["identity", "deviation", "pass"] {
        assert!(first.get(key).is_some(), "{key} missing in {first}");
    }
}

#[test]
fn verify_averaging_passes_small_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let out = alloyfmm(&["verify-averaging", "--cases", "5", "--seed", "1", "--out", "avg.jsonl"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = fs::read_to_string(tmp.path().join("avg.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 15);
}

#[test]
fn geometry_dump_has_header_and_sites() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "decay.toml", DECAY);
    let out = alloyfmm(&["geometry", &cfg], tmp.path());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("1"));
    assert_eq!(lines.count(), 21);
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = alloyfmm::runner::ExperimentConfig::load(&path).unwrap();
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        assert_eq!(cfg.kind.name(), name);
        cfg.resolve().unwrap_or_else(|e| panic!("{name}: {e}"));
        seen += 1;
    }
    assert_eq!(seen, 9);
}
