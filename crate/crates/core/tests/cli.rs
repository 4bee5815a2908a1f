use std::fs;
use std::path::Path;
use std::process::Command;

fn skillseq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_skillseq")).args(args).output().unwrap()
}

fn file_hashes(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("manifest.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let files = v["files"].as_object_mut().unwrap();
    files.remove("config.json");
    serde_json::Value::Object(files.clone())
}

#[test]
fn train_twice_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "2")] {
        let out = skillseq(&["--seeds", "0,1", "--episodes", "60", "--jobs", jobs, "--out", dir.to_str().unwrap(), "train"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(file_hashes(&a), file_hashes(&b));
    assert_eq!(
        fs::read(a.join("seed_1/episodes.csv")).unwrap(),
        fs::read(b.join("seed_1/episodes.csv")).unwrap()
    );
}

#[test]
fn eval_and_plot_read_train_output() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    assert!(skillseq(&["--seeds", "2", "--episodes", "30", "--out", run_s, "train"]).status.success());
    let out = skillseq(&["--out", run_s, "eval", "--artifacts", run_s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("eval/eval.csv").exists());
    let csv = run.join("curves/reward.csv");
    let out = skillseq(&["--out", tmp.path().join("plots").to_str().unwrap(), "plot", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let svg = fs::read_to_string(tmp.path().join("plots/reward.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn bad_input_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{\n  \"seeds\": [1,\n}").unwrap();
    let out = skillseq(&["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json:3:"));
    assert_eq!(skillseq(&["--frobnicate", "train"]).status.code(), Some(2));
    assert_eq!(skillseq(&["--seeds", "3-1", "train"]).status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = skillseq::ExperimentConfig::load(&root.join("default.json")).unwrap();
    assert_eq!(default, skillseq::ExperimentConfig::default());
    let smoke = skillseq::ExperimentConfig::load(&root.join("smoke.json")).unwrap();
    assert_eq!(smoke.episode_loop.max_episode_num, 500);
}
