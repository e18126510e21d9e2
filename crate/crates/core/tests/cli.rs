use std::path::Path;
use std::process::{Command, Output};

fn mdlprobe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdlprobe")).args(args).current_dir(cwd).output().unwrap()
}

fn error_of(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str::<serde_json::Value>(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))["error"].clone()
}

fn gen_small(dir: &Path) {
    let out = mdlprobe(
        &["gen", "--n-train", "200", "--n-dev", "40", "--n-test", "40", "--dim", "8", "--classes", "3", "--vocab", "30", "--out", "data"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_code_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    gen_small(dir);
    for stem in ["train", "dev", "test"] {
        assert!(dir.join(format!("data/{stem}.features.bin")).exists());
        assert!(dir.join(format!("data/{stem}.labels.bin")).exists());
    }
    assert!(dir.join("data/dataset.json").exists());

    let run = ["--train", "data/train", "--dev", "data/dev", "--test", "data/test", "--arch", "linear", "--epochs", "4", "--seeds", "0,1"];
    let out = mdlprobe(&[&["code", "online"], &run[..], &["--out", "online"]].concat(), dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("online/report.json")).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 2);

    let out = mdlprobe(&["report", "curves", "--report", "online/report.json"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("online/curves/online_seed1.csv").exists());

    let out = mdlprobe(&[&["code", "variational"], &run[..], &["--out", "var"]].concat(), dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(dir.join("var/pruned_arch.txt")).unwrap().starts_with("seed 0: "));

    let out = mdlprobe(&["probe", "--train", "data/train", "--dev", "data/dev", "--arch", "linear", "--epochs", "3", "--out", "p"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("p/probe.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    assert_eq!(mdlprobe(&["code", "online", "--bogus"], dir).status.code(), Some(2));
    assert_eq!(mdlprobe(&["--help"], dir).status.code(), Some(0));

    gen_small(dir);
    // Annealing needs a dev set.
    let out = mdlprobe(&["code", "online", "--train", "data/train", "--out", "o"], dir);
    assert_eq!(out.status.code(), Some(2));
    let err = error_of(&out);
    assert_eq!(err["class"], "usage");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let out = mdlprobe(&["code", "baselines", "--train", "missing", "--out", "o"], dir);
    assert_eq!(out.status.code(), Some(3));

    gen_small(dir);
    let out = mdlprobe(&["code", "baselines", "--train", "data/train", "--out", "b"], dir);
    assert!(out.status.success());
    let out = mdlprobe(&["report", "curves", "--report", "b/report.json"], dir);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_of(&out)["message"].as_str().unwrap().contains("no curve"));

    std::fs::write(dir.join("bad.features.csv"), "1,2\n3\n").unwrap();
    std::fs::write(dir.join("bad.labels.csv"), "0\n1\n").unwrap();
    let out = mdlprobe(&["code", "baselines", "--train", "bad", "--out", "o"], dir);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let rows: String = (0..40).map(|i| if i % 3 == 0 { "3e38,-3e38\n" } else { "-3e38,3e38\n" }).collect();
    std::fs::write(dir.join("t.features.csv"), rows).unwrap();
    let labels: String = (0..40).map(|i| format!("{}\n", i % 2)).collect();
    std::fs::write(dir.join("t.labels.csv"), format!("K=2\n{labels}")).unwrap();
    let out = mdlprobe(
        &["code", "online", "--train", "t", "--out", "o", "--arch", "linear", "--seeds", "0", "--epochs", "3", "--lr", "1e300", "--set", "probe.annealing=false"],
        dir,
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_of(&out)["class"], "numerical");
}

#[test]
fn config_runs_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let config = r#"
name = "cfg"
method = "online"
seeds = [0]
out_dir = "result"

[data.synthetic]
n_train = 100
n_dev = 20
n_test = 0
seed = 1

[data.synthetic.task]
kind = "gaussian"
dim = 4
separation = 1.0

[probe]
arch = "linear"
epochs = 3
"#;
    std::fs::create_dir(dir.join("exp")).unwrap();
    std::fs::write(dir.join("exp/cfg.toml"), config).unwrap();
    let out = mdlprobe(&["code", "online", "--config", "exp/cfg.toml", "--set", "seeds=[2]"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("exp/result/report.json")).unwrap()).unwrap();
    assert_eq!(report["results"][0]["seed"], 2);
    assert_eq!(report["results"][0]["accuracy_split"], "train");

    let out = mdlprobe(&["code", "online", "--config", "exp/cfg.toml", "--set", "nonsense=1"], dir);
    assert_eq!(out.status.code(), Some(2));
}
