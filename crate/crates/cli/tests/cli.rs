use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 3

[model]
lstm_sizes = [6, 4]
dense_hidden = 5
sequence_length = 32

[train]
batch_size = 8
epochs = 2

[protocol]
baseline_epochs = 2
pretrain_epochs = 1
finetune_epochs = 1

[synth]
per_class = [6, 8, 6]
participants = 4
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eeg-lstm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path
}

fn synth_tiny(dir: &Path, cfg: &Path) -> PathBuf {
    let data = dir.join("data");
    let out = run(&["synth", "--config", s(cfg), "--out", s(&data)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    data
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn synth_writes_requested_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let out = run(&["synth", "--per-class", "10,20,10", "--seed", "7", "--out", s(&d)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = fs::read_to_string(d.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 41);
    assert!(d.join("effective_config.toml").exists());
    assert!(stdout(&out).contains("left 10, high 20, right 10"));
}

#[test]
fn synth_is_replay_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["synth", "--per-class", "3,4,3", "--seed", "7", "--out", s(d)]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["synth", "--per-class", "1,1,1"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["synth", "--per-class", "1,1", "--out", "x"])), 2);

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[model]\nlstm_size = [4]\n").unwrap();
    let out = run(&["params", "--config", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("lstm_size"), "{}", stderr(&out));

    fs::write(&bad, "[train]\nepochs = 0\n").unwrap();
    assert_eq!(code(&run(&["params", "--config", s(&bad)])), 2);
}

#[test]
fn runtime_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["train", "--data", s(&tmp.path().join("missing")), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn params_table_sums_to_default_total() {
    let out = run(&["params"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let counts: Vec<(String, usize)> = text
        .lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            let name = it.next()?.to_string();
            let n = it.next()?.parse().ok()?;
            Some((name, n))
        })
        .collect();
    let total = counts.iter().find(|(n, _)| n == "total").unwrap().1;
    let sum: usize = counts.iter().filter(|(n, _)| n != "total").map(|(_, c)| c).sum();
    assert_eq!(total, 558_275);
    assert_eq!(sum, total);
    assert_eq!(counts.len(), 8);
    assert!(text.contains("2062531"));
}

#[test]
fn table2_report_is_replay_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let data = synth_tiny(tmp.path(), &cfg);
    let mut reports = Vec::new();
    for name in ["r1", "r2"] {
        let out_dir = tmp.path().join(name);
        let out = run(&["table2", "--config", s(&cfg), "--data", s(&data), "--seed", "1", "--out", s(&out_dir)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        reports.push(fs::read(out_dir.join("report.json")).unwrap());
        assert!(out_dir.join("report.txt").exists());
        assert!(out_dir.join("effective_config.toml").exists());
    }
    assert_eq!(reports[0], reports[1]);
    let json: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["label"], "Original");
    assert_eq!(rows[4]["label"], "Original+Theta+Alpha+Beta");
}

#[test]
fn staged_pipeline_and_config_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let data = synth_tiny(tmp.path(), &cfg);
    let corpus = tmp.path().join("corpus");
    let out = run(&["augment", "--config", s(&cfg), "--data", s(&data), "--out", s(&corpus)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(corpus.join("theta").join("manifest.csv").exists());

    let pre = tmp.path().join("pre");
    let out = run(&["pretrain", "--config", s(&cfg), "--corpus", s(&corpus), "--order", "theta", "--out", s(&pre)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stage = pre.join("stage1_theta.nckp");
    assert!(stage.exists());

    let ft = tmp.path().join("ft");
    let out = run(&[
        "finetune", "--config", s(&cfg), "--checkpoint", s(&stage), "--data", s(&data), "--out", s(&ft),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let eval: serde_json::Value = serde_json::from_slice(&fs::read(ft.join("eval.json")).unwrap()).unwrap();
    let stages: Vec<&str> = eval["provenance"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["subset"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["theta", "raw"]);

    let out = run(&["eval", "--config", s(&cfg), "--checkpoint", s(&ft.join("finetuned.nckp")), "--data", s(&data)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("weighted F1"));

    let other = tmp.path().join("other.toml");
    fs::write(&other, TINY.replace("lstm_sizes = [6, 4]", "lstm_sizes = [5, 4]")).unwrap();
    let out = run(&["eval", "--config", s(&other), "--checkpoint", s(&stage), "--data", s(&data)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not match"), "{}", stderr(&out));
}

#[test]
fn train_writes_checkpoint_history_and_split() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let data = synth_tiny(tmp.path(), &cfg);
    let out_dir = tmp.path().join("train");
    let out = run(&["train", "--config", s(&cfg), "--data", s(&data), "--epochs", "3", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["model.nckp", "history.json", "split.json", "eval.json", "effective_config.toml"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let history: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["loss"].as_array().unwrap().len(), 3);
}
