//! End-to-end runs of the `lpssl` binary on a small planted graph.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
dataset = "toy"
model = "grace"
seeds = [1, 2]
hits_k = 10
ct_epochs = 3
batch_size = 64
gnn_lr = 0.01
pred_lr = 0.01
proj_hidden = 16
loss_func = "bce"
mask_input = false
weight_decay = 1e-5
tau = 0.5
decoder_epochs = 10

[encoder]
n_layers = 1
layer_size = 16
norm = "batch"
batchnorm_momentum = 0.9
weight_standardization = false

[augmentation]
kind = "random"
drop_edge_rate_1 = 0.2
drop_edge_rate_2 = 0.2
drop_feature_rate_1 = 0.1
drop_feature_rate_2 = 0.1
"#;

fn setup(dir: &Path) {
    let data = dir.join("data");
    std::fs::create_dir_all(&data).unwrap();
    let mut text = String::new();
    for block in 0..3 {
        let base = block * 10;
        for i in 0..10 {
            for j in i + 1..10 {
                if (i + j) % 3 != 0 {
                    text.push_str(&format!("{} {}\n", base + i, base + j));
                }
            }
        }
    }
    text.push_str("9 10\n19 20\n29 0\n");
    std::fs::write(data.join("toy.txt"), text).unwrap();
    std::fs::write(data.join("datasets.toml"), "[[dataset]]\nname = \"toy\"\npath = \"toy.txt\"\n").unwrap();
    std::fs::write(dir.join("cfg.toml"), CONFIG).unwrap();
}

fn lpssl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpssl"))
        .current_dir(dir)
        .env("LPSSL_DATA_ROOT", dir.join("data"))
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_evaluate_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir);

    let train = lpssl(dir, &["train", "--config", "cfg.toml", "--out", "res", "--workers", "2"]);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let run = dir.join("res/toy/grace_random");
    for seed in ["1", "2"] {
        for f in ["metrics.csv", "config.toml", "lineage.json", "checkpoint/encoder/encoder.params", "checkpoint/predictor/decoder.params"] {
            assert!(run.join(seed).join(f).exists(), "missing {seed}/{f}");
        }
    }
    let metrics = std::fs::read_to_string(run.join("1/metrics.csv")).unwrap();
    let row: Vec<&str> = metrics.lines().nth(1).unwrap().split(',').collect();
    let hits: f64 = row[4].parse().unwrap();

    let eval = lpssl(dir, &["evaluate", "--config", "cfg.toml", "--out", "res", "--seeds", "1"]);
    assert!(eval.status.success());
    assert!(stdout(&eval).contains(&format!("hits@10 {hits:.4}")), "{}", stdout(&eval));

    let split = lpssl(dir, &["split", "--config", "cfg.toml", "--out", "res", "--seeds", "1"]);
    assert!(split.status.success());
    assert!(dir.join("res/toy/splits/1/test.txt").exists());

    let report = lpssl(dir, &["report", "--out", "res"]);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    for f in ["hits_at_10.txt", "hits_at_10.csv", "ap.txt", "auc.csv"] {
        assert!(dir.join("res/report").join(f).exists(), "missing {f}");
    }
}

#[test]
fn missing_dataset_fails_with_a_clear_message() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    let out = lpssl(tmp.path(), &["train", "--dataset", "usair", "--out", "res"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dataset `usair` not found"), "{err}");
}

#[test]
fn bad_seed_list_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path());
    let out = lpssl(tmp.path(), &["train", "--config", "cfg.toml", "--seeds", "5-2"]);
    assert!(!out.status.success());
}
