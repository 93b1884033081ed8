use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn adn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adn")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) {
    let out = adn(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["synth", "--out", s(&a), "--n", "8", "--size", "64", "--seed", "7"]);
    ok(&["synth", "--out", s(&b), "--n", "8", "--size", "64", "--seed", "7"]);
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.keys().any(|k| k.starts_with("train")));
    assert!(fa.contains_key(Path::new("manifest.json")));
    assert_eq!(fa, fb);
}

#[test]
fn train_eval_infer_transfer_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run) = (tmp.path().join("data"), tmp.path().join("run"));
    ok(&["synth", "--out", s(&data), "--n", "6", "--size", "64", "--seed", "3", "--set", "n_test=2"]);
    let data_set = format!("data_dir={}", s(&data));
    let small = ["--set", "image_size=64", "--set", "base_channels=4", "--set", "n_res_blocks=1", "--set", "disc_layers=2"];
    let mut args = vec!["train", "--out", s(&run), "--set", &data_set, "--set", "iterations=4"];
    args.extend(small);
    ok(&args);
    let ckpt = run.join("checkpoint.adnckpt");
    assert!(ckpt.exists());
    let log = fs::read_to_string(run.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    let cfg: serde_json::Value = serde_json::from_slice(&fs::read(run.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["iterations"], 4);
    assert_eq!(cfg["lambda_adv_Ia"], 1.0);

    let ck_set = format!("checkpoint={}", s(&ckpt));
    let ev = tmp.path().join("eval");
    ok(&["eval", "--out", s(&ev), "--set", &ck_set, "--set", &data_set, "--set", "write_csv=true"]);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(ev.join("metrics.json")).unwrap()).unwrap();
    let rows = m["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row["n_images"], 2);
        assert!(row["psnr_db"].is_number() && row["ssim_percent"].is_number());
    }
    assert!(ev.join("montage.png").exists());
    assert!(fs::read_to_string(ev.join("metrics.csv")).unwrap().lines().count() >= 3);

    let inf = tmp.path().join("infer");
    let input = format!("input_dir={}", s(&data.join("test")));
    ok(&["infer", "--out", s(&inf), "--set", &ck_set, "--set", &input]);
    assert_eq!(fs::read_dir(inf.join("corrected")).unwrap().count(), 6);

    let tr = tmp.path().join("transfer");
    ok(&["transfer", "--out", s(&tr), "--set", &ck_set, "--set", &data_set, "--set", "artifact_index=0", "--set", "clean_index=1"]);
    let t: serde_json::Value = serde_json::from_slice(&fs::read(tr.join("transfer.json")).unwrap()).unwrap();
    assert!(t["transfer_l1"].as_f64().unwrap() > 0.0);
    assert!(t["cycle_l1"].as_f64().unwrap() >= 0.0);
}

#[test]
fn unknown_flag_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = adn(&["train", "--out", s(tmp.path()), "--foo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = adn(&["train", "--out", s(tmp.path()), "--set", "lamda_recon=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda_recon"));
}

#[test]
fn missing_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let nowhere = format!("checkpoint={}", s(&tmp.path().join("none.adnckpt")));
    let data = format!("data_dir={}", s(tmp.path()));
    let out = adn(&["eval", "--out", s(&tmp.path().join("e")), "--set", &nowhere, "--set", &data]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.adnckpt"));
}

#[test]
fn config_file_and_overrides_resolve_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"n": 3, "size": 64, "n_test": 1, "seed": 1}"#).unwrap();
    let out = tmp.path().join("o");
    ok(&["synth", "--config", s(&cfg), "--out", s(&out), "--seed", "9", "--set", "n=2"]);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(out.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!((r["n"].as_u64(), r["size"].as_u64(), r["seed"].as_u64()), (Some(2), Some(64), Some(9)));
}
