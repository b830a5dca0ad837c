use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn painnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_painnet"))
        .args(args)
        .env_remove("PAINNET_OUT")
        .env_remove("PAINNET_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = painnet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn run_config(dir: &Path) -> PathBuf {
    let cfg = json!({
        "seed": 3,
        "synth": {
            "channels": 7,
            "trials_per_class": {"no_pain": 6, "pain": 6},
            "effects": [
                {"kind": "band_power", "channels": [4], "band": "alpha", "effect_size": 4.0, "applies_to_class": "pain"},
                {"kind": "coherence", "channels": [0, 1], "band": "gamma", "effect_size": 0.8, "applies_to_class": "pain"}
            ]
        },
        "protocol": {"num_iterations": 3, "num_folds": 4, "feature_set": "both"}
    });
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn run_is_accurate_reproducible_and_fully_manifested() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = run_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let stdout = ok(&["run", "--config", s(&cfg), "--out", s(&a)]);
    assert!(stdout.contains("rank\telectrode"), "{stdout}");
    let out = Command::new(env!("CARGO_BIN_EXE_painnet"))
        .args(["run", "--config", s(&cfg)])
        .env("PAINNET_OUT", &b)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&a.join("report.json"));
    assert!(
        report["grand_mean"].as_f64().unwrap() >= 0.90,
        "{}",
        report["grand_mean"]
    );
    assert_eq!(report["leakage_violations"], 0);
    assert_eq!(
        std::fs::read(a.join("report.json")).unwrap(),
        std::fs::read(b.join("report.json")).unwrap()
    );

    let mut ma = read_json(&a.join("manifest.json"));
    let mut mb = read_json(&b.join("manifest.json"));
    for m in [&mut ma, &mut mb] {
        m.as_object_mut().unwrap().remove("created_unix_s");
    }
    assert_eq!(ma, mb);
    let files = ma["files"].as_array().unwrap();
    let listed: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    for expected in [
        "config.json",
        "synth/recording.pnb",
        "features/pib.csv",
        "features/msc.csv",
        "selection.json",
        "report.json",
        "folds.csv",
        "network/edges.csv",
        "network/network.svg",
    ] {
        assert!(listed.contains(&expected), "{expected} missing from {listed:?}");
    }
    for f in files {
        let bytes = std::fs::read(a.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    assert!(!a.join("failed").exists());

    let ranking = ok(&["network", "--from", s(&a.join("report.json")), "--top-k", "2"]);
    let top: Vec<&str> = ranking.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(top.len(), 2);
    assert!(top.iter().all(|e| ["E01", "E02"].contains(e)), "{ranking}");
}

#[test]
fn default_protocol_recovers_injected_effect() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&[
        "synth",
        "--channels",
        "7",
        "--trials-per-class",
        "6",
        "--seed",
        "11",
        "--out",
        s(d),
    ]);
    let cfg = json!({"recording": "recording.pnb", "reports": "reports.csv"});
    std::fs::write(d.join("run.json"), cfg.to_string()).unwrap();
    ok(&["run", "--config", s(&d.join("run.json")), "--out", s(&d.join("out"))]);
    let report = read_json(&d.join("out/report.json"));
    assert_eq!(report["config"]["num_iterations"], 15);
    assert_eq!(report["config"]["num_folds"], 20);
    assert_eq!(report["config"]["model"]["n_trees"], 100);
    assert!(
        report["grand_mean"].as_f64().unwrap() >= 0.90,
        "{}",
        report["grand_mean"]
    );
}

#[test]
fn missing_reports_file_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--channels",
        "3",
        "--trials-per-class",
        "2",
        "--no-effects",
        "--out",
        s(tmp.path()),
    ]);
    let missing = tmp.path().join("nope.csv");
    let out = painnet(&[
        "evaluate",
        "--recording",
        s(&tmp.path().join("recording.pnb")),
        "--reports",
        s(&missing),
        "--out",
        s(&tmp.path().join("r.json")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn failed_stage_is_named_and_outputs_quarantined() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--channels",
        "3",
        "--trials-per-class",
        "2",
        "--no-effects",
        "--out",
        s(tmp.path()),
    ]);
    let flagged = tmp.path().join("flagged.txt");
    std::fs::write(&flagged, "E01\nE02\nE03\n").unwrap();
    let cfg = json!({
        "recording": "recording.pnb",
        "reports": "reports.csv",
        "flagged_channels_file": "flagged.txt",
    });
    let cfg_path = tmp.path().join("run.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = painnet(&["run", "--config", s(&cfg_path), "--out", s(&out_dir)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `preprocess`"), "{err}");
    assert!(out_dir.join("failed/config.json").exists());
    assert!(!out_dir.join("config.json").exists());
    assert!(!out_dir.join("manifest.json").exists());
}

#[test]
fn individual_verbs_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&[
        "synth",
        "--channels",
        "7",
        "--trials-per-class",
        "3",
        "--seed",
        "4",
        "--out",
        s(d),
    ]);
    let clean = d.join("clean.pnb");
    let stdout = ok(&[
        "preprocess",
        "--recording",
        s(&d.join("recording.pnb")),
        "--out",
        s(&clean),
    ]);
    assert!(stdout.contains("kept 7 channels"));
    let reports = d.join("reports.csv");
    let sel = d.join("selection.json");
    let ranked = ok(&[
        "select",
        "--recording",
        s(&clean),
        "--reports",
        s(&reports),
        "--k",
        "3",
        "--out",
        s(&sel),
    ]);
    assert_eq!(ranked.lines().count(), 3);
    let feats = d.join("features");
    ok(&[
        "features",
        "--recording",
        s(&clean),
        "--reports",
        s(&reports),
        "--selection",
        s(&sel),
        "--out",
        s(&feats),
    ]);
    let pib = std::fs::read_to_string(feats.join("pib.csv")).unwrap();
    assert_eq!(pib.lines().count(), 1 + 6 * 30);
    assert_eq!(pib.lines().next().unwrap().split(',').count(), 7 * 6);
    let msc = std::fs::read_to_string(feats.join("msc.csv")).unwrap();
    assert_eq!(msc.lines().next().unwrap().split(',').count(), 3 * 6);
    assert!(feats.join("vas_histogram.csv").exists());

    let report = d.join("eval/report.json");
    std::fs::create_dir_all(report.parent().unwrap()).unwrap();
    let stdout = ok(&[
        "evaluate",
        "--recording",
        s(&clean),
        "--reports",
        s(&reports),
        "--model",
        "lr",
        "--iterations",
        "2",
        "--folds",
        "2",
        "--seed",
        "9",
        "--out",
        s(&report),
    ]);
    assert!(stdout.starts_with("accuracy"));
    let r = read_json(&report);
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["config"]["model"]["kind"], "lr");
    assert_eq!(
        std::fs::read_to_string(d.join("eval/report.folds.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 4
    );

    let out = painnet(&["network", "--from", s(&report)]);
    assert!(!out.status.success(), "logistic reports carry no importances");
}

#[test]
fn invalid_strategy_task_pair_is_rejected() {
    let out = painnet(&["run", "--strategy", "s2", "--task", "ternary"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("binary task only"));
}

fn fake_report(template: &Value, model: &str, mean: f64) -> Value {
    let mut r = template.clone();
    r["grand_mean"] = json!(mean);
    r["config"]["model"] = json!({"kind": model});
    r
}

#[test]
fn summarize_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&[
        "synth",
        "--channels",
        "3",
        "--trials-per-class",
        "2",
        "--no-effects",
        "--out",
        s(d),
    ]);
    let base = d.join("base.json");
    ok(&[
        "evaluate",
        "--recording",
        s(&d.join("recording.pnb")),
        "--reports",
        s(&d.join("reports.csv")),
        "--model",
        "lr",
        "--iterations",
        "1",
        "--folds",
        "1",
        "--out",
        s(&base),
    ]);
    let template = read_json(&base);
    let mut args = vec!["summarize".to_string(), "--format".into(), "text".into()];
    for (model, mean) in [("lr", 0.52), ("svm", 0.47), ("rf", 0.54)] {
        let p = d.join(format!("{model}.json"));
        std::fs::write(&p, fake_report(&template, model, mean).to_string()).unwrap();
        args.push(format!("sub2={}", p.display()));
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let table = ok(&refs);
    assert!(table.lines().any(|l| l == "sub2: 52 47 54"), "{table}");

    let half = d.join("half.json");
    std::fs::write(&half, fake_report(&template, "rf", 0.675).to_string()).unwrap();
    let csv = ok(&["summarize", &format!("one={}", half.display())]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "one,68");

    let mut old = fake_report(&template, "rf", 0.5);
    old["schema_version"] = json!(0);
    let old_path = d.join("old.json");
    std::fs::write(&old_path, old.to_string()).unwrap();
    let out = painnet(&["summarize", s(&half), s(&old_path)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}
