#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patdrift_core::effects::TABLE2_HEADER;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_patdrift");

fn patdrift(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("PATDRIFT_THREADS").output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = patdrift(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: u64, n: usize) -> PathBuf {
    let out = dir.join(format!("synth_{seed}"));
    ok(&["synth", "--seed", &seed.to_string(), "--n-families", &n.to_string(), "--out", s(&out)]);
    out
}

fn read_tsv_dir(dir: &Path) -> oracle::RawSnapshot {
    let read = |name: &str| fs::read_to_string(dir.join(name)).unwrap();
    oracle::RawSnapshot::from_tsv(&oracle::Tsv {
        applications: read("applications.tsv"),
        classifications: read("classifications.tsv"),
        citations: read("citations.tsv"),
    })
}

fn error_of(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let line = line.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

fn write_empty_snapshot(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("applications.tsv"), "appln_id\tfamily_id\tauthority\tfiling_date\n").unwrap();
    fs::write(dir.join("classifications.tsv"), "appln_id\tcpc_symbol\n").unwrap();
    fs::write(dir.join("citations.tsv"), "citing_appln_id\tcited_appln_id\n").unwrap();
}

/// Only the expected entries remain in `dir`: no staging or backup leftovers.
fn assert_clean(dir: &Path) {
    for e in fs::read_dir(dir).unwrap() {
        let name = e.unwrap().file_name().to_string_lossy().into_owned();
        assert!(!name.starts_with('.'), "leftover {name}");
    }
}

#[test]
fn table2_matches_brute_force_recount() {
    let tmp = TempDir::new().unwrap();
    let pair = synth(tmp.path(), 11, 2_500);
    let csv = tmp.path().join("t2.csv");
    ok(&["table2", "--old", s(&pair.join("old")), "--new", s(&pair.join("new")), "--out", s(&csv)]);

    let old = oracle::families(&read_tsv_dir(&pair.join("old")));
    let new = oracle::families(&read_tsv_dir(&pair.join("new")));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TABLE2_HEADER.join(",").as_str()));
    let mut seen = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let got: Vec<u64> = f[1..].iter().map(|x| x.parse().unwrap()).collect();
        let (a, b, c, d) = oracle::table_row(&old, &new, 1980, 2016, f[0]);
        assert_eq!(got, vec![a, b, c, d], "row {}", f[0]);
        seen += 1;
    }
    assert_eq!(seen, 6);
    assert!(csv.with_file_name("t2.csv.manifest.json").exists());
    assert_clean(tmp.path());
}

#[test]
fn trends_on_empty_store_is_all_zero() {
    let tmp = TempDir::new().unwrap();
    let snap = tmp.path().join("empty");
    write_empty_snapshot(&snap);
    let out = tmp.path().join("trend.csv");
    ok(&["trends", "--input", s(&snap), "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2016 - 1980 + 1);
    assert!(rows.iter().all(|r| r.ends_with(",0")), "{text}");
}

#[test]
fn bad_header_exits_2_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let snap = tmp.path().join("bad");
    write_empty_snapshot(&snap);
    fs::write(snap.join("classifications.tsv"), "appln\tsymbol\n1\tY02E 10/70\n").unwrap();
    let out_dir = tmp.path().join("store");
    let out = patdrift(&["ingest", "--dir", s(&snap), "--label", "bad", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_of(&out);
    assert_eq!(err["error"]["kind"], "schema");
    assert_eq!(err["error"]["exit_code"], 2);
    assert!(!out_dir.exists());
    assert_clean(tmp.path());
}

#[test]
fn config_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"reclass_rate": 1.0}"#).unwrap();
    let out_dir = tmp.path().join("pair");
    let cases: Vec<Vec<&str>> = vec![
        vec!["synth", "--config", s(&cfg), "--out", s(&out_dir)],
        vec!["table2", "--old", "x", "--new", "y", "--from", "2020", "--to", "2000", "--out", s(&out_dir)],
        vec!["rank", "--no-such-flag"],
    ];
    for args in &cases {
        let out = patdrift(args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert_eq!(error_of(&out)["error"]["kind"], "config", "{args:?}");
    }
    fs::write(&cfg, r#"{"unknown_knob": 1}"#).unwrap();
    assert_eq!(patdrift(&["synth", "--config", s(&cfg), "--out", s(&out_dir)]).status.code(), Some(3));
    assert!(!out_dir.exists());
    assert_clean(tmp.path());
}

#[test]
fn help_exits_zero() {
    assert!(patdrift(&["--help"]).status.success());
    assert!(patdrift(&["effects", "--help"]).status.success());
}

#[test]
fn config_hash_is_stable_across_reruns() {
    let tmp = TempDir::new().unwrap();
    let pair = synth(tmp.path(), 5, 800);
    let hash = |name: &str| {
        let out = tmp.path().join(name);
        ok(&["effects", "--old", s(&pair.join("old")), "--new", s(&pair.join("new")), "--out", s(&out)]);
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    let first = hash("e1");
    assert_eq!(first.len(), 64);
    assert_eq!(first, hash("e2"));

    // A different window is a different configuration.
    let out = tmp.path().join("e3");
    ok(&["effects", "--old", s(&pair.join("old")), "--new", s(&pair.join("new")), "--from", "1990", "--out", s(&out)]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_ne!(m["config_hash"].as_str().unwrap(), first);
}

#[test]
fn rerun_replaces_existing_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("replay");
    ok(&["effects", "--replay-table2", "--out", s(&out)]);
    fs::write(out.join("stale.txt"), "old run").unwrap();
    ok(&["effects", "--replay-table2", "--out", s(&out)]);
    assert!(!out.join("stale.txt").exists());
    assert!(out.join("shares.json").exists());
    assert_clean(tmp.path());
}

#[test]
fn data_files_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let pair = synth(tmp.path(), 9, 3_000);
    let (old, new) = (pair.join("old"), pair.join("new"));
    for threads in ["1", "4"] {
        let dir = tmp.path().join(format!("t{threads}"));
        fs::create_dir_all(&dir).unwrap();
        ok(&["--threads", threads, "ingest", "--dir", s(&new), "--label", "new", "--out", s(&dir.join("store"))]);
        ok(&["--threads", threads, "effects", "--old", s(&old), "--new", s(&new), "--out", s(&dir.join("effects"))]);
        ok(&["--threads", threads, "classdrift", "--old", s(&old), "--new", s(&new), "--min-size", "10", "--out", s(&dir.join("drift"))]);
        ok(&["--threads", threads, "rank", "--by", "office", "--set", "expansion", "--old", s(&old), "--new", s(&new), "--out", s(&dir.join("rank.csv"))]);
    }
    let files = [
        "store/store.bin",
        "store/ingest_report.json",
        "effects/shares.json",
        "effects/group_c.csv",
        "effects/group_d.csv",
        "effects/group_histograms.csv",
        "drift/class_points.csv",
        "drift/fits.json",
        "drift/top_relative.csv",
        "rank.csv",
    ];
    for f in files {
        let a = fs::read(tmp.path().join("t1").join(f)).unwrap();
        let b = fs::read(tmp.path().join("t4").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}
