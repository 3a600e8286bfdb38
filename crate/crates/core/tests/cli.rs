use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mrs_vpr::bench::{generate, SyntheticSpec};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrs-vpr")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn small_spec(dir: &Path) -> String {
    let p = dir.join("spec.toml");
    fs::write(
        &p,
        "[synthetic]\nref_len = 600\ntest_len = 64\nnoise = 0.05\ndim = 64\n[bench]\ntrials = 2\n",
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

fn assert_manifest(dir: &Path, expected: &[&str]) {
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap().to_string())
        .collect();
    for name in expected {
        assert!(listed.iter().any(|p| p.ends_with(name)), "{name} missing from {listed:?}");
    }
    for p in &listed {
        assert!(fs::metadata(p).unwrap().len() > 0, "{p} is empty");
    }
}

#[test]
fn bench_writes_declared_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let out = dir.path().join("reports");
    let doc = json(&run(&["bench", "--spec", &spec, "--seed", "3", "--out", out.to_str().unwrap()]));
    assert_manifest(&out, &["report.json", "trials.csv", "pr_mrs.csv", "pr_baseline.csv"]);
    assert_eq!(doc["result"]["trials"].as_array().unwrap().len(), 2);
    let auc = doc["result"]["mrs"]["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    let header = fs::read_to_string(out.join("pr_mrs.csv")).unwrap();
    assert!(header.starts_with("recall,precision\n"));
}

#[test]
fn sweep_has_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let out = dir.path().join("sweep");
    let doc = json(&run(&[
        "sweep", "--spec", &spec, "--lmax", "1..4", "--tau", "1.0,1.5,2.0,2.5", "--trials", "1", "--out",
        out.to_str().unwrap(),
    ]));
    let rows = doc["result"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    // 64 / 8 = 8 coarsest frames at depth 4
    assert!(rows.iter().filter(|r| r["l_max"] == 4).all(|r| r["status"] == "infeasible"));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert_manifest(&out, &["sweep.json", "sweep.csv"]);
}

#[test]
fn synth_then_match_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let data = dir.path().join("data");
    let truth = json(&run(&["synth", "--spec", &spec, "--seed", "9", "--out", data.to_str().unwrap()]));
    assert_manifest(&data, &["reference.csv", "test.csv", "truth.json"]);
    let end = truth["result"]["end_index"].as_u64().unwrap();

    let (r, t) = (data.join("reference.csv"), data.join("test.csv"));
    let (r, t) = (r.to_str().unwrap(), t.to_str().unwrap());
    let out = dir.path().join("match");
    let m = json(&run(&["match", "--ref", r, "--test", t, "--seed", "1", "--out", out.to_str().unwrap()]));
    assert_eq!(m["result"]["best_index"].as_u64().unwrap(), end);
    assert!(m["timing"]["seconds"].as_f64().unwrap() >= 0.0);
    assert_manifest(&out, &["match.json", "particles.csv", "levels.csv"]);

    let b = json(&run(&["baseline", "--ref", r, "--test", t]));
    assert_eq!(b["result"]["best"]["end_index"].as_u64().unwrap(), end);
}

#[test]
fn image_directories_are_matched() {
    let dir = tempfile::tempdir().unwrap();
    let walk = generate(&SyntheticSpec { ref_len: 200, test_len: 1, dim: 32 * 24, seed: 4, ..SyntheticSpec::default() })
        .unwrap()
        .reference;
    let (rdir, tdir) = (dir.path().join("ref"), dir.path().join("test"));
    fs::create_dir_all(&rdir).unwrap();
    fs::create_dir_all(&tdir).unwrap();
    let to_png = |d: &mrs_vpr::Descriptor, path: &Path| {
        let px: Vec<u8> = d.values().iter().map(|v| (v * 255.0).round() as u8).collect();
        image::GrayImage::from_raw(32, 24, px).unwrap().save(path).unwrap();
    };
    for (k, d) in walk.iter().enumerate() {
        to_png(d, &rdir.join(format!("frame_{}.png", k + 1)));
    }
    for (k, d) in walk[120..160].iter().enumerate() {
        to_png(d, &tdir.join(format!("q{}.png", k + 1)));
    }
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[descriptor]\ngrid_width = 32\ngrid_height = 24\npatch = 4\n[pipeline]\nl_max = 2\n").unwrap();
    let m = json(&run(&[
        "match", "--ref", rdir.to_str().unwrap(), "--test", tdir.to_str().unwrap(), "--config",
        cfg.to_str().unwrap(), "--seed", "2",
    ]));
    assert_eq!(m["result"]["best_index"].as_u64().unwrap(), 160);
}

fn single_error_line(out: &Output) -> String {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    lines[0].to_string()
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[pipeline]\nunknown_key = 1\n").unwrap();
    let out = run(&["bench", "--spec", bad.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(single_error_line(&out).starts_with("error: kind=config message="));
    assert!(out.stdout.is_empty());

    let out = run(&["match", "--ref", "missing.csv", "--test", "missing.csv", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(single_error_line(&out).starts_with("error: kind=io"));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let out = run(&["baseline", "--ref", ragged.to_str().unwrap(), "--test", ragged.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(single_error_line(&out).contains("row 2"));

    let out = run(&["match", "--ref", "a.csv", "--test", "b.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(single_error_line(&out).contains("--seed"));
}
