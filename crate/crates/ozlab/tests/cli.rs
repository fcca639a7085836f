use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ozlab::output::{verify_digests, RunManifest};
use ozlab::report::{check_header, SCHEMAS};

fn ozlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ozlab"))
        .args(args)
        .env_remove("OZLAB_CACHE")
        .output()
        .unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, "[model]\np = 0.35\n\n[two_point]\nn_max = 12\nsamples = 50_000\n").unwrap();
    cfg
}

#[test]
fn run_writes_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("q1");
    let o = ozlab(&["run", path(&configs().join("q1_oz.toml")), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m.status, "ok");
    assert_eq!(m.run_id.len(), 12);
    assert!(verify_digests(&out, &m).unwrap().is_empty());
    for name in ["two_point.csv", "lengths.csv", "xi_fits.csv", "resolved_config.toml", "plots.json"] {
        assert!(m.files.iter().any(|f| f.path == name), "{name} missing from manifest");
    }
    // Every row carries the run id and every header is the documented one.
    for f in m.files.iter().filter(|f| f.path.ends_with(".csv")) {
        let p = out.join(&f.path);
        check_header(&p).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        for rec in r.records() {
            assert_eq!(&rec.unwrap()[0], m.run_id);
        }
    }
    // The resolved configuration parses back to the same run.
    let again = ozlab::config::ExperimentConfig::parse(&m.resolved_config).unwrap();
    assert_eq!(ozlab::output::run_id(&again.resolved()), m.run_id);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "42"), (&b, "42"), (&c, "43")] {
        let o = ozlab(&["--seed", seed, "--threads", "1", "run", "--config", path(&cfg), "--out", path(dir)]);
        assert!(o.status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("two_point.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(manifest(&a).run_id, manifest(&b).run_id);
    assert_ne!(manifest(&a).run_id, manifest(&c).run_id);
}

#[test]
fn thread_count_does_not_change_growth_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(ozlab(&["--threads", "1", "run", path(&cfg), "--out", path(&a)]).status.success());
    assert!(ozlab(&["--threads", "3", "run", path(&cfg), "--out", path(&b)]).status.success());
    let read = |d: &Path| std::fs::read(d.join("two_point.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn geometric_law_file_solves_to_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("k");
    let o = ozlab(&["kmrp", "solve", path(&configs().join("geometric_law.json")), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("rates.csv")).unwrap();
    let row: std::collections::HashMap<String, String> = r.deserialize().next().unwrap().unwrap();
    let rp: f64 = row["r_p"].parse().unwrap();
    assert!((rp - 2.0).abs() < 1e-12, "{rp}");
    let zeta: f64 = row["zeta"].parse().unwrap();
    assert!((zeta - 1.0 / 2f64.ln()).abs() < 1e-12);
    // The law copied into the run reads back as a law file.
    let law = std::fs::read_to_string(out.join("law.json")).unwrap();
    ozlab_core::kmrp::StepLaw::from_json(&law).unwrap();
}

#[test]
fn kmrp_check_on_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let law = tmp.path().join("law.json");
    std::fs::write(
        &law,
        r#"{"kappa": 0.4, "initial": [[1, 0, 1]], "interior": [[1, -1, 0.2], [1, 1, 0.2], [2, 0, 0.2]], "tail_rate": null}"#,
    )
    .unwrap();
    let out = tmp.path().join("k");
    let o = ozlab(&["kmrp", "check", path(&law), "--n", "200", "--trials", "5000", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["rates.csv", "clt_histogram.csv", "clt_summary.csv", "bridge.csv"] {
        check_header(&out.join(f)).unwrap();
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let o = ozlab(&["run", path(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
    assert_eq!(ozlab(&["run"]).status.code(), Some(2));
    assert_eq!(ozlab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ozlab(&["run", "--bogus", "x"]).status.code(), Some(2));
    assert_eq!(ozlab(&["kmrp", "solve", path(&missing)]).status.code(), Some(2));
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[model]\np = 0.35\ncolour = \"red\"\n").unwrap();
    assert_eq!(ozlab(&["run", path(&bad)]).status.code(), Some(2));
    std::fs::write(&bad, "[model]\np = 0.7\n[halfspace]\n").unwrap();
    let o = ozlab(&["run", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_c"));
}

#[test]
fn stage_failure_leaves_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let law = tmp.path().join("periodic.json");
    std::fs::write(&law, r#"{"kappa": 0.4, "initial": [[2, 0, 1]], "interior": [[2, 0, 0.3], [4, 0, 0.3]]}"#).unwrap();
    let out = tmp.path().join("k");
    let o = ozlab(&["kmrp", "solve", path(&law), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&out);
    assert_eq!(m.status, "failed");
    assert!(m.error.unwrap().contains("period"));
    assert!(m.files.iter().any(|f| f.path == "law.json"));
}

#[test]
fn explore_writes_traces_with_run_id() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let o = ozlab(&[
        "explore", "--p", "0.35", "--thickness", "1", "--n-slices", "10", "--wanted", "300", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let id = manifest(&out).run_id;
    let traces = std::fs::read_to_string(out.join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 300);
    for line in traces.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["run_id"], id.as_str());
        assert!(v["X"].as_array().unwrap().len() >= 11);
    }
    for f in ["gaps.csv", "gap_lengths.csv", "cones.csv", "pieces.csv", "exploration.csv"] {
        check_header(&out.join(f)).unwrap();
    }
}

#[test]
fn report_checks_digests_and_lists_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    assert!(ozlab(&["run", path(&small_config(tmp.path())), "--out", path(&out)]).status.success());
    let o = ozlab(&["report", path(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("oz_fit"));
    // Re-staging reproduces the plan written by the run.
    assert!(verify_digests(&out, &manifest(&out)).unwrap().is_empty());
    std::fs::write(out.join("two_point.csv"), "run_id\n").unwrap();
    assert_eq!(ozlab(&["report", path(&out)]).status.code(), Some(1));
    assert_eq!(ozlab(&["report", path(&tmp.path().join("none"))]).status.code(), Some(2));
}

#[test]
fn cache_reuses_surveys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cache = tmp.path().join("cache");
    let run = |dir: &Path| {
        Command::new(env!("CARGO_BIN_EXE_ozlab"))
            .args(["run", path(&cfg), "--out", path(dir)])
            .env("OZLAB_CACHE", &cache)
            .output()
            .unwrap()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&a).status.success());
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
    assert!(run(&b).status.success());
    assert_eq!(
        std::fs::read(a.join("two_point.csv")).unwrap(),
        std::fs::read(b.join("two_point.csv")).unwrap()
    );
}

#[test]
fn verify_exact_passes() {
    let o = ozlab(&["verify", "exact"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn schemas_are_unique() {
    for (i, (a, _)) in SCHEMAS.iter().enumerate() {
        assert!(SCHEMAS[i + 1..].iter().all(|(b, _)| a != b));
    }
}
