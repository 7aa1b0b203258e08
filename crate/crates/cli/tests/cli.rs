use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mission-compiler"));
    c.env("MISSION_COMPILER_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn world(dir: &Path) -> PathBuf {
    let out = run(&["gen-world", "--out", s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("scenario.json")
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn replan(scenario: &Path, perturb: &str, extra: &[&str]) -> (Output, Option<Value>) {
    let dir = scenario.parent().unwrap();
    let p = dir.join("perturb.facts");
    fs::write(&p, perturb).unwrap();
    let mut args = vec!["replan", "--scenario", s(scenario), "--perturb", s(&p)];
    args.extend_from_slice(extra);
    let out = run(&args);
    let report = serde_json::from_slice(&out.stdout).ok();
    (out, report)
}

#[test]
fn plan_is_deterministic_and_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = world(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["plan", "--scenario", s(&scenario), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tensors"], 21);
    for f in manifest["files"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    for f in ["manifest.json", "plan.geojson", "metrics.json", "heatmaps/evaluation_0.pgm"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let geo: Value = serde_json::from_slice(&fs::read(a.join("plan.geojson")).unwrap()).unwrap();
    assert_eq!(geo["features"].as_array().unwrap().len(), 3);
    assert!(fs::read(a.join("heatmaps/evaluation_0.pgm")).unwrap().starts_with(b"P5"));
    assert!(a.join("timings.json").exists());
}

#[test]
fn presets_change_the_geojson() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = world(tmp.path());
    let mut outputs = Vec::new();
    for preset in ["naive", "poi_focus"] {
        let out = tmp.path().join(preset);
        let o = run(&["plan", "--scenario", s(&scenario), "--out", s(&out), "--preset", preset]);
        assert!(o.status.success());
        outputs.push(fs::read(out.join("plan.geojson")).unwrap());
    }
    assert_ne!(outputs[0], outputs[1]);
    let o = run(&["plan", "--scenario", s(&scenario), "--out", s(&tmp.path().join("x")), "--preset", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = world(tmp.path());
    assert_eq!(run(&["validate", "--scenario", s(&scenario)]).status.code(), Some(0));

    let missing = run(&["validate", "--scenario", s(&tmp.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(3));

    let mut doc: Value = serde_json::from_slice(&fs::read(&scenario).unwrap()).unwrap();
    doc["windows"][2]["confidence"] = 1.5.into();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, serde_json::to_vec(&doc).unwrap()).unwrap();
    let o = run(&["validate", "--scenario", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ex:window/2"), "{err}");

    // committing the window holding a dirty change cannot be satisfied
    let (o, _) = replan(&scenario, "= ex:window/2 ex:confidence 0.3\n", &["--committed-through", "2"]);
    assert_eq!(o.status.code(), Some(1));

    // the whole basin closed in the last window leaves nowhere to go
    let wall = "\
ex:constraint/wall ex:type ex:Constraint
ex:constraint/wall ex:kind \"no_go\"
ex:constraint/wall geo:asWKT \"POLYGON((-91 25,-85 25,-85 30,-91 30,-91 25))\"^^wkt
ex:constraint/wall ex:bufferCells 0
ex:constraint/wall ex:appliesIn ex:window/6
";
    let (o, _) = replan(&scenario, wall, &["--committed-through", "5"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn corrupt_grid_fails_without_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = world(tmp.path());
    fs::write(tmp.path().join("grids/base_0.grd"), b"not a grid").unwrap();
    let out = tmp.path().join("run");
    let o = run(&["plan", "--scenario", s(&scenario), "--out", s(&out)]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("base_0.grd"));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn replan_counts_follow_the_dirty_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = world(tmp.path());

    let (o, report) = replan(&scenario, "# nothing\n", &[]);
    assert!(o.status.success());
    let r = report.unwrap();
    assert_eq!(r["tensors_recompiled"], 0);
    assert_eq!(r["plan_changed"], false);

    let storm = "\
ex:constraint/storm ex:type ex:Constraint
ex:constraint/storm ex:kind \"no_go\"
ex:constraint/storm geo:asWKT \"POLYGON((-87.8 27.2,-87.2 27.2,-87.2 27.8,-87.8 27.8,-87.8 27.2))\"^^wkt
ex:constraint/storm ex:bufferCells 0
ex:constraint/storm ex:appliesIn ex:window/4
ex:constraint/storm ex:appliesIn ex:window/5
ex:constraint/storm ex:appliesIn ex:window/6
";
    let (o, report) = replan(&scenario, storm, &["--committed-through", "3", "--compare-full"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report.unwrap();
    assert_eq!(r["dirty_windows"], serde_json::json!([4, 5, 6]));
    assert_eq!(r["tensors_recompiled"], 9);
    assert_eq!(r["tensors_reused"], 12);
    assert_eq!(r["new_metrics"]["hard_violations"], 0);
    assert!(r["full_ms"].is_number());

    let (o, report) = replan(&scenario, "= ex:policy/SAFE ex:gamma_front 1.5^^real\n", &[]);
    assert!(o.status.success());
    let r = report.unwrap();
    assert_eq!(r["tensors_recompiled"], r["total_tensors"]);
}

#[test]
fn queries_print_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = world(tmp.path());
    let out = tmp.path().join("run");
    assert!(run(&["plan", "--scenario", s(&scenario), "--out", s(&out)]).status.success());
    let store = out.join("world.facts");

    let o = run(&["query", "--store", s(&store), "--audit"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json_lines(&o);
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r["query"] == "audit"));

    let o = run(&["query", "--store", s(&store), "--provenance", "ex:tensor/alpha/0"]);
    let rows = json_lines(&o);
    let sources: Vec<&str> = rows[0]["sources"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(sources.contains(&"ex:layer/base/0"), "{sources:?}");
    assert!(sources.contains(&"ex:policy/FAST"), "{sources:?}");

    let o = run(&["query", "--store", s(&store), "--energy-fraction", "0.0"]);
    assert!(o.status.success());
    let hits = json_lines(&o);
    assert!(!hits.is_empty());
    let o = run(&["query", "--store", s(&store), "--energy-fraction", "10.0"]);
    assert!(json_lines(&o).is_empty());

    let o = run(&["query", "--store", s(&store)]);
    assert_eq!(o.status.code(), Some(1));
}
