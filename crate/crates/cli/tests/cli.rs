use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hopclimb::anchors::AnchorPoint;
use hopclimb::geometry::Vec3;
use hopclimb::planner_local::HopPlan;
use hopclimb::scenegraph::{build_graph, GraphOptions, SceneGraph};

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn hopclimb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopclimb")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = hopclimb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// scan through plan-local on the bundled crag, artifacts in `dir`.
fn crag_chain(dir: &Path) -> PathBuf {
    let cfg = manifest("tests/golden/crag.toml");
    let cfg = cfg.to_str().unwrap();
    let terrain = manifest("assets/crag.obj");
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    ok(&["scan", "--config", cfg, "--terrain", terrain.to_str().unwrap(), "--pose", "0,0,2.5", "--out", &p("cloud.xyz")]);
    ok(&["normals", "--config", cfg, "--input", &p("cloud.xyz"), "--out", &p("normals.ply")]);
    ok(&["reconstruct", "--config", cfg, "--input", &p("normals.ply"), "--out", &p("mesh.obj")]);
    ok(&["anchors", "--config", cfg, "--mesh", &p("mesh.obj"), "--out", &p("anchors.json")]);
    ok(&["graph", "--config", cfg, "--anchors", &p("anchors.json"), "--out", &p("graph.json")]);
    #[rustfmt::skip]
    ok(&["plan-local", "--config", cfg, "--graph", &p("graph.json"),
        "--start", "1723", "--start", "1895", "--start", "1719", "--start", "1825",
        "--goal=-2,3,0", "--out", &p("plan.json")]);
    dir.join("plan.json")
}

const ARTIFACTS: [&str; 6] = ["cloud.xyz", "normals.ply", "mesh.obj", "anchors.json", "graph.json", "plan.json"];

#[test]
fn crag_chain_reproduces_the_golden_plan_and_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let plan = crag_chain(a.path());
    crag_chain(b.path());
    assert_eq!(fs::read_to_string(plan).unwrap(), fs::read_to_string(manifest("tests/golden/crag_plan.json")).unwrap());
    for f in ARTIFACTS {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }

    // Interchange round trip: import then re-export is the identity.
    let text = fs::read_to_string(a.path().join("graph.json")).unwrap();
    let graph: SceneGraph<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&graph).unwrap() + "\n", text);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("plan.json")).unwrap()).unwrap();
    for robot in doc["robots"].as_array().unwrap() {
        let plan: HopPlan<f64> = serde_json::from_value(robot["plan"].clone()).unwrap();
        assert_eq!(serde_json::to_value(&plan).unwrap(), robot["plan"]);
        assert!(plan.anchors.iter().all(|&id| graph.anchor(id).is_some()));
    }

    // The overlay carries the surface, the anchors and one polyline per robot.
    let obj = a.path().join("overlay.obj");
    #[rustfmt::skip]
    ok(&["export", "--mesh", a.path().join("mesh.obj").to_str().unwrap(),
        "--graph", a.path().join("graph.json").to_str().unwrap(),
        "--plan", a.path().join("plan.json").to_str().unwrap(),
        "--out", obj.to_str().unwrap()]);
    let text = fs::read_to_string(obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("l ")).count(), 4);
    for g in ["o surface", "o anchors", "o robot1", "o robot4"] {
        assert!(text.lines().any(|l| l == g), "missing {g}");
    }
    assert!(text.lines().filter(|l| l.starts_with("v ")).all(|l| l.split_whitespace().count() == 7));
}

fn anchor(id: usize, x: f64) -> AnchorPoint<f64> {
    AnchorPoint {
        id,
        position: Vec3::new(x, 0.0, 0.0),
        normal: Vec3::new(0.0, 0.0, 1.0),
        flatness: 0.0,
        flatness_norm: 0.0,
        height_risk: 0.0,
        r: 0.0,
    }
}

/// Two pairs of anchors 1 m apart, the pairs 5 m apart.
fn split_graph(dir: &Path) -> PathBuf {
    let anchors = [anchor(0, 0.0), anchor(1, 1.0), anchor(2, 6.0), anchor(3, 7.0)];
    let g = build_graph(&anchors, 1.5, &GraphOptions::default()).unwrap();
    let path = dir.join("split.json");
    fs::write(&path, serde_json::to_string_pretty(&g).unwrap()).unwrap();
    path
}

#[test]
fn unreachable_goal_exits_3_with_no_path() {
    let dir = tempfile::tempdir().unwrap();
    let graph = split_graph(dir.path());
    let out_plan = dir.path().join("plan.json");
    #[rustfmt::skip]
    let out = hopclimb(&["plan-local", "--graph", graph.to_str().unwrap(), "--start", "0",
        "--goal", "7,0,0", "--hub", "3.5,0,0", "--r-max", "10", "--out", out_plan.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NoPath"), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_plan).unwrap()).unwrap();
    assert_eq!(doc["goal"], 3);
    assert_eq!(doc["robots"][0]["error"], "NoPath");

    // Reachable within the first pair.
    #[rustfmt::skip]
    let out = hopclimb(&["plan-local", "--graph", graph.to_str().unwrap(), "--start", "0",
        "--goal", "1", "--out", dir.path().join("ok.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(hopclimb(&[]).status.code(), Some(1));
    assert_eq!(hopclimb(&["teleport"]).status.code(), Some(1));
    assert_eq!(hopclimb(&["normals", "--input", "x.xyz"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let graph = split_graph(dir.path());
    let out = dir.path().join("p.json");
    #[rustfmt::skip]
    let bad_flag = hopclimb(&["plan-local", "--graph", graph.to_str().unwrap(), "--start", "0", "--goal", "1",
        "--keep-fraction", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(bad_flag.status.code(), Some(1));
    let bad_point = hopclimb(&["plan-local", "--graph", graph.to_str().unwrap(), "--start", "0", "--goal", "1,2", "--out", out.to_str().unwrap()]);
    assert_eq!(bad_point.status.code(), Some(1));
    assert!(hopclimb(&["--help"]).status.success());
}

#[test]
fn unreadable_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("bad.xyz");
    fs::write(&cloud, "0 0 0\n1 nan 2\n").unwrap();
    let out = hopclimb(&["normals", "--input", cloud.to_str().unwrap(), "--out", dir.path().join("n.ply").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let missing = hopclimb(&["graph", "--anchors", dir.path().join("none.json").to_str().unwrap(), "--out", "g.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[planner]\nhmax = 3.0\n").unwrap();
    let graph = split_graph(dir.path());
    #[rustfmt::skip]
    let out = hopclimb(&["plan-local", "--config", cfg.to_str().unwrap(), "--graph", graph.to_str().unwrap(),
        "--start", "0", "--goal", "1", "--out", dir.path().join("p.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "unknown config key must be rejected");
}

#[test]
fn empty_anchor_set_is_a_pipeline_error() {
    let dir = tempfile::tempdir().unwrap();
    let anchors = dir.path().join("a.json");
    fs::write(&anchors, "[]\n").unwrap();
    let out = hopclimb(&["graph", "--anchors", anchors.to_str().unwrap(), "--out", dir.path().join("g.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn plan_global_reroutes_and_reports_no_route() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"width": 4, "height": 5, "cell_size": 5.6, "start": [1, 1], "goal": [1, 3]}"#).unwrap();
    let route = dir.path().join("route.json");
    ok(&["plan-global", "--grid", grid.to_str().unwrap(), "--out", route.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&route).unwrap()).unwrap();
    assert_eq!(r["cells"], serde_json::json!([[1, 1], [1, 2], [1, 3]]));

    #[rustfmt::skip]
    ok(&["plan-global", "--grid", grid.to_str().unwrap(), "--from", "1,2", "--wall", "1,2:1,3",
        "--out", route.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&route).unwrap()).unwrap();
    assert_eq!(r["cells"], serde_json::json!([[1, 2], [2, 2], [2, 3], [1, 3]]));

    let mut args = vec!["plan-global", "--grid", grid.to_str().unwrap(), "--out", route.to_str().unwrap()];
    for w in ["1,3:1,2", "1,3:0,3", "1,3:2,3", "1,3:1,4"] {
        args.extend(["--wall", w]);
    }
    let out = hopclimb(&args);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NoRoute"));

    let out = hopclimb(&["plan-global", "--grid", grid.to_str().unwrap(), "--wall", "0,0:2,2", "--out", route.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "non-adjacent wall is a usage error");
}

#[test]
fn simulate_writes_a_replayable_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("open.jsonl");
    ok(&["simulate", "--scenario", "open-ground", "--seed", "3", "--out", log.to_str().unwrap()]);
    let text = fs::read_to_string(&log).unwrap();
    let parsed = hopclimb::sim::MissionLog::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(parsed.status(), Some(&hopclimb::sim::MissionStatus::Success));
    let mut again = Vec::new();
    parsed.write_jsonl(&mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);

    let boxed = dir.path().join("box.jsonl");
    let out = hopclimb(&["simulate", "--scenario", "box-canyon", "--seed", "2", "--out", boxed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NoRoute"));
    assert!(boxed.exists());
}

#[test]
fn bundled_configs_load() {
    let large = hopclimb::config::PipelineConfig::load(&manifest("assets/large_scale.toml")).unwrap();
    assert_eq!(large.anchors.keep_fraction, 0.15);
    assert_eq!(large.planner.h_max, 10.0);
    hopclimb::config::PipelineConfig::load(&manifest("tests/golden/crag.toml")).unwrap();
}

#[test]
fn bundled_crag_matches_its_generator() {
    let mut buf = Vec::new();
    hopclimb::sim::terrain::crag(7).write_obj_to(&mut buf).unwrap();
    assert_eq!(buf, fs::read(manifest("assets/crag.obj")).unwrap());
}
