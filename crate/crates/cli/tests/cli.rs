use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_instgen");

fn root() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).current_dir(root()).args(args).output().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn parse_reports_domain_shape() {
    let o = run(&["parse", "domains/floor-tile.pddl", "domains/floor-tile-toy.pddl"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["predicates"], 10);
    assert_eq!(v["validity"]["constraints"], 4);
    assert_eq!(v["validity"]["init"], 3);
    assert_eq!(v["problem"]["init"], 16);
}

#[test]
fn validate_golden_and_fault() {
    let o = run(&["validate", "domains/floor-tile.pddl", "domains/floor-tile-toy.pddl"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o), serde_json::json!({"pass": true, "violations": []}));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pddl");
    let text = fs::read_to_string(root().join("domains/floor-tile-toy.pddl")).unwrap();
    fs::write(&bad, text.replace("(clear tile_0-0)", "(clear tile_0-0) (robot-at robot1 tile_0-0)")).unwrap();
    let o = run(&["validate", "domains/floor-tile.pddl", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["pass"], false);
}

#[test]
fn grade_trivial_goal() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("triv.pddl");
    let text = fs::read_to_string(root().join("domains/floor-tile-toy.pddl")).unwrap();
    let goal = "(:goal (and (painted tile_0-0 white) (painted tile_1-0 black)))";
    assert!(text.contains(goal));
    fs::write(&p, text.replace(goal, "(:goal (and (clear tile_0-0)))")).unwrap();
    let o = run(&["grade", "domains/floor-tile.pddl", p.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!((v["solvable"].as_str(), v["plan_length"].as_u64()), (Some("Yes"), Some(0)));
}

#[test]
fn generate_writes_valid_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let args = |o: &str, jobs: &str| {
        vec![
            "generate".to_string(),
            "domains/floor-tile.pddl".into(),
            "--params".into(),
            "tile_size=2,n_robot=2,n_color=2".into(),
            "--count".into(),
            "5".into(),
            "--seed".into(),
            "11".into(),
            "--jobs".into(),
            jobs.into(),
            "--out".into(),
            out(o),
        ]
    };
    let a: Vec<String> = args("a", "1");
    let o = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b: Vec<String> = args("b", "4");
    assert!(run(&b.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    let mut distinct = std::collections::BTreeSet::new();
    for i in 1..=5 {
        let name = format!("inst_{i:04}.pddl");
        let x = fs::read(dir.path().join("a").join(&name)).unwrap();
        assert_eq!(x, fs::read(dir.path().join("b").join(&name)).unwrap());
        distinct.insert(x);
        let meta: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("a").join(format!("inst_{i:04}.meta.json"))).unwrap()).unwrap();
        assert_eq!(meta["valid"], true);
        assert_eq!(meta["seed"], 10 + i);
        let v = run(&["validate", "domains/floor-tile.pddl", dir.path().join("a").join(&name).to_str().unwrap()]);
        assert!(v.status.success());
    }
    assert!(distinct.len() > 1);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "generate");
    assert_eq!(m["seed"], 11);
}

#[test]
fn generate_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none");
    let o = run(&["generate", "domains/floor-tile.pddl", "--params", "tile_size=2,n_robot=1,n_color=1", "--count", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(!out.exists());

    let plain = dir.path().join("plain.pddl");
    let text = fs::read_to_string(root().join("domains/floor-tile.pddl")).unwrap();
    fs::write(&plain, format!("{})", &text[..text.find("(:instance-constraints").unwrap()])).unwrap();
    let o = run(&["generate", plain.to_str().unwrap(), "--params", "tile_size=2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no validity specification"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["generate"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "domains/floor-tile-gen.pddl", "--sizes", "x"]).status.code(), Some(2));
    assert_eq!(run(&["translate", "domains/floor-tile.pddl", "--params", "tile_size"]).status.code(), Some(2));
}

#[test]
fn translate_and_bench_counts() {
    let o = run(&["translate", "domains/floor-tile.pddl", "--params", "tile_size=3,n_robot=1,n_color=1", "--encoding", "low"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["counts"]["structural"], 4 * 81);
    let o = run(&["bench", "domains/floor-tile-gen.pddl", "--sizes", "2", "--reps", "1"]);
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tile_size,encoding,constraint_count,gen_time_ms,result");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,low,64,"));
    assert!(lines[2].starts_with("2,high,16,"));
}

#[test]
fn tune_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tune.json");
    fs::write(
        &cfg,
        r#"{"params": {"tile_size": {"lower": 3, "upper": 3}, "n_robot": {"lower": 1, "upper": 1}, "n_color": {"lower": 1, "upper": 1}},
            "target": {"solvable": true}, "budget": 4, "seed": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("result.json");
    let o = run(&["tune", "domains/floor-tile-gen.pddl", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["result"]["best"]["assignment"]["tile_size"], 3);
    assert_eq!(v["result"]["evaluations"], 2);
    assert!(dir.path().join("result.json.manifest.json").exists());
    // The generated instances can be requested from the tuning result.
    let gen = dir.path().join("gen");
    let o = run(&["generate", "domains/floor-tile-gen.pddl", "--params", out.to_str().unwrap(), "--out", gen.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
