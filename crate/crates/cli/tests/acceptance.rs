//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use instgen::model::{compile, Encoding, GeneratorConfig};
use instgen::pddl::{emit_problem, parse_domain, parse_problem, DomainSpec, GroundAtom, ProblemInstance};
use instgen::pipeline::{bench_row, evaluate, Generator};
use instgen::plan::{
    count_reachable, ground, solve_plan, validate_instance, validate_plan, Budget, PlanOutcome, PlanValidity,
    Search, ViolationKind,
};
use instgen::solve::{decode, enumerate_all, enumerate_blocking, SolveOptions, SolveResult};
use instgen::tune::{score, Interval, TuneTarget};

const BIN: &str = env!("CARGO_BIN_EXE_instgen");
const FLOOR_TILE: &str = include_str!("../../../domains/floor-tile.pddl");
const FLOOR_TILE_GEN: &str = include_str!("../../../domains/floor-tile-gen.pddl");
const TOY: &str = include_str!("../../../domains/floor-tile-toy.pddl");

fn root() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

fn domain(text: &str) -> DomainSpec {
    parse_domain(text, true).unwrap()
}

fn cfg(s: u64, r: u64, c: u64) -> GeneratorConfig {
    GeneratorConfig::new([("tile_size", s), ("n_robot", r), ("n_color", c)], 0)
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

/// Structural counts from `bench --count-only` for s = 2..12.
fn count_law() -> Outcome {
    let start = Instant::now();
    let out = Command::new(BIN)
        .current_dir(root())
        .args(["bench", "domains/floor-tile.pddl", "--sizes", "2..12", "--count-only", "--params", "n_robot=1,n_color=1"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let csv = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let s: u64 = f[0].parse().unwrap();
        let n: u64 = f[2].parse().unwrap();
        let want = match f[1] {
            "low" => 4 * s.pow(4),
            _ => 4 * s * s,
        };
        ensure(n == want, || format!("s={s} {}: {n} != {want}", f[1]))?;
        rows += 1;
    }
    ensure(rows == 22, || format!("{rows} rows"))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("22 rows exact, Low 4s^4 and High 4s^2, in {:.2?}", start.elapsed()))
}

/// High beats Low from s = 6, High finishes s = 20 under 10 s, and both
/// curves are nondecreasing within 20% (plus 2 ms of timer resolution).
fn runtime_gap() -> Outcome {
    let d = domain(FLOOR_TILE_GEN);
    let base = GeneratorConfig::new([("n_robot", 1), ("n_color", 1)], 0);
    let cap = Duration::from_secs(300);
    let mut low = Vec::new();
    let mut high = Vec::new();
    for s in 6..=20 {
        for (enc, acc) in [(Encoding::Low, &mut low), (Encoding::High, &mut high)] {
            let r = bench_row(&d, &base, s, enc, Some(cap), 3).map_err(|e| e.to_string())?;
            acc.push((s, r.gen_time_ms, r.result));
        }
    }
    for (l, h) in low.iter().zip(&high) {
        if l.2 != SolveResult::Sat {
            // Sizes past the Low cap only need High to finish.
            continue;
        }
        ensure(h.2 == SolveResult::Sat, || format!("High failed at s={}", h.0))?;
        ensure(h.1 < l.1, || format!("s={}: High {} ms >= Low {} ms", h.0, h.1, l.1))?;
    }
    let h20 = high.last().unwrap();
    ensure(h20.2 == SolveResult::Sat && h20.1 < 10_000, || format!("High s=20: {:?}", h20))?;
    for curve in [&low, &high] {
        for w in curve.windows(2) {
            let (a, b) = (w[0].1 as f64, w[1].1 as f64);
            ensure(b * 1.2 + 2.0 >= a, || format!("non-monotone: s={} {} ms, s={} {} ms", w[0].0, a, w[1].0, b))?;
        }
    }
    let l20 = low.last().unwrap();
    Ok(format!("s=20: Low {} ms ({:?}), High {} ms", l20.1, l20.2, h20.1))
}

/// Golden instance passes; each single-atom fault fails in its category.
fn golden_fidelity() -> Outcome {
    use ViolationKind::*;
    let start = Instant::now();
    let d = domain(FLOOR_TILE);
    let golden = parse_problem(TOY, &d).map_err(|e| e.to_string())?;
    let c = cfg(2, 2, 2);
    let r = validate_instance(&d, &golden, Some(&c)).map_err(|e| e.to_string())?;
    ensure(r.is_valid(), || format!("golden fails: {:?}", r.violations))?;
    let a = |p: &str, args: &[&str]| GroundAtom::new(p, args.iter().copied());
    type Fault = (&'static str, fn(&mut ProblemInstance, GroundAtom) -> bool, GroundAtom, &'static [ViolationKind]);
    let add_init: fn(&mut ProblemInstance, GroundAtom) -> bool = |p, x| p.init.insert(x);
    let del_init: fn(&mut ProblemInstance, GroundAtom) -> bool = |p, x| p.init.remove(&x);
    let add_goal: fn(&mut ProblemInstance, GroundAtom) -> bool = |p, x| p.goal.insert(x);
    let faults: Vec<Fault> = vec![
        ("extra robot-at", add_init, a("robot-at", &["robot1", "tile_0-0"]), &[Cardinality]),
        ("removed robot-at", del_init, a("robot-at", &["robot2", "tile_1-1"]), &[Cardinality]),
        ("extra robot-has", add_init, a("robot-has", &["robot1", "black"]), &[Cardinality]),
        ("painted in init", add_init, a("painted", &["tile_0-0", "white"]), &[Cardinality]),
        ("removed up", del_init, a("up", &["tile_0-1", "tile_1-1"]), &[Structural, InverseCoherence]),
        ("removed down", del_init, a("down", &["tile_1-0", "tile_0-0"]), &[Structural, InverseCoherence]),
        ("extra left", add_init, a("left", &["tile_0-1", "tile_0-0"]), &[Structural, InverseCoherence]),
        ("extra up", add_init, a("up", &["tile_1-1", "tile_0-1"]), &[Structural, InverseCoherence]),
        ("clear in goal", add_goal, a("clear", &["tile_0-0"]), &[Appear]),
        ("other clear in goal", add_goal, a("clear", &["tile_1-1"]), &[Appear]),
    ];
    for (name, mutate, atom, kinds) in faults {
        let mut p = golden.clone();
        ensure(mutate(&mut p, atom), || format!("{name}: mutation was a no-op"))?;
        let r = validate_instance(&d, &p, Some(&c)).map_err(|e| e.to_string())?;
        let want: BTreeSet<_> = kinds.iter().copied().collect();
        ensure(!r.is_valid() && r.kinds() == want, || format!("{name}: got {:?}", r.kinds()))?;
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("golden passes, 10/10 faults caught in {:.1?}", start.elapsed()))
}

/// Seeds 1..=100, five configurations, both encodings: all valid.
fn generator_soundness() -> Outcome {
    let start = Instant::now();
    let d = domain(FLOOR_TILE);
    let configs = [cfg(2, 1, 1), cfg(2, 2, 2), cfg(3, 2, 2), cfg(4, 3, 2), cfg(5, 2, 3)];
    let mut n = 0;
    for c in &configs {
        for enc in [Encoding::Low, Encoding::High] {
            let g = Generator::new(&d, c, enc).map_err(|e| e.to_string())?;
            for seed in 1..=100 {
                let inst = g
                    .sample(seed, &SolveOptions::default())
                    .0
                    .map_err(|e| format!("{c} {enc} seed {seed}: {e}"))?;
                let r = validate_instance(&d, &inst, Some(c)).map_err(|e| e.to_string())?;
                ensure(r.is_valid(), || format!("{c} {enc} seed {seed}: {:?}", r.violations))?;
                n += 1;
            }
        }
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("{n}/1000 valid in {:.1?}", start.elapsed()))
}

/// Low by solution blocking and High by exhaustive search yield the same
/// decoded instances.
fn encoding_equivalence() -> Outcome {
    let start = Instant::now();
    let d = domain(FLOOR_TILE_GEN);
    let mut sizes = Vec::new();
    for r in 1..=2 {
        for col in 1..=2 {
            let c = cfg(2, r, col);
            let low = compile(&d, &c, Encoding::Low).map_err(|e| e.to_string())?;
            let high = compile(&d, &c, Encoding::High).map_err(|e| e.to_string())?;
            let set = |m, sols: Vec<instgen::solve::Assignment>| -> BTreeSet<String> {
                sols.iter()
                    .map(|a| emit_problem(&decode(m, a, &d, &c).unwrap().without_provenance()))
                    .collect()
            };
            let a = set(&low, enumerate_blocking(&low, 1, 1_000_000));
            let b = set(&high, enumerate_all(&high, 1_000_000));
            ensure(a == b, || format!("{c}: {} vs {} instances", a.len(), b.len()))?;
            sizes.push(a.len());
        }
    }
    within(Duration::from_secs(60), start)?;
    Ok(format!("solution sets equal, sizes {sizes:?}, in {:.1?}", start.elapsed()))
}

/// Uniformly random init states almost never pass; solver output always does.
fn random_validity_gap() -> Outcome {
    let start = Instant::now();
    let d = domain(FLOOR_TILE);
    let c = cfg(2, 2, 2);
    let g = Generator::new(&d, &c, Encoding::High).map_err(|e| e.to_string())?;
    let template = g.sample(0, &SolveOptions::default()).0.map_err(|e| e.to_string())?;
    let atoms = ground(&d, &template).map_err(|e| e.to_string())?.atoms;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trials = 10_000;
    let mut random_pass = 0;
    for _ in 0..trials {
        let mut p = template.clone();
        p.init = atoms.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        random_pass += validate_instance(&d, &p, Some(&c)).unwrap().is_valid() as usize;
    }
    let solver_trials = 1000;
    let mut solver_pass = 0;
    for seed in 0..solver_trials {
        let inst = g.sample(seed, &SolveOptions::default()).0.map_err(|e| e.to_string())?;
        solver_pass += validate_instance(&d, &inst, Some(&c)).unwrap().is_valid() as usize;
    }
    ensure((random_pass as f64) < 0.01 * trials as f64, || format!("random passes {random_pass}/{trials}"))?;
    ensure(solver_pass == solver_trials as usize, || format!("solver passes {solver_pass}/{solver_trials}"))?;
    within(Duration::from_secs(30), start)?;
    Ok(format!(
        "random {random_pass}/{trials}, solver {solver_pass}/{solver_trials}, in {:.1?}",
        start.elapsed()
    ))
}

/// BFS and GreedyHAdd on 50 small generated instances.
fn planner_correctness() -> Outcome {
    let start = Instant::now();
    let d = domain(FLOOR_TILE_GEN);
    let configs = [cfg(2, 1, 1), cfg(2, 2, 2), cfg(3, 1, 1), cfg(3, 1, 2), cfg(3, 2, 1)];
    let mut checked = 0;
    let mut solvable = 0;
    let mut seed = 0;
    while checked < 50 {
        let c = &configs[seed as usize % configs.len()];
        let inst = Generator::new(&d, c, Encoding::High)
            .map_err(|e| e.to_string())?
            .sample(seed, &SolveOptions::default())
            .0
            .map_err(|e| e.to_string())?;
        seed += 1;
        let task = ground(&d, &inst).map_err(|e| e.to_string())?;
        if count_reachable(&task, 100_000).is_none() {
            continue;
        }
        let bfs = solve_plan(&task, Search::Bfs, Budget::default()).outcome;
        let greedy = solve_plan(&task, Search::GreedyHAdd, Budget::default()).outcome;
        let names = |p: &[usize]| p.iter().map(|&i| task.actions[i].to_string()).collect::<Vec<_>>();
        match (&bfs, &greedy) {
            (PlanOutcome::Plan(p), PlanOutcome::Plan(q)) => {
                ensure(validate_plan(&task, &names(p)) == PlanValidity::Valid, || format!("{}: BFS plan invalid", inst.name))?;
                ensure(validate_plan(&task, &names(q)) == PlanValidity::Valid, || format!("{}: greedy plan invalid", inst.name))?;
                ensure(q.len() >= p.len(), || format!("{}: greedy {} < BFS {}", inst.name, q.len(), p.len()))?;
                solvable += 1;
            }
            (PlanOutcome::NoPlan, PlanOutcome::NoPlan) => {}
            _ => return Err(format!("{} ({c}): BFS {bfs:?} vs greedy {greedy:?}", inst.name)),
        }
        checked += 1;
    }
    within(Duration::from_secs(300), start)?;
    Ok(format!("50 instances ({solvable} solvable) agree, in {:.1?}", start.elapsed()))
}

/// Tuning with budget 200 reaches mean score >= 0.8 on held-out seeds and
/// replays bit-identically from its manifest.
fn tuner_efficacy() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tune = dir.path().join("tune.json");
    let target = r#"{"solvable": true, "plan_length": {"min": 4}}"#;
    fs::write(
        &tune,
        format!(
            r#"{{"params": {{"tile_size": {{"lower": 2, "upper": 6}}, "n_robot": {{"lower": 1, "upper": 3}}, "n_color": {{"lower": 1, "upper": 3}}}},
                "target": {target}, "budget": 200, "seed": 1}}"#
        ),
    )
    .map_err(|e| e.to_string())?;
    let out = dir.path().join("result.json");
    let run = |args: &[String]| -> Result<(), String> {
        let o = Command::new(BIN).current_dir(root()).args(args).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())
    };
    run(&[
        "tune".into(),
        "domains/floor-tile-gen.pddl".into(),
        tune.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ])?;
    let first = fs::read(&out).map_err(|e| e.to_string())?;
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("result.json.manifest.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let argv: Vec<String> = serde_json::from_value(manifest["argv"].clone()).map_err(|e| e.to_string())?;
    fs::remove_file(&out).map_err(|e| e.to_string())?;
    run(&argv[1..])?;
    ensure(fs::read(&out).map_err(|e| e.to_string())? == first, || "replay differs".into())?;

    let v: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let evals = v["result"]["evaluations"].as_u64().unwrap_or(u64::MAX);
    ensure(evals <= 200, || format!("{evals} evaluations"))?;
    let assignment: std::collections::BTreeMap<String, u64> =
        serde_json::from_value(v["result"]["best"]["assignment"].clone()).map_err(|e| e.to_string())?;
    let best = GeneratorConfig::new(assignment, 0);
    let d = domain(FLOOR_TILE_GEN);
    let target = TuneTarget {
        solvable: Some(true),
        plan_length: Some(Interval { min: Some(4), max: None }),
        ..TuneTarget::default()
    };
    let budget = Budget {
        max_expansions: Some(20_000),
        time_limit: None,
    };
    let held_out: Vec<_> = (1_000_000..1_000_020)
        .map(|s| evaluate(&d, &best.with_seed(s), Encoding::High, &SolveOptions::default(), budget))
        .collect();
    let mean = score(&held_out, &target);
    ensure(mean >= 0.8, || format!("best {best} scores {mean:.2} on held-out seeds"))?;
    within(Duration::from_secs(600), start)?;
    Ok(format!("best {best}, held-out mean {mean:.2}, {evals} evaluations, replay identical, in {:.1?}", start.elapsed()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("constraint-count law", count_law),
        ("runtime gap", runtime_gap),
        ("golden fidelity", golden_fidelity),
        ("generator soundness", generator_soundness),
        ("encoding equivalence", encoding_equivalence),
        ("random-validity gap", random_validity_gap),
        ("planner correctness", planner_correctness),
        ("tuner efficacy", tuner_efficacy),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match r {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
