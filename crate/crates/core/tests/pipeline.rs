use std::collections::BTreeSet;

use instgen::model::{compile, Encoding, GeneratorConfig, VarKind};
use instgen::pddl::{emit_problem, parse_domain, parse_problem, DomainSpec};
use instgen::pipeline::Generator;
use instgen::plan::{grade, validate_instance, Budget, Solvable};
use instgen::solve::{decode, enumerate_all, enumerate_blocking, generate, Assignment, SolveOptions};

const FLOOR_TILE: &str = include_str!("../../../domains/floor-tile.pddl");
const FLOOR_TILE_GEN: &str = include_str!("../../../domains/floor-tile-gen.pddl");

fn domain(text: &str) -> DomainSpec {
    parse_domain(text, true).unwrap()
}

fn cfg(s: u64, r: u64, c: u64) -> GeneratorConfig {
    GeneratorConfig::new([("tile_size", s), ("n_robot", r), ("n_color", c)], 0)
}

#[test]
fn emitted_instances_reparse_and_validate() {
    for text in [FLOOR_TILE, FLOOR_TILE_GEN] {
        let d = domain(text);
        let g = Generator::new(&d, &cfg(3, 2, 2), Encoding::High).unwrap();
        for seed in 0..10 {
            let inst = g.sample(seed, &SolveOptions::default()).0.unwrap();
            let back = parse_problem(&emit_problem(&inst), &d).unwrap();
            assert_eq!(back, inst.without_provenance());
            assert!(validate_instance(&d, &back, None).unwrap().is_valid());
        }
    }
}

/// The compiled model and the direct interpreter must agree on every
/// assignment one flip away from a solution.
#[test]
fn model_check_agrees_with_validator() {
    let d = domain(FLOOR_TILE_GEN);
    for c in [cfg(2, 1, 1), cfg(2, 1, 2), cfg(3, 1, 1)] {
        let m = compile(&d, &c, Encoding::Low).unwrap();
        assert!(!m.variables.iter().any(|v| matches!(v, VarKind::Aux)));
        for seed in 0..5 {
            let base = generate(&m, seed, None).assignment.unwrap();
            for v in 0..m.variables.len() {
                let mut values = base.values.clone();
                values[v] = 1 - values[v];
                let a = Assignment { values };
                let ok = m.check(&a.values);
                match decode(&m, &a, &d, &c) {
                    Ok(inst) => {
                        let r = validate_instance(&d, &inst, Some(&c)).unwrap();
                        assert_eq!(ok, r.is_valid(), "flip {} {:?}", m.var_name(v as u32), r.violations);
                    }
                    Err(_) => assert!(!ok),
                }
            }
        }
    }
}

#[test]
fn blocking_enumeration_matches_exhaustive_on_generator_domain() {
    let d = domain(FLOOR_TILE_GEN);
    let c = cfg(2, 1, 1);
    let low = compile(&d, &c, Encoding::Low).unwrap();
    let high = compile(&d, &c, Encoding::High).unwrap();
    let decoded = |m, sols: Vec<Assignment>| -> BTreeSet<String> {
        sols.iter()
            .map(|a| emit_problem(&decode(m, a, &d, &c).unwrap().without_provenance()))
            .collect()
    };
    let a = decoded(&low, enumerate_blocking(&low, 3, 10_000));
    let b = decoded(&high, enumerate_all(&high, 10_000));
    // 4 robot tiles, 15 non-empty paint patterns.
    assert_eq!(a.len(), 4 * 15);
    assert_eq!(a, b);
}

#[test]
fn generated_toy_instances_grade() {
    let d = domain(FLOOR_TILE_GEN);
    let g = Generator::new(&d, &cfg(3, 1, 1), Encoding::High).unwrap();
    let mut solved = 0;
    for seed in 0..10 {
        let inst = g.sample(seed, &SolveOptions::default()).0.unwrap();
        let r = grade(&d, &inst, Budget::default());
        assert_ne!(r.solvable, Solvable::Unknown);
        assert_eq!(r.plan_length.is_some(), r.solvable == Solvable::Yes);
        solved += (r.solvable == Solvable::Yes) as usize;
    }
    assert!(solved > 0);
}
