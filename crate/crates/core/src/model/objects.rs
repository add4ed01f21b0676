use std::collections::BTreeSet;

use super::{GeneratorConfig, ModelError};
use crate::augment::{count_param, StructuralTemplate};
use crate::pddl::{DomainSpec, TypedName};

/// Generator parameters needed to build objects for `domain`.
pub fn required_params(domain: &DomainSpec, structures: &[StructuralTemplate]) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = domain
        .leaf_types()
        .into_iter()
        .filter(|t| !structures.iter().any(|s| s.type_arg == *t))
        .map(count_param)
        .collect();
    out.extend(structures.iter().map(|s| s.aux_param.clone()));
    out
}

/// 1-based grid number of the tile at `(row, col)` on a side-`s` grid.
///
/// Numbering runs backwards from the top-left tile so that the object names
/// `tile_<row>-<col>` line up with the adjacency arithmetic of the template
/// (`up(u, v)` iff `u = v + s`).
pub fn grid_number(row: u64, col: u64, s: u64) -> u64 {
    s * s - row * s - col
}

fn check_params(
    domain: &DomainSpec,
    structures: &[StructuralTemplate],
    config: &GeneratorConfig,
) -> Result<(), ModelError> {
    let required = required_params(domain, structures);
    for p in &required {
        match config.get(p) {
            None => return Err(ModelError::MissingParam(p.clone())),
            Some(0) => {
                return Err(ModelError::BadParam {
                    name: p.clone(),
                    value: 0,
                    reason: "must be positive".into(),
                })
            }
            Some(_) => {}
        }
    }
    for (name, &value) in &config.assignment {
        if required.contains(name) {
            continue;
        }
        // An explicit count for a grid type is tolerated when it agrees.
        let grid = structures
            .iter()
            .find(|s| count_param(&s.type_arg) == *name);
        match grid {
            Some(s) => {
                let side = config.get(&s.aux_param).unwrap_or(0);
                if value != side * side {
                    return Err(ModelError::BadParam {
                        name: name.clone(),
                        value,
                        reason: format!("must equal {}^2 = {}", s.aux_param, side * side),
                    });
                }
            }
            None => return Err(ModelError::UnknownParam(name.clone())),
        }
    }
    Ok(())
}

fn names_for(typ: &str, n: u64) -> Vec<String> {
    if typ == "color" && n == 2 {
        return vec!["white".into(), "black".into()];
    }
    (1..=n).map(|i| format!("{typ}{i}")).collect()
}

/// Deterministic object set for a configuration: one block per leaf type in
/// declaration order; grid types get `<type>_<row>-<col>` names.
pub fn synthesize_objects(
    domain: &DomainSpec,
    structures: &[StructuralTemplate],
    config: &GeneratorConfig,
) -> Result<Vec<TypedName>, ModelError> {
    check_params(domain, structures, config)?;
    let mut objects = Vec::new();
    for typ in domain.leaf_types() {
        match structures.iter().find(|s| s.type_arg == typ) {
            Some(s) => {
                let side = config.get(&s.aux_param).unwrap_or(0);
                for r in 0..side {
                    for c in 0..side {
                        objects.push(TypedName::new(format!("{typ}_{r}-{c}"), typ));
                    }
                }
            }
            None => {
                let n = config.get(&count_param(typ)).unwrap_or(0);
                objects.extend(names_for(typ, n).into_iter().map(|o| TypedName::new(o, typ)));
            }
        }
    }
    Ok(objects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::fixtures::FLOOR_TILE;
    use crate::pddl::parse_domain;

    #[test]
    fn fig3_objects() {
        let d = parse_domain(FLOOR_TILE, true).unwrap();
        let spec = d.validity.as_ref().unwrap();
        let config = GeneratorConfig::new([("n_robot", 2), ("n_color", 2), ("tile_size", 2)], 0);
        let objects = synthesize_objects(&d, &spec.structures, &config).unwrap();
        let names: Vec<_> = objects.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(
            names,
            ["robot1", "robot2", "tile_0-0", "tile_0-1", "tile_1-0", "tile_1-1", "white", "black"]
        );
        assert_eq!(grid_number(0, 0, 2), 4);
        assert_eq!(grid_number(1, 1, 2), 1);
    }

    #[test]
    fn parameter_checks() {
        let d = parse_domain(FLOOR_TILE, true).unwrap();
        let s = &d.validity.as_ref().unwrap().structures;
        let missing = GeneratorConfig::new([("n_robot", 2), ("n_color", 2)], 0);
        assert_eq!(
            synthesize_objects(&d, s, &missing),
            Err(ModelError::MissingParam("tile_size".into()))
        );
        let extra = GeneratorConfig::new([("n_robot", 2), ("n_color", 2), ("tile_size", 2), ("n_cat", 1)], 0);
        assert_eq!(
            synthesize_objects(&d, s, &extra),
            Err(ModelError::UnknownParam("n_cat".into()))
        );
        let tiles = GeneratorConfig::new([("n_robot", 2), ("n_color", 2), ("tile_size", 2), ("n_tile", 4)], 0);
        assert!(synthesize_objects(&d, s, &tiles).is_ok());
        let wrong = GeneratorConfig::new([("n_robot", 2), ("n_color", 2), ("tile_size", 2), ("n_tile", 5)], 0);
        assert!(matches!(synthesize_objects(&d, s, &wrong), Err(ModelError::BadParam { .. })));
        let zero = GeneratorConfig::new([("n_robot", 0), ("n_color", 2), ("tile_size", 2)], 0);
        assert!(matches!(synthesize_objects(&d, s, &zero), Err(ModelError::BadParam { .. })));
    }

    #[test]
    fn other_colour_counts_are_numbered() {
        assert_eq!(names_for("color", 3), ["color1", "color2", "color3"]);
        assert_eq!(names_for("color", 1), ["color1"]);
    }
}
