use std::collections::{BTreeMap, HashMap, HashSet};

use super::{
    synthesize_objects, AtomKey, Cmp, Constraint, ConstraintModel, Encoding, GeneratorConfig, Lit,
    ModelError, VarId, VarKind,
};
use crate::augment::{
    expand, CardKind, Direction, FluentValue, GroundCard, GroundConstraint, GroundFormula,
    GroundedValiditySpec, Scope, StructuralTemplate, DEFAULT_INT_MAX,
};
use crate::pddl::{DomainSpec, GroundAtom, TypedName};

/// Compiles the domain's own validity specification for `config`.
pub fn compile(
    domain: &DomainSpec,
    config: &GeneratorConfig,
    encoding: Encoding,
) -> Result<ConstraintModel, ModelError> {
    let spec = domain.validity.as_ref().ok_or(ModelError::NoValiditySpec)?;
    let objects = synthesize_objects(domain, &spec.structures, config)?;
    let grounded = expand(spec, domain, &objects)?;
    compile_with(domain, &grounded, config, encoding)
}

pub fn compile_low(
    domain: &DomainSpec,
    spec: &GroundedValiditySpec,
    config: &GeneratorConfig,
) -> Result<ConstraintModel, ModelError> {
    compile_with(domain, spec, config, Encoding::Low)
}

pub fn compile_high(
    domain: &DomainSpec,
    spec: &GroundedValiditySpec,
    config: &GeneratorConfig,
) -> Result<ConstraintModel, ModelError> {
    compile_with(domain, spec, config, Encoding::High)
}

/// Truth of a grid adjacency between tile numbers `u` and `v` (1-based).
fn adjacent(dir: Direction, u: u64, v: u64, s: u64) -> bool {
    match dir {
        Direction::Up => u == v + s,
        Direction::Down => u + s == v,
        Direction::Left => u == v + 1 && !v.is_multiple_of(s),
        Direction::Right => u + 1 == v && !u.is_multiple_of(s),
    }
}

/// The unique `v` with `adjacent(dir, u, v, s)`, computed directly.
fn partner(dir: Direction, u: u64, s: u64) -> Option<u64> {
    let n = s * s;
    match dir {
        Direction::Up => (u > s).then(|| u - s),
        Direction::Down => (u + s <= n).then(|| u + s),
        Direction::Left => (u > 1 && !(u - 1).is_multiple_of(s)).then(|| u - 1),
        Direction::Right => (u < n && !u.is_multiple_of(s)).then(|| u + 1),
    }
}

#[derive(Clone, Copy)]
enum Term {
    Const(bool),
    Lit(Lit),
}

impl Term {
    fn negate(self) -> Term {
        match self {
            Term::Const(b) => Term::Const(!b),
            Term::Lit(l) => Term::Lit(l.negate()),
        }
    }
}

struct GridInfo {
    /// Object index for each tile number, 1-based (slot 0 unused).
    tiles: Vec<u32>,
    number: HashMap<u32, u64>,
    side: u64,
    symbols: [u32; 4],
}

struct Builder {
    encoding: Encoding,
    symbols: Vec<String>,
    symbol_index: HashMap<String, u32>,
    objects: Vec<TypedName>,
    object_index: HashMap<String, u32>,
    variables: Vec<VarKind>,
    index: HashMap<(Scope, AtomKey), VarId>,
    excluded_goal: HashSet<AtomKey>,
    constraints: Vec<Constraint>,
    fixed: BTreeMap<VarId, i64>,
    grids: Vec<GridInfo>,
}

impl Builder {
    fn key(&self, atom: &GroundAtom) -> AtomKey {
        AtomKey {
            symbol: self.symbol_index[&atom.predicate],
            args: atom.args.iter().map(|a| self.object_index[a]).collect(),
        }
    }

    fn new_var(&mut self, kind: VarKind) -> VarId {
        self.variables.push(kind);
        (self.variables.len() - 1) as VarId
    }

    fn bool_var(&mut self, key: AtomKey, scope: Scope) -> VarId {
        if let Some(&v) = self.index.get(&(scope, key.clone())) {
            return v;
        }
        let v = self.new_var(VarKind::Bool {
            atom: key.clone(),
            scope,
        });
        self.index.insert((scope, key.clone()), v);
        if scope == Scope::Init && self.encoding == Encoding::High {
            // Every grid atom is constructively decided in High mode.
            if let Some(truth) = self.grid_truth(&key) {
                self.fixed.insert(v, truth as i64);
            }
        }
        v
    }

    fn grid_truth(&self, key: &AtomKey) -> Option<bool> {
        for g in &self.grids {
            if let Some(i) = g.symbols.iter().position(|s| *s == key.symbol) {
                let u = g.number.get(&key.args[0])?;
                let v = g.number.get(&key.args[1])?;
                return Some(adjacent(Direction::ALL[i], *u, *v, g.side));
            }
        }
        None
    }

    /// Literal saying `atom` holds in `scope`, or a constant when the atom
    /// has no variable (excluded from the goal).
    fn atom_term(&mut self, atom: &GroundAtom, scope: Scope) -> Term {
        let key = self.key(atom);
        if scope == Scope::Goal && self.excluded_goal.contains(&key) {
            return Term::Const(false);
        }
        Term::Lit(Lit::is_true(self.bool_var(key, scope)))
    }

    fn card_terms(&mut self, c: &GroundCard, scope: Scope) -> Vec<Term> {
        c.atoms
            .iter()
            .map(|a| match c.value {
                FluentValue::Int(v) => {
                    let key = self.key(a);
                    let var = self.index[&(Scope::Init, key)];
                    Term::Lit(Lit {
                        var,
                        value: v,
                        pos: true,
                    })
                }
                FluentValue::Bool(b) => {
                    let t = self.atom_term(a, scope);
                    if b {
                        t
                    } else {
                        t.negate()
                    }
                }
            })
            .collect()
    }

    /// Splits terms into literals and the number of constant-true terms.
    fn simplify(terms: Vec<Term>) -> (Vec<Lit>, u32) {
        let mut lits = Vec::new();
        let mut ones = 0;
        for t in terms {
            match t {
                Term::Const(true) => ones += 1,
                Term::Const(false) => {}
                Term::Lit(l) => lits.push(l),
            }
        }
        (lits, ones)
    }

    fn emit_card(&mut self, terms: Vec<Term>, cmp: Cmp, k: u32, origin: &str) -> Result<(), ModelError> {
        let (lits, ones) = Self::simplify(terms);
        let n = lits.len() as u32;
        let infeasible = || ModelError::Infeasible(origin.to_string());
        let k = match (cmp, k.checked_sub(ones)) {
            (Cmp::Ge, None) => return Ok(()),
            (_, None) => return Err(infeasible()),
            (_, Some(k)) => k,
        };
        match cmp {
            Cmp::Eq | Cmp::Ge if k > n => return Err(infeasible()),
            Cmp::Ge if k == 0 => return Ok(()),
            _ => {}
        }
        self.constraints.push(Constraint::Cardinality { lits, cmp, k });
        Ok(())
    }

    fn force(&mut self, t: Term, truth: bool, origin: &str) -> Result<(), ModelError> {
        match t {
            Term::Const(b) if b == truth => Ok(()),
            Term::Const(_) => Err(ModelError::Infeasible(origin.to_string())),
            Term::Lit(l) if self.variables[l.var as usize].is_bool() => {
                let value = (l.value == 1) == (l.pos == truth);
                self.constraints.push(Constraint::BiconditionalConst { a: l.var, value });
                Ok(())
            }
            Term::Lit(l) => {
                self.constraints.push(Constraint::Cardinality {
                    lits: vec![l],
                    cmp: Cmp::Eq,
                    k: truth as u32,
                });
                Ok(())
            }
        }
    }

    fn reify_count(&mut self, terms: Vec<Term>, cmp: Cmp, k: u32) -> Term {
        let (lits, ones) = Self::simplify(terms);
        let n = lits.len() as u32;
        let Some(k) = k.checked_sub(ones) else {
            return Term::Const(cmp == Cmp::Ge);
        };
        // Decide the constant cases before allocating an indicator.
        let always = match cmp {
            Cmp::Eq => n == 0 && k == 0,
            Cmp::Le => k >= n,
            Cmp::Ge => k == 0,
        };
        let never = match cmp {
            Cmp::Eq | Cmp::Ge => k > n,
            Cmp::Le => false,
        };
        if always || never {
            return Term::Const(always);
        }
        if n == 1 {
            // One literal: the count is the literal itself.
            let l = lits[0];
            return Term::Lit(match (cmp, k) {
                (Cmp::Eq, 1) | (Cmp::Ge, 1) => l,
                _ => l.negate(),
            });
        }
        let indicator = self.new_var(VarKind::Aux);
        self.constraints.push(Constraint::ReifiedCardinality {
            indicator,
            lits,
            cmp,
            k,
        });
        Term::Lit(Lit::is_true(indicator))
    }

    fn reify(&mut self, f: &GroundFormula, scope: Scope) -> Term {
        match f {
            GroundFormula::Card(c) => {
                let terms = self.card_terms(c, scope);
                self.reify_count(terms, cmp_of(c.kind), c.k)
            }
            GroundFormula::Appear(atoms) => {
                let terms = atoms.iter().map(|a| self.atom_term(a, Scope::Goal)).collect();
                self.reify_count(terms, Cmp::Ge, 1)
            }
            GroundFormula::Not(x) => self.reify(x, scope).negate(),
            GroundFormula::And(xs) => {
                let terms: Vec<Term> = xs.iter().map(|x| self.reify(x, scope)).collect();
                let n = terms.len() as u32;
                self.reify_count(terms, Cmp::Ge, n)
            }
            GroundFormula::Or(xs) => {
                let terms = xs.iter().map(|x| self.reify(x, scope)).collect();
                self.reify_count(terms, Cmp::Ge, 1)
            }
            GroundFormula::Xor(a, b) => {
                let terms = vec![self.reify(a, scope), self.reify(b, scope)];
                self.reify_count(terms, Cmp::Eq, 1)
            }
        }
    }

    /// Compiles a formula that must hold.
    fn assert(&mut self, f: &GroundFormula, scope: Scope, origin: &str) -> Result<(), ModelError> {
        match f {
            GroundFormula::Card(c) => {
                let terms = self.card_terms(c, scope);
                self.emit_card(terms, cmp_of(c.kind), c.k, origin)
            }
            GroundFormula::Appear(atoms) => {
                let terms = atoms.iter().map(|a| self.atom_term(a, Scope::Goal)).collect();
                self.emit_card(terms, Cmp::Ge, 1, origin)
            }
            GroundFormula::And(xs) => xs.iter().try_for_each(|x| self.assert(x, scope, origin)),
            GroundFormula::Or(xs) => {
                let terms = xs.iter().map(|x| self.reify(x, scope)).collect();
                self.emit_card(terms, Cmp::Ge, 1, origin)
            }
            GroundFormula::Xor(a, b) => {
                let (ta, tb) = (self.reify(a, scope), self.reify(b, scope));
                match (ta, tb) {
                    (Term::Lit(a), Term::Lit(b)) => {
                        self.constraints.push(Constraint::Xor { a, b });
                        Ok(())
                    }
                    (Term::Const(x), t) | (t, Term::Const(x)) => self.force(t, !x, origin),
                }
            }
            GroundFormula::Not(x) => match x.as_ref() {
                GroundFormula::Not(y) => self.assert(y, scope, origin),
                // Goal exclusions are applied when the goal space is built.
                GroundFormula::Appear(_) if scope == Scope::Goal => Ok(()),
                GroundFormula::Card(c) if c.kind != CardKind::ExactlyK => {
                    let terms = self.card_terms(c, scope);
                    match c.kind {
                        CardKind::AtMostK => self.emit_card(terms, Cmp::Ge, c.k + 1, origin),
                        _ => match c.k.checked_sub(1) {
                            Some(k) => self.emit_card(terms, Cmp::Le, k, origin),
                            None => Err(ModelError::Infeasible(origin.to_string())),
                        },
                    }
                }
                GroundFormula::Or(xs) => xs
                    .iter()
                    .try_for_each(|x| self.assert(&GroundFormula::Not(Box::new(x.clone())), scope, origin)),
                _ => {
                    let t = self.reify(x, scope);
                    self.force(t, false, origin)
                }
            },
        }
    }
}

fn cmp_of(kind: CardKind) -> Cmp {
    match kind {
        CardKind::ExactlyK => Cmp::Eq,
        CardKind::AtLeastK => Cmp::Ge,
        CardKind::AtMostK => Cmp::Le,
    }
}

/// Top-level goal `not appear` terms name atoms that never enter the goal.
fn goal_exclusions(c: &GroundConstraint) -> Option<&[GroundAtom]> {
    match (&c.scope, &c.body) {
        (Scope::Goal, GroundFormula::Not(x)) => match x.as_ref() {
            GroundFormula::Appear(atoms) => Some(atoms),
            _ => None,
        },
        _ => None,
    }
}

/// Init-scope exactly-1 terms over one wildcard position that can be decoded
/// as a total function.
fn absorbable(c: &GroundConstraint) -> Option<&GroundCard> {
    match (&c.scope, &c.body) {
        (Scope::Init, GroundFormula::Card(card))
            if card.kind == CardKind::ExactlyK
                && card.k == 1
                && card.value == FluentValue::Bool(true)
                && card.wildcards == 1
                && card.atoms.len() > 1 =>
        {
            Some(card)
        }
        _ => None,
    }
}

fn ground_atoms(domain: &DomainSpec, objects: &[TypedName], params: &[TypedName]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for p in params {
        let options: Vec<u32> = objects
            .iter()
            .enumerate()
            .filter(|(_, o)| domain.is_subtype(&o.typ, &p.typ))
            .map(|(i, _)| i as u32)
            .collect();
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                options.iter().map(move |&o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    out
}

/// Compiles a grounded specification in the requested encoding.
pub fn compile_with(
    domain: &DomainSpec,
    spec: &GroundedValiditySpec,
    config: &GeneratorConfig,
    encoding: Encoding,
) -> Result<ConstraintModel, ModelError> {
    let objects = synthesize_objects(domain, &spec.structures, config)?;
    let symbols: Vec<String> = domain
        .predicates
        .iter()
        .map(|p| p.name.clone())
        .chain(domain.functions.iter().map(|f| f.name.clone()))
        .collect();
    let mut b = Builder {
        encoding,
        symbol_index: symbols.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect(),
        symbols,
        object_index: objects.iter().enumerate().map(|(i, o)| (o.name.clone(), i as u32)).collect(),
        objects,
        variables: Vec::new(),
        index: HashMap::new(),
        excluded_goal: HashSet::new(),
        constraints: Vec::new(),
        fixed: BTreeMap::new(),
        grids: Vec::new(),
    };
    for t in &spec.structures {
        b.grids.push(grid_info(&b, t, config));
    }
    for c in &spec.constraints {
        if let Some(atoms) = goal_exclusions(c) {
            for a in atoms {
                let key = b.key(a);
                b.excluded_goal.insert(key);
            }
        }
    }

    // Grid predicates come first so their variables lead the search order.
    let mut structural = 0..0;
    let mut decisions = 0;
    match encoding {
        Encoding::Low => {
            structural.start = b.constraints.len();
            for gi in 0..b.grids.len() {
                let (side, symbols, tiles) = {
                    let g = &b.grids[gi];
                    (g.side, g.symbols, g.tiles.clone())
                };
                let n = side * side;
                for dir in Direction::ALL {
                    for u in 1..=n {
                        for v in 1..=n {
                            let key = AtomKey {
                                symbol: symbols[dir.index()],
                                args: Box::new([tiles[u as usize], tiles[v as usize]]),
                            };
                            let a = b.bool_var(key, Scope::Init);
                            let value = adjacent(dir, u, v, side);
                            b.constraints.push(Constraint::BiconditionalConst { a, value });
                        }
                    }
                }
            }
            structural.end = b.constraints.len();
        }
        Encoding::High => {
            for gi in 0..b.grids.len() {
                let (side, symbols, tiles) = {
                    let g = &b.grids[gi];
                    (g.side, g.symbols, g.tiles.clone())
                };
                for u in 1..=side * side {
                    for dir in Direction::ALL {
                        decisions += 1;
                        if let Some(v) = partner(dir, u, side) {
                            let key = AtomKey {
                                symbol: symbols[dir.index()],
                                args: Box::new([tiles[u as usize], tiles[v as usize]]),
                            };
                            // `bool_var` records the fixed value.
                            b.bool_var(key, Scope::Init);
                        }
                    }
                }
            }
        }
    }

    // Integer fluents.
    let int_max = config.int_max.unwrap_or(DEFAULT_INT_MAX);
    let range_of = |name: &str| {
        let mut lo = 0;
        let mut hi = int_max;
        for bound in spec.bounds.iter().filter(|x| x.fluent == name) {
            match bound.kind {
                crate::augment::BoundKind::Min => lo = bound.value,
                crate::augment::BoundKind::Max => hi = bound.value,
            }
        }
        (lo, hi)
    };
    for f in &domain.functions {
        let (lo, hi) = range_of(&f.name);
        if lo > hi {
            return Err(ModelError::Infeasible(format!("empty range [{lo}, {hi}] for `{}`", f.name)));
        }
        let symbol = b.symbol_index[&f.name];
        for args in ground_atoms(domain, &b.objects, &f.params) {
            let term = AtomKey {
                symbol,
                args: args.into(),
            };
            let v = b.new_var(VarKind::Int {
                term: term.clone(),
                lo,
                hi,
            });
            b.index.insert((Scope::Init, term), v);
        }
    }

    let mut claimed: HashSet<VarId> = HashSet::new();
    let mut total_functions = Vec::new();
    for c in &spec.constraints {
        if encoding == Encoding::High {
            if let Some(card) = absorbable(c) {
                let vars: Vec<VarId> = card
                    .atoms
                    .iter()
                    .map(|a| {
                        let key = b.key(a);
                        b.bool_var(key, Scope::Init)
                    })
                    .collect();
                let free = vars.iter().all(|v| !claimed.contains(v) && !b.fixed.contains_key(v));
                if free {
                    claimed.extend(vars.iter().copied());
                    total_functions.push(vars);
                    continue;
                }
            }
        }
        b.assert(&c.body, c.scope, &c.origin)?;
    }

    // Goal space: every ground atom not excluded by a top-level `not appear`.
    for p in &domain.predicates {
        let symbol = b.symbol_index[&p.name];
        for args in ground_atoms(domain, &b.objects, &p.params) {
            let key = AtomKey {
                symbol,
                args: args.into(),
            };
            if !b.excluded_goal.contains(&key) {
                b.bool_var(key, Scope::Goal);
            }
        }
    }

    Ok(ConstraintModel {
        encoding,
        domain_name: domain.name.clone(),
        config: config.clone(),
        symbols: b.symbols,
        objects: b.objects,
        variables: b.variables,
        constraints: b.constraints,
        fixed: b.fixed,
        total_functions,
        structural,
        decisions,
    })
}

fn grid_info(b: &Builder, t: &StructuralTemplate, config: &GeneratorConfig) -> GridInfo {
    let side = config.get(&t.aux_param).unwrap_or(0);
    let mut tiles = vec![0; (side * side + 1) as usize];
    let mut number = HashMap::new();
    for r in 0..side {
        for c in 0..side {
            let o = b.object_index[&format!("{}_{r}-{c}", t.type_arg)];
            let k = super::grid_number(r, c, side);
            tiles[k as usize] = o;
            number.insert(o, k);
        }
    }
    GridInfo {
        tiles,
        number,
        side,
        symbols: Direction::ALL.map(|d| b.symbol_index[t.predicate(d)]),
    }
}
