//! Trail-based propagation engine and depth-first search.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Cmp, Constraint, ConstraintModel, Lit, VarId};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum Con {
    Card { lits: Vec<Lit>, cmp: Cmp, k: u32 },
    Reif { ind: VarId, lits: Vec<Lit>, cmp: Cmp, k: u32 },
    Iff { a: VarId, b: VarId },
    Xor { a: Lit, b: Lit },
    Implies { a: Lit, b: Lit },
}

#[derive(Debug, Clone, Copy)]
enum Trail {
    Lo(VarId, i64),
    Hi(VarId, i64),
    Hole(VarId),
    Count { con: u32, lit: u32, was_true: bool },
}

#[derive(Debug)]
enum Alt {
    Bool { var: VarId, next: Option<bool> },
    Int { var: VarId, value: i64, excluded: bool },
    Group { cands: Vec<VarId>, next: usize },
}

#[derive(Debug)]
struct Frame {
    trail_len: usize,
    pos: usize,
    alt: Alt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SearchEnd {
    Solution,
    Exhausted,
    Timeout,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Counters {
    pub nodes: u64,
    pub propagations: u64,
    pub restarts: u64,
}

pub(crate) struct Engine {
    cons: Vec<Con>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    holes: HashMap<VarId, Vec<i64>>,
    occ: Vec<Vec<(u32, u32)>>,
    n_true: Vec<u32>,
    n_false: Vec<u32>,
    lit_base: Vec<u32>,
    lit_known: Vec<bool>,
    trail: Vec<Trail>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    group_of: Vec<u32>,
    groups: Vec<Vec<VarId>>,
    order: Vec<VarId>,
    stack: Vec<Frame>,
    root_trail: usize,
    root_failed: bool,
    pub counters: Counters,
}

impl Engine {
    pub fn new(m: &ConstraintModel) -> Engine {
        let n = m.variables.len();
        let (lo, hi): (Vec<i64>, Vec<i64>) = m.variables.iter().map(|v| v.bounds()).unzip();
        let mut e = Engine {
            cons: Vec::new(),
            lo,
            hi,
            holes: HashMap::new(),
            occ: vec![Vec::new(); n],
            n_true: Vec::new(),
            n_false: Vec::new(),
            lit_base: Vec::new(),
            lit_known: Vec::new(),
            trail: Vec::new(),
            queue: VecDeque::new(),
            queued: Vec::new(),
            group_of: vec![NONE; n],
            groups: m.total_functions.clone(),
            order: Vec::new(),
            stack: Vec::new(),
            root_trail: 0,
            root_failed: false,
            counters: Counters {
                nodes: 1,
                ..Counters::default()
            },
        };
        for (g, vars) in m.total_functions.iter().enumerate() {
            for &v in vars {
                e.group_of[v as usize] = g as u32;
            }
            e.add(Con::Card {
                lits: vars.iter().map(|&v| Lit::is_true(v)).collect(),
                cmp: Cmp::Eq,
                k: 1,
            });
        }
        let mut unary = Vec::new();
        for c in &m.constraints {
            match c {
                Constraint::Cardinality { lits, cmp, k } => e.add(Con::Card {
                    lits: lits.clone(),
                    cmp: *cmp,
                    k: *k,
                }),
                Constraint::ReifiedCardinality {
                    indicator,
                    lits,
                    cmp,
                    k,
                } => e.add(Con::Reif {
                    ind: *indicator,
                    lits: lits.clone(),
                    cmp: *cmp,
                    k: *k,
                }),
                Constraint::Biconditional { a, b } => e.add(Con::Iff { a: *a, b: *b }),
                Constraint::BiconditionalConst { a, value } => unary.push((*a, *value as i64)),
                Constraint::Xor { a, b } => e.add(Con::Xor { a: *a, b: *b }),
                Constraint::Implies { a, b } => e.add(Con::Implies { a: *a, b: *b }),
            }
        }
        let mut ok = true;
        for (v, x) in m.fixed.iter().map(|(v, x)| (*v, *x)).chain(unary) {
            ok = ok && e.assign(v, x);
        }
        for c in 0..e.cons.len() as u32 {
            e.enqueue(c);
        }
        ok = ok && e.propagate();
        e.root_failed = !ok;
        e.root_trail = e.trail.len();
        e
    }

    fn add(&mut self, con: Con) {
        let c = self.cons.len() as u32;
        let lits: &[Lit] = match &con {
            Con::Card { lits, .. } | Con::Reif { lits, .. } => lits,
            _ => &[],
        };
        self.lit_base.push(self.lit_known.len() as u32);
        let (mut t, mut f) = (0, 0);
        for (i, l) in lits.iter().enumerate() {
            self.occ[l.var as usize].push((c, i as u32));
            // Literals already decided (only at the root) are counted now.
            let s = self.status(*l);
            self.lit_known.push(s.is_some());
            match s {
                Some(true) => t += 1,
                Some(false) => f += 1,
                None => {}
            }
        }
        self.n_true.push(t);
        self.n_false.push(f);
        match &con {
            Con::Reif { ind, .. } => self.occ[*ind as usize].push((c, NONE)),
            Con::Iff { a, b } => {
                self.occ[*a as usize].push((c, NONE));
                self.occ[*b as usize].push((c, NONE));
            }
            Con::Xor { a, b } | Con::Implies { a, b } => {
                self.occ[a.var as usize].push((c, NONE));
                self.occ[b.var as usize].push((c, NONE));
            }
            Con::Card { .. } => {}
        }
        self.cons.push(con);
        self.queued.push(false);
    }

    pub fn root_failed(&self) -> bool {
        self.root_failed
    }

    pub fn is_fixed(&self, v: VarId) -> bool {
        self.lo[v as usize] == self.hi[v as usize]
    }

    pub fn value(&self, v: VarId) -> i64 {
        self.lo[v as usize]
    }

    pub fn values(&self) -> Vec<i64> {
        self.lo.clone()
    }

    pub fn domain(&self, v: VarId) -> (i64, i64, Vec<i64>) {
        let (lo, hi) = (self.lo[v as usize], self.hi[v as usize]);
        let mut holes: Vec<i64> = self
            .holes
            .get(&v)
            .map(|h| h.iter().copied().filter(|x| (lo..=hi).contains(x)).collect())
            .unwrap_or_default();
        holes.sort_unstable();
        holes.dedup();
        (lo, hi, holes)
    }

    fn contains(&self, v: VarId, x: i64) -> bool {
        let i = v as usize;
        (self.lo[i]..=self.hi[i]).contains(&x) && !self.holes.get(&v).is_some_and(|h| h.contains(&x))
    }

    fn status(&self, l: Lit) -> Option<bool> {
        if self.is_fixed(l.var) {
            Some(l.holds(self.value(l.var)))
        } else if !self.contains(l.var, l.value) {
            Some(!l.pos)
        } else {
            None
        }
    }

    fn enqueue(&mut self, c: u32) {
        if !self.queued[c as usize] {
            self.queued[c as usize] = true;
            self.queue.push_back(c);
        }
    }

    fn notify(&mut self, v: VarId) {
        for idx in 0..self.occ[v as usize].len() {
            let (c, li) = self.occ[v as usize][idx];
            if li != NONE {
                let slot = (self.lit_base[c as usize] + li) as usize;
                if !self.lit_known[slot] {
                    let lit = match &self.cons[c as usize] {
                        Con::Card { lits, .. } | Con::Reif { lits, .. } => lits[li as usize],
                        _ => unreachable!("counted literal in a binary constraint"),
                    };
                    if let Some(t) = self.status(lit) {
                        self.lit_known[slot] = true;
                        if t {
                            self.n_true[c as usize] += 1;
                        } else {
                            self.n_false[c as usize] += 1;
                        }
                        self.trail.push(Trail::Count {
                            con: c,
                            lit: li,
                            was_true: t,
                        });
                    }
                }
            }
            self.enqueue(c);
        }
    }

    /// Narrows `v` to `x`; false on conflict.
    pub fn assign(&mut self, v: VarId, x: i64) -> bool {
        if !self.contains(v, x) {
            return false;
        }
        if self.is_fixed(v) {
            return true;
        }
        let i = v as usize;
        self.trail.push(Trail::Lo(v, self.lo[i]));
        self.trail.push(Trail::Hi(v, self.hi[i]));
        self.lo[i] = x;
        self.hi[i] = x;
        self.notify(v);
        true
    }

    /// Removes `x` from the domain of `v`; false on conflict.
    pub fn remove(&mut self, v: VarId, x: i64) -> bool {
        if !self.contains(v, x) {
            return true;
        }
        if self.is_fixed(v) {
            return false;
        }
        let i = v as usize;
        if x == self.lo[i] {
            self.trail.push(Trail::Lo(v, self.lo[i]));
            let mut lo = x + 1;
            while self.holes.get(&v).is_some_and(|h| h.contains(&lo)) {
                lo += 1;
            }
            self.lo[i] = lo;
        } else if x == self.hi[i] {
            self.trail.push(Trail::Hi(v, self.hi[i]));
            let mut hi = x - 1;
            while self.holes.get(&v).is_some_and(|h| h.contains(&hi)) {
                hi -= 1;
            }
            self.hi[i] = hi;
        } else {
            self.trail.push(Trail::Hole(v));
            self.holes.entry(v).or_default().push(x);
        }
        if self.lo[i] > self.hi[i] {
            return false;
        }
        self.notify(v);
        true
    }

    fn set_lit(&mut self, l: Lit, truth: bool) -> bool {
        if truth == l.pos {
            self.assign(l.var, l.value)
        } else {
            self.remove(l.var, l.value)
        }
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            match self.trail.pop().expect("trail longer than mark") {
                Trail::Lo(v, x) => self.lo[v as usize] = x,
                Trail::Hi(v, x) => self.hi[v as usize] = x,
                Trail::Hole(v) => {
                    if let Some(h) = self.holes.get_mut(&v) {
                        h.pop();
                    }
                }
                Trail::Count { con, lit, was_true } => {
                    let slot = (self.lit_base[con as usize] + lit) as usize;
                    self.lit_known[slot] = false;
                    if was_true {
                        self.n_true[con as usize] -= 1;
                    } else {
                        self.n_false[con as usize] -= 1;
                    }
                }
            }
        }
    }

    fn clear_queue(&mut self) {
        while let Some(c) = self.queue.pop_front() {
            self.queued[c as usize] = false;
        }
    }

    /// Runs every queued constraint to fixpoint; false on conflict.
    pub fn propagate(&mut self) -> bool {
        while let Some(c) = self.queue.pop_front() {
            self.queued[c as usize] = false;
            self.counters.propagations += 1;
            if !self.propagate_one(c) {
                self.clear_queue();
                return false;
            }
        }
        true
    }

    /// Forces every undecided literal of a counting constraint.
    fn force_unknown(&mut self, c: u32, truth: bool) -> bool {
        let n = match &self.cons[c as usize] {
            Con::Card { lits, .. } | Con::Reif { lits, .. } => lits.len(),
            _ => 0,
        };
        let base = self.lit_base[c as usize] as usize;
        for i in 0..n {
            if self.lit_known[base + i] {
                continue;
            }
            let l = match &self.cons[c as usize] {
                Con::Card { lits, .. } | Con::Reif { lits, .. } => lits[i],
                _ => unreachable!(),
            };
            if !self.set_lit(l, truth) {
                return false;
            }
        }
        true
    }

    /// Enforces `count cmp k` given the current counters.
    fn enforce(&mut self, c: u32, cmp: Cmp, k: u32, len: u32) -> bool {
        let t = self.n_true[c as usize];
        let u = len - t - self.n_false[c as usize];
        let upper = matches!(cmp, Cmp::Eq | Cmp::Le);
        let lower = matches!(cmp, Cmp::Eq | Cmp::Ge);
        if (upper && t > k) || (lower && t + u < k) {
            return false;
        }
        if u == 0 {
            return true;
        }
        if upper && t == k {
            return self.force_unknown(c, false);
        }
        if lower && t + u == k {
            return self.force_unknown(c, true);
        }
        true
    }

    fn propagate_one(&mut self, c: u32) -> bool {
        match self.cons[c as usize].clone_shape() {
            Shape::Card { cmp, k, len } => self.enforce(c, cmp, k, len),
            Shape::Reif { ind, cmp, k, len } => {
                let t = self.n_true[c as usize];
                let u = len - t - self.n_false[c as usize];
                match self.status(Lit::is_true(ind)) {
                    Some(true) => self.enforce(c, cmp, k, len),
                    Some(false) => match cmp {
                        Cmp::Le => self.enforce(c, Cmp::Ge, k + 1, len),
                        Cmp::Ge if k == 0 => false,
                        Cmp::Ge => self.enforce(c, Cmp::Le, k - 1, len),
                        Cmp::Eq => {
                            if u == 0 {
                                t != k
                            } else if u == 1 && t == k {
                                self.force_unknown(c, true)
                            } else if u == 1 && t + 1 == k {
                                self.force_unknown(c, false)
                            } else {
                                true
                            }
                        }
                    },
                    None => {
                        let entailed = match cmp {
                            Cmp::Eq => u == 0 && t == k,
                            Cmp::Le => t + u <= k,
                            Cmp::Ge => t >= k,
                        };
                        let refuted = match cmp {
                            Cmp::Eq => t > k || t + u < k,
                            Cmp::Le => t > k,
                            Cmp::Ge => t + u < k,
                        };
                        if entailed {
                            self.assign(ind, 1)
                        } else if refuted {
                            self.assign(ind, 0)
                        } else {
                            true
                        }
                    }
                }
            }
            Shape::Iff { a, b } => {
                if self.is_fixed(a) {
                    self.assign(b, self.value(a))
                } else if self.is_fixed(b) {
                    self.assign(a, self.value(b))
                } else {
                    true
                }
            }
            Shape::Xor { a, b } => match (self.status(a), self.status(b)) {
                (Some(x), Some(y)) => x != y,
                (Some(x), None) => self.set_lit(b, !x),
                (None, Some(y)) => self.set_lit(a, !y),
                (None, None) => true,
            },
            Shape::Implies { a, b } => match (self.status(a), self.status(b)) {
                (Some(true), Some(false)) => false,
                (Some(true), None) => self.set_lit(b, true),
                (None, Some(false)) => self.set_lit(a, false),
                _ => true,
            },
        }
    }

    /// Adds a clause excluding the current values of `vars` at the root.
    /// Returns false when the root becomes inconsistent.
    pub fn block(&mut self, vars: &[VarId], values: &[i64]) -> bool {
        self.undo_to(self.root_trail);
        self.stack.clear();
        let lits = vars
            .iter()
            .map(|&v| Lit {
                var: v,
                value: values[v as usize],
                pos: false,
            })
            .collect();
        self.add(Con::Card {
            lits,
            cmp: Cmp::Ge,
            k: 1,
        });
        self.enqueue(self.cons.len() as u32 - 1);
        let ok = self.propagate();
        self.root_trail = self.trail.len();
        self.root_failed = !ok;
        ok
    }

    /// Static variable order: root-decided first, then constrained, then
    /// free variables, each block shuffled.
    pub fn shuffle_order(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.lo.len() as VarId;
        let mut decided = Vec::new();
        let mut constrained = Vec::new();
        let mut free = Vec::new();
        for v in 0..n {
            if self.is_fixed(v) {
                decided.push(v);
            } else if !self.occ[v as usize].is_empty() || self.group_of[v as usize] != NONE {
                constrained.push(v);
            } else {
                free.push(v);
            }
        }
        decided.shuffle(rng);
        constrained.shuffle(rng);
        free.shuffle(rng);
        self.order = decided;
        self.order.extend(constrained);
        self.order.extend(free);
    }

    fn random_value(&self, v: VarId, rng: &mut ChaCha8Rng) -> i64 {
        let (lo, hi) = (self.lo[v as usize], self.hi[v as usize]);
        loop {
            let x = rng.gen_range(lo..=hi);
            if self.contains(v, x) {
                return x;
            }
        }
    }

    /// Undoes to the most recent frame with an untried alternative and
    /// applies it. False when the search space is exhausted.
    fn backtrack(&mut self, pos: &mut usize) -> bool {
        loop {
            let Some(frame) = self.stack.last_mut() else {
                return false;
            };
            let (len, frame_pos) = (frame.trail_len, frame.pos);
            let step = match &mut frame.alt {
                Alt::Bool { var, next } => next.take().map(|b| (*var, b as i64, true)),
                Alt::Int { var, value, excluded } => (!*excluded).then(|| {
                    *excluded = true;
                    (*var, *value, false)
                }),
                Alt::Group { cands, next } => (*next < cands.len()).then(|| {
                    *next += 1;
                    (cands[*next - 1], 1, true)
                }),
            };
            self.undo_to(len);
            match step {
                None => {
                    self.stack.pop();
                }
                Some((v, x, assign)) => {
                    let ok = if assign { self.assign(v, x) } else { self.remove(v, x) };
                    if ok && self.propagate() {
                        *pos = frame_pos;
                        return true;
                    }
                }
            }
        }
    }

    /// Depth-first search from the current state. On `Solution` the engine
    /// holds a total assignment; calling `search` again resumes after it.
    pub fn search(
        &mut self,
        rng: &mut ChaCha8Rng,
        deadline: Option<Instant>,
        restart_base: Option<u64>,
        resume: bool,
    ) -> SearchEnd {
        if self.root_failed {
            return SearchEnd::Exhausted;
        }
        let mut pos = 0;
        if resume && !self.backtrack(&mut pos) {
            return SearchEnd::Exhausted;
        }
        let mut restart_limit = restart_base;
        let mut since_restart = 0u64;
        loop {
            while pos < self.order.len() && self.is_fixed(self.order[pos]) {
                pos += 1;
            }
            if pos == self.order.len() {
                return SearchEnd::Solution;
            }
            self.counters.nodes += 1;
            since_restart += 1;
            if self.counters.nodes.is_multiple_of(256) && deadline.is_some_and(|d| Instant::now() > d) {
                return SearchEnd::Timeout;
            }
            if let Some(limit) = restart_limit {
                if since_restart > limit {
                    self.undo_to(self.root_trail);
                    self.stack.clear();
                    self.shuffle_order(rng);
                    self.counters.restarts += 1;
                    since_restart = 0;
                    restart_limit = Some(limit + limit / 2);
                    pos = 0;
                    continue;
                }
            }
            let var = self.order[pos];
            let (alt, first) = if self.group_of[var as usize] != NONE {
                let mut cands: Vec<VarId> = self.groups[self.group_of[var as usize] as usize]
                    .iter()
                    .copied()
                    .filter(|&v| self.contains(v, 1))
                    .collect();
                cands.shuffle(rng);
                let first = cands.first().map(|&c| (c, 1));
                (Alt::Group { cands, next: 1 }, first)
            } else if self.lo[var as usize] == 0 && self.hi[var as usize] == 1 {
                let b: bool = rng.gen();
                (Alt::Bool { var, next: Some(!b) }, Some((var, b as i64)))
            } else {
                let value = self.random_value(var, rng);
                (
                    Alt::Int {
                        var,
                        value,
                        excluded: false,
                    },
                    Some((var, value)),
                )
            };
            self.stack.push(Frame {
                trail_len: self.trail.len(),
                pos,
                alt,
            });
            let ok = match first {
                Some((v, x)) => self.assign(v, x) && self.propagate(),
                None => false,
            };
            if !ok && !self.backtrack(&mut pos) {
                return SearchEnd::Exhausted;
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Card { cmp: Cmp, k: u32, len: u32 },
    Reif { ind: VarId, cmp: Cmp, k: u32, len: u32 },
    Iff { a: VarId, b: VarId },
    Xor { a: Lit, b: Lit },
    Implies { a: Lit, b: Lit },
}

impl Con {
    fn clone_shape(&self) -> Shape {
        match self {
            Con::Card { lits, cmp, k } => Shape::Card {
                cmp: *cmp,
                k: *k,
                len: lits.len() as u32,
            },
            Con::Reif { ind, lits, cmp, k } => Shape::Reif {
                ind: *ind,
                cmp: *cmp,
                k: *k,
                len: lits.len() as u32,
            },
            Con::Iff { a, b } => Shape::Iff { a: *a, b: *b },
            Con::Xor { a, b } => Shape::Xor { a: *a, b: *b },
            Con::Implies { a, b } => Shape::Implies { a: *a, b: *b },
        }
    }
}
