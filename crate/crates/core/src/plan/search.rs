use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::ground::GroundTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    Bfs,
    GreedyHAdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Budget {
    pub max_expansions: Option<u64>,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanOutcome {
    /// Indices into `GroundTask::actions`.
    Plan(Vec<usize>),
    NoPlan,
    /// Budget exhausted.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanStats {
    pub expansions: u64,
    pub generated: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanResult {
    pub outcome: PlanOutcome,
    pub stats: PlanStats,
}

/// Successor of `state` under action `a`, or `None` when inapplicable.
pub fn apply(task: &GroundTask, state: &[bool], a: usize) -> Option<Vec<bool>> {
    let act = &task.actions[a];
    if !act.pre.iter().all(|&p| state[p as usize]) || act.pre_neg.iter().any(|&p| state[p as usize]) {
        return None;
    }
    let mut next = state.to_vec();
    for &d in &act.del {
        next[d as usize] = false;
    }
    for &p in &act.add {
        next[p as usize] = true;
    }
    Some(next)
}

pub fn is_goal(task: &GroundTask, state: &[bool]) -> bool {
    task.goal.iter().all(|&g| state[g as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanValidity {
    Valid,
    /// 1-based step whose preconditions fail.
    Inapplicable { step: usize },
    GoalUnsatisfied,
    UnknownAction { step: usize },
}

/// Replays `plan`, given as `(name arg...)` strings, from the initial state.
pub fn validate_plan<S: AsRef<str>>(task: &GroundTask, plan: &[S]) -> PlanValidity {
    let by_name: HashMap<String, usize> = task
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.to_string(), i))
        .collect();
    let mut state = task.init.clone();
    for (i, step) in plan.iter().enumerate() {
        let words: Vec<&str> = step
            .as_ref()
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split_whitespace()
            .collect();
        let key = format!("({})", words.join(" ").to_ascii_lowercase());
        let Some(&a) = by_name.get(&key) else {
            return PlanValidity::UnknownAction { step: i + 1 };
        };
        match apply(task, &state, a) {
            Some(next) => state = next,
            None => return PlanValidity::Inapplicable { step: i + 1 },
        }
    }
    if is_goal(task, &state) {
        PlanValidity::Valid
    } else {
        PlanValidity::GoalUnsatisfied
    }
}

struct CompactAction {
    index: usize,
    pre: Vec<u32>,
    pre_neg: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
}

/// The task restricted to fluents, with states as bitsets.
struct Compact {
    init: Vec<u64>,
    goal: Vec<u32>,
    actions: Vec<CompactAction>,
    /// Actions keyed by their first positive precondition.
    by_first: Vec<Vec<u32>>,
    unconditioned: Vec<u32>,
    /// Actions with `p` among their positive preconditions.
    by_pre: Vec<Vec<u32>>,
    n: usize,
}

fn get(s: &[u64], i: u32) -> bool {
    s[(i / 64) as usize] >> (i % 64) & 1 == 1
}

fn set(s: &mut [u64], i: u32, v: bool) {
    let w = &mut s[(i / 64) as usize];
    if v {
        *w |= 1 << (i % 64);
    } else {
        *w &= !(1 << (i % 64));
    }
}

impl Compact {
    /// `None` when some goal is a static atom that is false.
    fn new(task: &GroundTask) -> Option<Compact> {
        let mut slot = vec![u32::MAX; task.atoms.len()];
        let mut n = 0u32;
        for a in &task.actions {
            for &p in a.add.iter().chain(&a.del) {
                if slot[p as usize] == u32::MAX {
                    slot[p as usize] = n;
                    n += 1;
                }
            }
        }
        let n = n as usize;
        let words = n.div_ceil(64).max(1);
        let mut init = vec![0u64; words];
        for (i, &s) in slot.iter().enumerate() {
            if s != u32::MAX && task.init[i] {
                set(&mut init, s, true);
            }
        }
        let mut goal = Vec::new();
        for &g in &task.goal {
            match slot[g as usize] {
                u32::MAX if !task.init[g as usize] => return None,
                u32::MAX => {}
                s => goal.push(s),
            }
        }
        let fluents = |xs: &[u32]| -> Vec<u32> {
            xs.iter()
                .filter(|&&p| slot[p as usize] != u32::MAX)
                .map(|&p| slot[p as usize])
                .collect()
        };
        let mut actions = Vec::new();
        for (index, a) in task.actions.iter().enumerate() {
            let static_ok = a
                .pre
                .iter()
                .filter(|&&p| slot[p as usize] == u32::MAX)
                .all(|&p| task.init[p as usize])
                && a.pre_neg
                    .iter()
                    .filter(|&&p| slot[p as usize] == u32::MAX)
                    .all(|&p| !task.init[p as usize]);
            if static_ok {
                actions.push(CompactAction {
                    index,
                    pre: fluents(&a.pre),
                    pre_neg: fluents(&a.pre_neg),
                    add: fluents(&a.add),
                    del: fluents(&a.del),
                });
            }
        }
        let mut by_first = vec![Vec::new(); n];
        let mut by_pre = vec![Vec::new(); n];
        let mut unconditioned = Vec::new();
        for (i, a) in actions.iter().enumerate() {
            match a.pre.first() {
                Some(&p) => by_first[p as usize].push(i as u32),
                None => unconditioned.push(i as u32),
            }
            for &p in &a.pre {
                by_pre[p as usize].push(i as u32);
            }
        }
        Some(Compact {
            init,
            goal,
            actions,
            by_first,
            unconditioned,
            by_pre,
            n,
        })
    }

    fn is_goal(&self, s: &[u64]) -> bool {
        self.goal.iter().all(|&g| get(s, g))
    }

    /// Applicable actions in index order.
    fn applicable(&self, s: &[u64], out: &mut Vec<u32>) {
        out.clear();
        out.extend_from_slice(&self.unconditioned);
        for (w, &word) in s.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let p = w * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                out.extend_from_slice(&self.by_first[p]);
            }
        }
        out.sort_unstable();
        out.retain(|&a| {
            let a = &self.actions[a as usize];
            a.pre.iter().all(|&p| get(s, p)) && !a.pre_neg.iter().any(|&p| get(s, p))
        });
    }

    fn successor(&self, s: &[u64], a: u32) -> Box<[u64]> {
        let a = &self.actions[a as usize];
        let mut next: Box<[u64]> = s.into();
        for &d in &a.del {
            set(&mut next, d, false);
        }
        for &p in &a.add {
            set(&mut next, p, true);
        }
        next
    }

    /// Additive heuristic with unit action costs; `None` for dead ends.
    fn h_add(&self, s: &[u64], cost: &mut Vec<u64>, waiting: &mut Vec<u32>, sum: &mut Vec<u64>) -> Option<u64> {
        cost.clear();
        cost.resize(self.n, u64::MAX);
        waiting.clear();
        waiting.extend(self.actions.iter().map(|a| a.pre.len() as u32));
        sum.clear();
        sum.resize(self.actions.len(), 0);
        let mut heap = BinaryHeap::new();
        for p in 0..self.n as u32 {
            if get(s, p) {
                cost[p as usize] = 0;
                heap.push(Reverse((0u64, p)));
            }
        }
        let fire = |a: u32, heap: &mut BinaryHeap<Reverse<(u64, u32)>>, cost: &mut Vec<u64>, c: u64| {
            for &q in &self.actions[a as usize].add {
                if c < cost[q as usize] {
                    cost[q as usize] = c;
                    heap.push(Reverse((c, q)));
                }
            }
        };
        for &a in &self.unconditioned {
            fire(a, &mut heap, cost, 1);
        }
        while let Some(Reverse((c, p))) = heap.pop() {
            if c > cost[p as usize] {
                continue;
            }
            for &a in &self.by_pre[p as usize] {
                let ai = a as usize;
                sum[ai] = sum[ai].saturating_add(c);
                waiting[ai] -= 1;
                if waiting[ai] == 0 {
                    fire(a, &mut heap, cost, 1 + sum[ai]);
                }
            }
        }
        let mut h = 0u64;
        for &g in &self.goal {
            let c = cost[g as usize];
            if c == u64::MAX {
                return None;
            }
            h += c;
        }
        Some(h)
    }
}

struct Node {
    parent: u32,
    action: u32,
}

fn extract(c: &Compact, nodes: &[Node], mut id: u32, last: u32) -> Vec<usize> {
    let mut plan = vec![c.actions[last as usize].index];
    while id != 0 {
        let n = &nodes[id as usize];
        plan.push(c.actions[n.action as usize].index);
        id = n.parent;
    }
    plan.reverse();
    plan
}

/// Searches for a plan. Both strategies test goals on generation and
/// generate successors in action index order.
pub fn solve_plan(task: &GroundTask, search: Search, budget: Budget) -> PlanResult {
    let start = Instant::now();
    let deadline = budget.time_limit.map(|t| start + t);
    let mut stats = PlanStats::default();
    let done = |outcome, mut stats: PlanStats| {
        stats.wall_time_ms = start.elapsed().as_millis() as u64;
        PlanResult { outcome, stats }
    };
    let Some(c) = Compact::new(task) else {
        return done(PlanOutcome::NoPlan, stats);
    };
    if c.is_goal(&c.init) {
        return done(PlanOutcome::Plan(Vec::new()), stats);
    }
    let mut states: Vec<Box<[u64]>> = vec![c.init.clone().into()];
    let mut nodes = vec![Node { parent: 0, action: u32::MAX }];
    let mut seen: HashMap<Box<[u64]>, u32> = HashMap::new();
    seen.insert(states[0].clone(), 0);
    let mut fifo: VecDeque<u32> = VecDeque::from([0]);
    let mut open: BinaryHeap<Reverse<(u64, u64, u32)>> = BinaryHeap::new();
    let (mut cost, mut waiting, mut sum) = (Vec::new(), Vec::new(), Vec::new());
    match search {
        Search::Bfs => {}
        Search::GreedyHAdd => match c.h_add(&c.init, &mut cost, &mut waiting, &mut sum) {
            Some(h) => open.push(Reverse((h, 0, 0))),
            None => return done(PlanOutcome::NoPlan, stats),
        },
    }
    let mut counter = 1u64;
    let mut succ = Vec::new();
    loop {
        let id = match search {
            Search::Bfs => fifo.pop_front(),
            Search::GreedyHAdd => open.pop().map(|Reverse((_, _, id))| id),
        };
        let Some(id) = id else {
            return done(PlanOutcome::NoPlan, stats);
        };
        if budget.max_expansions.is_some_and(|m| stats.expansions >= m)
            || (stats.expansions % 64 == 0 && deadline.is_some_and(|d| Instant::now() >= d))
        {
            return done(PlanOutcome::Unknown, stats);
        }
        stats.expansions += 1;
        let state = states[id as usize].clone();
        c.applicable(&state, &mut succ);
        for &a in &succ {
            let next = c.successor(&state, a);
            stats.generated += 1;
            if seen.contains_key(&next) {
                continue;
            }
            if c.is_goal(&next) {
                return done(PlanOutcome::Plan(extract(&c, &nodes, id, a)), stats);
            }
            let h = match search {
                Search::Bfs => 0,
                Search::GreedyHAdd => match c.h_add(&next, &mut cost, &mut waiting, &mut sum) {
                    Some(h) => h,
                    None => continue,
                },
            };
            let nid = states.len() as u32;
            seen.insert(next.clone(), nid);
            states.push(next);
            nodes.push(Node { parent: id, action: a });
            match search {
                Search::Bfs => fifo.push_back(nid),
                Search::GreedyHAdd => {
                    open.push(Reverse((h, counter, nid)));
                    counter += 1;
                }
            }
        }
    }
}

/// Number of states reachable from the initial state, or `None` when it
/// exceeds `limit`.
pub fn count_reachable(task: &GroundTask, limit: usize) -> Option<usize> {
    let Some(c) = Compact::new(task) else {
        // Static goals do not restrict reachability; count without them.
        let mut t = task.clone();
        t.goal.clear();
        return count_reachable(&t, limit);
    };
    let mut seen: std::collections::HashSet<Box<[u64]>> = std::collections::HashSet::new();
    let init: Box<[u64]> = c.init.clone().into();
    seen.insert(init.clone());
    let mut queue = VecDeque::from([init]);
    let mut succ = Vec::new();
    while let Some(s) = queue.pop_front() {
        c.applicable(&s, &mut succ);
        for &a in &succ {
            let next = c.successor(&s, a);
            if seen.insert(next.clone()) {
                if seen.len() > limit {
                    return None;
                }
                queue.push_back(next);
            }
        }
    }
    Some(seen.len())
}
