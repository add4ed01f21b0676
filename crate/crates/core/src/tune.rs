//! Racing search over generator parameters.
//!
//! Round 0 draws up to 16 configurations. Every round scores the survivors
//! on a shared batch of fresh seeds, drops the lower half by mean score and
//! doubles the batch, until one survivor is left or the budget runs out.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GeneratorConfig;
use crate::plan::{GradeReport, Solvable};
use crate::solve::SolveResult;

pub const MAX_POPULATION: usize = 16;
pub const INITIAL_SEEDS: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TuneError {
    #[error("budget {budget} is below twice the population ({population})")]
    BudgetTooSmall { budget: u64, population: usize },
    #[error("empty parameter space")]
    EmptySpace,
    #[error("parameter `{name}` has lower {lower} > upper {upper}")]
    BadRange { name: String, lower: u64, upper: u64 },
    #[error("target has no criteria")]
    NoCriteria,
    #[error("weight of `{0}` must be positive")]
    BadWeight(String),
    #[error("parameter space {found:?} does not match the domain's {expected:?}")]
    ParamMismatch {
        expected: BTreeSet<String>,
        found: BTreeSet<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lower: u64,
    pub upper: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    pub params: BTreeMap<String, ParamRange>,
}

impl ParamSpace {
    pub fn new<S: Into<String>>(ranges: impl IntoIterator<Item = (S, u64, u64)>) -> Self {
        ParamSpace {
            params: ranges
                .into_iter()
                .map(|(n, lower, upper)| (n.into(), ParamRange { lower, upper }))
                .collect(),
        }
    }

    pub fn check(&self) -> Result<(), TuneError> {
        if self.params.is_empty() {
            return Err(TuneError::EmptySpace);
        }
        for (name, r) in &self.params {
            if r.lower > r.upper {
                return Err(TuneError::BadRange {
                    name: name.clone(),
                    lower: r.lower,
                    upper: r.upper,
                });
            }
        }
        Ok(())
    }

    /// Requires the parameter names to be exactly `expected`.
    pub fn check_names(&self, expected: &BTreeSet<String>) -> Result<(), TuneError> {
        let found: BTreeSet<String> = self.params.keys().cloned().collect();
        if &found != expected {
            return Err(TuneError::ParamMismatch {
                expected: expected.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Number of points, if it fits in a `u64`.
    pub fn size(&self) -> Option<u64> {
        self.params
            .values()
            .try_fold(1u64, |acc, r| acc.checked_mul(r.upper - r.lower + 1))
    }

    /// The `i`-th point in lexicographic order.
    fn point(&self, mut i: u64) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for (name, r) in self.params.iter().rev() {
            let w = r.upper - r.lower + 1;
            out.insert(name.clone(), r.lower + i % w);
            i /= w;
        }
        out
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> BTreeMap<String, u64> {
        self.params
            .iter()
            .map(|(n, r)| (n.clone(), rng.gen_range(r.lower..=r.upper)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<usize>,
}

impl Interval {
    pub fn contains(&self, v: usize) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub solvable: f64,
    pub plan_length: f64,
    pub gen_time: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            solvable: 1.0,
            plan_length: 1.0,
            gen_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TuneTarget {
    /// Required solvability: `true` asks for `Yes`, `false` for `No`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solvable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_length: Option<Interval>,
    /// Ceiling on generation wall time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_time_ms: Option<u64>,
    #[serde(default)]
    pub weights: Weights,
}

impl TuneTarget {
    pub fn check(&self) -> Result<(), TuneError> {
        let criteria = [
            ("solvable", self.solvable.is_some(), self.weights.solvable),
            ("plan_length", self.plan_length.is_some(), self.weights.plan_length),
            ("gen_time", self.gen_time_ms.is_some(), self.weights.gen_time),
        ];
        if !criteria.iter().any(|c| c.1) {
            return Err(TuneError::NoCriteria);
        }
        for (name, present, w) in criteria {
            if present && !(w > 0.0 && w.is_finite()) {
                return Err(TuneError::BadWeight(name.into()));
            }
        }
        Ok(())
    }
}

/// One generate-and-grade run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub result: SolveResult,
    pub gen_time_ms: u64,
    pub grade: Option<GradeReport>,
}

/// Weighted fraction of the target's criteria met by one evaluation.
pub fn score_one(e: &Evaluation, target: &TuneTarget) -> f64 {
    if e.result != SolveResult::Sat {
        return 0.0;
    }
    let w = &target.weights;
    let mut total = 0.0;
    let mut met = 0.0;
    let grade = e.grade.as_ref();
    if let Some(want) = target.solvable {
        total += w.solvable;
        let wanted = if want { Solvable::Yes } else { Solvable::No };
        if grade.is_some_and(|g| g.solvable == wanted) {
            met += w.solvable;
        }
    }
    if let Some(iv) = target.plan_length {
        total += w.plan_length;
        if grade.and_then(|g| g.plan_length).is_some_and(|l| iv.contains(l)) {
            met += w.plan_length;
        }
    }
    if let Some(ceiling) = target.gen_time_ms {
        total += w.gen_time;
        if e.gen_time_ms <= ceiling {
            met += w.gen_time;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        met / total
    }
}

/// Mean of [`score_one`] over `evals`; 0 for an empty slice.
pub fn score(evals: &[Evaluation], target: &TuneTarget) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    evals.iter().map(|e| score_one(e, target)).sum::<f64>() / evals.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub config: BTreeMap<String, u64>,
    pub mean: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round: usize,
    pub seeds: Vec<u64>,
    /// Every configuration raced this round, with its cumulative mean.
    pub candidates: Vec<Candidate>,
    /// Indices into `candidates` that survive.
    pub survivors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: GeneratorConfig,
    pub best_mean: f64,
    pub history: Vec<Round>,
    pub evaluations: u64,
    /// Set when every configuration scored 0 in round 0.
    pub all_zero: bool,
}

/// Runs the race. `eval` must be a pure function of the configuration,
/// whose `seed` field carries the evaluation seed.
pub fn race<F>(space: &ParamSpace, target: &TuneTarget, budget: u64, seed: u64, eval: F) -> Result<TuneResult, TuneError>
where
    F: Fn(&GeneratorConfig) -> Evaluation + Sync,
{
    space.check()?;
    target.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = space.size();
    let population = size.map_or(MAX_POPULATION, |n| n.min(MAX_POPULATION as u64) as usize);
    if budget < 2 * population as u64 {
        return Err(TuneError::BudgetTooSmall { budget, population });
    }
    let configs: Vec<BTreeMap<String, u64>> = match size {
        Some(n) if n <= MAX_POPULATION as u64 => (0..n).map(|i| space.point(i)).collect(),
        _ => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            while out.len() < population {
                let p = space.sample(&mut rng);
                if seen.insert(p.clone()) {
                    out.push(p);
                }
            }
            out
        }
    };
    let mut sums = vec![0.0f64; configs.len()];
    let mut counts = vec![0u64; configs.len()];
    let mut alive: Vec<usize> = (0..configs.len()).collect();
    let mut used = 0u64;
    let mut r = INITIAL_SEEDS;
    let mut history = Vec::new();
    let mut all_zero = false;
    loop {
        let per = r.min((budget - used) / alive.len() as u64);
        if per == 0 {
            break;
        }
        let seeds: Vec<u64> = (0..per).map(|_| rng.gen()).collect();
        let jobs: Vec<(usize, u64)> = alive.iter().flat_map(|&c| seeds.iter().map(move |&s| (c, s))).collect();
        let scores: Vec<f64> = jobs
            .par_iter()
            .map(|&(c, s)| {
                let cfg = GeneratorConfig {
                    assignment: configs[c].clone(),
                    seed: s,
                    int_max: None,
                };
                score_one(&eval(&cfg), target)
            })
            .collect();
        used += jobs.len() as u64;
        for (&(c, _), s) in jobs.iter().zip(&scores) {
            sums[c] += s;
            counts[c] += 1;
        }
        let mean = |c: usize| sums[c] / counts[c] as f64;
        if history.is_empty() {
            all_zero = alive.iter().all(|&c| mean(c) == 0.0);
        }
        let mut ranked = alive.clone();
        ranked.sort_by(|&a, &b| mean(b).total_cmp(&mean(a)).then(a.cmp(&b)));
        let keep = ranked.len().div_ceil(2);
        let cutoff = mean(ranked[keep - 1]);
        let next: Vec<usize> = alive.iter().copied().filter(|&c| mean(c) >= cutoff).collect();
        history.push(Round {
            round: history.len(),
            seeds,
            candidates: alive
                .iter()
                .map(|&c| Candidate {
                    config: configs[c].clone(),
                    mean: mean(c),
                    evaluations: counts[c],
                })
                .collect(),
            survivors: alive
                .iter()
                .enumerate()
                .filter(|(_, c)| next.contains(c))
                .map(|(i, _)| i)
                .collect(),
        });
        alive = next;
        if alive.len() == 1 {
            break;
        }
        r *= 2;
    }
    let mean = |c: usize| if counts[c] == 0 { 0.0 } else { sums[c] / counts[c] as f64 };
    let best = *alive
        .iter()
        .max_by(|&&a, &&b| mean(a).total_cmp(&mean(b)).then(b.cmp(&a)))
        .expect("at least one survivor");
    Ok(TuneResult {
        best: GeneratorConfig {
            assignment: configs[best].clone(),
            seed,
            int_max: None,
        },
        best_mean: mean(best),
        history,
        evaluations: used,
        all_zero,
    })
}
