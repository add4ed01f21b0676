//! End-to-end helpers: compile once, sample many, grade, and time.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{compile, count_constraints, ConstraintModel, Encoding, GeneratorConfig, ModelError};
use crate::pddl::{DomainSpec, ProblemInstance};
use crate::plan::{grade, Budget};
use crate::solve::{decode, generate_with, SolveError, SolveOptions, SolveResult, SolveStats};
use crate::tune::Evaluation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SampleError {
    #[error("no valid instance exists for this configuration")]
    Unsat,
    #[error("time limit reached")]
    Timeout,
    #[error(transparent)]
    Decode(#[from] SolveError),
}

/// A compiled model ready for sampling.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    pub domain: &'a DomainSpec,
    pub config: GeneratorConfig,
    pub model: ConstraintModel,
    pub compile_time: Duration,
}

impl<'a> Generator<'a> {
    pub fn new(domain: &'a DomainSpec, config: &GeneratorConfig, encoding: Encoding) -> Result<Self, ModelError> {
        let start = Instant::now();
        let model = compile(domain, config, encoding)?;
        Ok(Generator {
            domain,
            config: config.clone(),
            model,
            compile_time: start.elapsed(),
        })
    }

    /// Draws one instance; provenance records the solver statistics.
    pub fn sample(&self, seed: u64, opts: &SolveOptions) -> (Result<ProblemInstance, SampleError>, SolveStats) {
        let out = generate_with(&self.model, seed, opts);
        let stats = out.stats;
        let inst = match (stats.result, out.assignment) {
            (SolveResult::Sat, Some(a)) => decode(&self.model, &a, self.domain, &self.config.with_seed(seed))
                .map(|mut inst| {
                    if let Some(p) = inst.provenance.as_mut() {
                        p.stats = stats.clone();
                    }
                    inst
                })
                .map_err(SampleError::from),
            (SolveResult::Timeout, _) => Err(SampleError::Timeout),
            _ => Err(SampleError::Unsat),
        };
        (inst, stats)
    }
}

/// Compiles, samples and grades one configuration. The config's `seed`
/// drives sampling. Model errors count as unsatisfiable.
pub fn evaluate(
    domain: &DomainSpec,
    config: &GeneratorConfig,
    encoding: Encoding,
    opts: &SolveOptions,
    budget: Budget,
) -> Evaluation {
    let start = Instant::now();
    let Ok(gen) = Generator::new(domain, config, encoding) else {
        return Evaluation {
            result: SolveResult::Unsat,
            gen_time_ms: start.elapsed().as_millis() as u64,
            grade: None,
        };
    };
    let (inst, stats) = gen.sample(config.seed, opts);
    let gen_time_ms = start.elapsed().as_millis() as u64;
    match inst {
        Ok(inst) => Evaluation {
            result: SolveResult::Sat,
            gen_time_ms,
            grade: Some(grade(domain, &inst, budget)),
        },
        Err(_) => Evaluation {
            result: stats.result,
            gen_time_ms,
            grade: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub tile_size: u64,
    pub encoding: Encoding,
    pub constraint_count: u64,
    pub gen_time_ms: u64,
    pub result: SolveResult,
}

pub const BENCH_HEADER: &str = "tile_size,encoding,constraint_count,gen_time_ms,result";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:?}",
            self.tile_size, self.encoding, self.constraint_count, self.gen_time_ms, self.result
        )
    }
}

/// Sets the size parameter of the domain's single grid template.
pub fn with_grid_size(domain: &DomainSpec, base: &GeneratorConfig, s: u64) -> Result<GeneratorConfig, ModelError> {
    let spec = domain.validity.as_ref().ok_or(ModelError::NoValiditySpec)?;
    let [tpl] = spec.structures.as_slice() else {
        return Err(ModelError::BadParam {
            name: "tile_size".into(),
            value: s,
            reason: format!("domain has {} grid templates, expected one", spec.structures.len()),
        });
    };
    let mut c = base.clone();
    c.assignment.insert(tpl.aux_param.clone(), s);
    Ok(c)
}

/// Times compile + solve at grid size `s`, taking the median of `reps`
/// runs. A timeout ends the repetitions early.
pub fn bench_row(
    domain: &DomainSpec,
    base: &GeneratorConfig,
    s: u64,
    encoding: Encoding,
    time_limit: Option<Duration>,
    reps: usize,
) -> Result<BenchRow, ModelError> {
    let config = with_grid_size(domain, base, s)?;
    let mut times = Vec::new();
    let mut result = SolveResult::Sat;
    let mut constraint_count = 0;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let gen = Generator::new(domain, &config, encoding)?;
        constraint_count = count_constraints(&gen.model).structural;
        let remaining = time_limit.map(|t| t.saturating_sub(start.elapsed()));
        let out = generate_with(
            &gen.model,
            config.seed,
            &SolveOptions {
                time_limit: remaining,
                restart_base: None,
            },
        );
        times.push(start.elapsed().as_millis() as u64);
        result = out.stats.result;
        if result == SolveResult::Timeout {
            break;
        }
    }
    times.sort_unstable();
    Ok(BenchRow {
        tile_size: s,
        encoding,
        constraint_count,
        gen_time_ms: times[times.len() / 2],
        result,
    })
}
