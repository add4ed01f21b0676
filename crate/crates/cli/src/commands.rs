use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use instgen::augment::Scope;
use instgen::model::{compile, count_constraints, listing, required_params, Encoding, GeneratorConfig, ModelSummary};
use instgen::pddl::{emit_problem, parse_domain, parse_problem, DomainSpec, ProblemInstance};
use instgen::pipeline::{bench_row, evaluate, with_grid_size, Generator, BENCH_HEADER};
use instgen::plan::{grade, validate_instance, Budget};
use instgen::solve::{SolveOptions, SolveStats};
use instgen::tune::{race, ParamSpace, TuneResult, TuneTarget};

use crate::manifest::RunManifest;
use crate::{Command, Common};

/// Expansion cap used when grading inside the tuner.
const TUNE_MAX_EXPANSIONS: u64 = 20_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_domain(path: &Path) -> Result<DomainSpec> {
    parse_domain(&read(path)?, true).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path, domain: &DomainSpec) -> Result<ProblemInstance> {
    parse_problem(&read(path)?, domain).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Writes `text` to `out` (plus a manifest) or to stdout.
fn emit(text: &str, out: Option<&Path>, manifest: RunManifest) -> Result<()> {
    match out {
        Some(p) => {
            write(p, text)?;
            write(&sidecar(p, "manifest.json"), &to_json(&manifest.finish()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sidecar(p: &Path, ext: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// `name=value,...`, or a JSON file holding a config, a plain map or a
/// tuning result.
pub fn parse_params(spec: &str) -> Result<GeneratorConfig> {
    let spec = spec.trim();
    if spec.is_empty() || spec.contains('=') {
        let mut assignment = BTreeMap::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected name=value, found `{part}`")))?;
            let v: u64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("`{v}` is not a non-negative integer")))?;
            if assignment.insert(k.trim().to_string(), v).is_some() {
                return Err(CliError::Usage(format!("parameter `{k}` given twice")));
            }
        }
        return Ok(GeneratorConfig::new(assignment, 0));
    }
    if !Path::new(spec).is_file() {
        return Err(CliError::Usage(format!("`{spec}` is neither name=value pairs nor a config file")));
    }
    let text = read(Path::new(spec))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{spec}: {e}")))?;
    let value = value.get("result").cloned().unwrap_or(value);
    let value = value.get("best").cloned().unwrap_or(value);
    let value = value.get("assignment").cloned().unwrap_or(value);
    let assignment: BTreeMap<String, u64> =
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("{spec}: {e}")))?;
    Ok(GeneratorConfig::new(assignment, 0))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(fail)
}

pub fn run(cmd: Command, argv: &[String]) -> Result<()> {
    match cmd {
        Command::Parse { domain, problem, out } => cmd_parse(&domain, problem.as_deref(), out.as_deref(), argv),
        Command::Translate {
            domain,
            params,
            encoding,
            listing,
            out,
        } => cmd_translate(&domain, &params, encoding, listing, out.as_deref(), argv),
        Command::Generate {
            domain,
            params,
            encoding,
            count,
            time_limit,
            out,
            common,
        } => cmd_generate(&domain, &params, encoding, count, time_limit, &out, &common, argv),
        Command::Validate {
            domain,
            problem,
            params,
            out,
        } => cmd_validate(&domain, &problem, params.as_deref(), out.as_deref(), argv),
        Command::Grade {
            domain,
            problem,
            max_expansions,
            time_limit,
            out,
        } => cmd_grade(&domain, &problem, max_expansions, time_limit, out.as_deref(), argv),
        Command::Tune {
            domain,
            config,
            encoding,
            seed,
            jobs,
            out,
        } => cmd_tune(&domain, &config, encoding, seed, jobs, out.as_deref(), argv),
        Command::Bench {
            domain,
            sizes,
            encodings,
            params,
            reps,
            time_limit,
            count_only,
            out,
            seed,
        } => {
            let opts = BenchOpts {
                sizes: parse_sizes(&sizes)?,
                encodings: parse_encodings(&encodings)?,
                reps,
                time_limit: Duration::from_millis(time_limit),
                count_only,
            };
            cmd_bench(&domain, &params, &opts, seed, out.as_deref(), argv)
        }
    }
}

fn cmd_parse(path: &Path, problem: Option<&Path>, out: Option<&Path>, argv: &[String]) -> Result<()> {
    let d = load_domain(path)?;
    let mut summary = json!({
        "domain": d.name,
        "requirements": d.requirements,
        "types": d.types.iter().map(|t| &t.name).collect::<Vec<_>>(),
        "predicates": d.predicates.len(),
        "predicate_names": d.predicates.iter().map(|p| &p.name).collect::<Vec<_>>(),
        "functions": d.functions.len(),
        "actions": d.actions.iter().map(|a| &a.name).collect::<Vec<_>>(),
    });
    if let Some(v) = &d.validity {
        summary["validity"] = json!({
            "constraints": v.constraints.len(),
            "init": v.count_in(Scope::Init),
            "goal": v.count_in(Scope::Goal),
            "listing": v.constraints.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "templates": v.structures.iter().map(|s| s.type_arg.clone()).collect::<Vec<_>>(),
            "params": v.params,
        });
    }
    let mut inputs = vec![path];
    if let Some(p) = problem {
        let inst = load_problem(p, &d)?;
        inputs.push(p);
        summary["problem"] = json!({
            "name": inst.name,
            "objects": inst.objects.len(),
            "init": inst.init.len(),
            "goal": inst.goal.len(),
        });
    }
    let m = RunManifest::start("parse", &inputs, json!({}), 0, argv);
    emit(&to_json(&summary), out, m)
}

fn cmd_translate(
    path: &Path,
    params: &str,
    encoding: Encoding,
    show_listing: bool,
    out: Option<&Path>,
    argv: &[String],
) -> Result<()> {
    let d = load_domain(path)?;
    let config = parse_params(params)?;
    let model = compile(&d, &config, encoding).map_err(fail)?;
    let text = if show_listing {
        listing(&model)
    } else {
        to_json(&ModelSummary::of(&model))
    };
    let flags = json!({"params": config.to_string(), "encoding": encoding, "listing": show_listing});
    emit(&text, out, RunManifest::start("translate", &[path], flags, 0, argv))
}

#[derive(Serialize)]
struct Meta<'a> {
    file: String,
    name: &'a str,
    seed: u64,
    encoding: Encoding,
    config: &'a GeneratorConfig,
    stats: &'a SolveStats,
    valid: bool,
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    path: &Path,
    params: &str,
    encoding: Encoding,
    count: usize,
    time_limit: Option<u64>,
    out: &Path,
    common: &Common,
    argv: &[String],
) -> Result<()> {
    let d = load_domain(path)?;
    let config = parse_params(params)?.with_seed(common.seed);
    let gen = Generator::new(&d, &config, encoding).map_err(fail)?;
    if count == 0 {
        return Ok(());
    }
    let manifest = RunManifest::start(
        "generate",
        &[path],
        json!({
            "params": config.to_string(),
            "encoding": encoding,
            "count": count,
            "time_limit": time_limit,
            "out": out.display().to_string(),
            "jobs": common.jobs,
        }),
        common.seed,
        argv,
    );
    let opts = SolveOptions {
        time_limit: time_limit.map(Duration::from_millis),
        restart_base: None,
    };
    let results: Vec<_> = pool(common.jobs)?.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let seed = common.seed + i;
                let (inst, stats) = gen.sample(seed, &opts);
                let inst = inst.map(|inst| {
                    let report = validate_instance(&d, &inst, Some(&config)).expect("domain has constraints");
                    (inst, report)
                });
                (seed, inst, stats)
            })
            .collect()
    });
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut failures = 0;
    for (i, (seed, res, stats)) in results.iter().enumerate() {
        let stem = format!("inst_{:04}", i + 1);
        match res {
            Ok((inst, report)) => {
                let file = format!("{stem}.pddl");
                write(&out.join(&file), &emit_problem(inst))?;
                let meta = Meta {
                    file,
                    name: &inst.name,
                    seed: *seed,
                    encoding,
                    config: &config,
                    stats,
                    valid: report.is_valid(),
                };
                write(&out.join(format!("{stem}.meta.json")), &to_json(&meta))?;
                if !report.is_valid() {
                    failures += 1;
                    for v in &report.violations {
                        eprintln!("{stem} (seed {seed}): {v}");
                    }
                }
            }
            Err(e) => {
                failures += 1;
                eprintln!("{stem} (seed {seed}): {e}");
            }
        }
    }
    write(&out.join("manifest.json"), &to_json(&manifest.finish()))?;
    if failures > 0 {
        return Err(CliError::Failure(format!("{failures} of {count} instances failed")));
    }
    Ok(())
}

fn cmd_validate(path: &Path, problem: &Path, params: Option<&str>, out: Option<&Path>, argv: &[String]) -> Result<()> {
    let d = load_domain(path)?;
    if d.validity.is_none() {
        return Err(fail(instgen::model::ModelError::NoValiditySpec));
    }
    let inst = load_problem(problem, &d)?;
    let config = params.map(parse_params).transpose()?;
    let report = validate_instance(&d, &inst, config.as_ref()).map_err(fail)?;
    let body = json!({"pass": report.is_valid(), "violations": report.violations});
    let flags = json!({"params": config.map(|c| c.to_string())});
    emit(&to_json(&body), out, RunManifest::start("validate", &[path, problem], flags, 0, argv))?;
    if !report.is_valid() {
        return Err(CliError::Failure(format!("{} violations", report.violations.len())));
    }
    Ok(())
}

fn cmd_grade(
    path: &Path,
    problem: &Path,
    max_expansions: Option<u64>,
    time_limit: Option<u64>,
    out: Option<&Path>,
    argv: &[String],
) -> Result<()> {
    let d = load_domain(path)?;
    let inst = load_problem(problem, &d)?;
    let budget = Budget {
        max_expansions,
        time_limit: time_limit.map(Duration::from_millis),
    };
    let report = grade(&d, &inst, budget);
    let flags = json!({"max_expansions": max_expansions, "time_limit": time_limit});
    emit(&to_json(&report), out, RunManifest::start("grade", &[path, problem], flags, 0, argv))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TuneFile {
    params: ParamSpace,
    target: TuneTarget,
    budget: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    max_expansions: Option<u64>,
}

#[derive(Serialize)]
struct TuneOutput<'a> {
    result: &'a TuneResult,
    encoding: Encoding,
}

fn cmd_tune(
    path: &Path,
    config: &Path,
    encoding: Encoding,
    seed: Option<u64>,
    jobs: usize,
    out: Option<&Path>,
    argv: &[String],
) -> Result<()> {
    let d = load_domain(path)?;
    let spec = d.validity.as_ref().ok_or_else(|| fail(instgen::model::ModelError::NoValiditySpec))?;
    let tf: TuneFile =
        serde_json::from_str(&read(config)?).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    tf.params.check_names(&spec.params).map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = seed.unwrap_or(tf.seed);
    let budget = Budget {
        max_expansions: Some(tf.max_expansions.unwrap_or(TUNE_MAX_EXPANSIONS)),
        time_limit: None,
    };
    let opts = SolveOptions::default();
    let result = pool(jobs)?
        .install(|| race(&tf.params, &tf.target, tf.budget, seed, |c| evaluate(&d, c, encoding, &opts, budget)))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if result.all_zero {
        eprintln!("warning: every configuration scored 0 in the first round");
    }
    let flags = json!({"encoding": encoding, "jobs": jobs, "budget": tf.budget});
    let text = to_json(&TuneOutput {
        result: &result,
        encoding,
    });
    emit(&text, out, RunManifest::start("tune", &[path, config], flags, seed, argv))
}

pub struct BenchOpts {
    pub sizes: Vec<u64>,
    pub encodings: Vec<Encoding>,
    pub reps: usize,
    pub time_limit: Duration,
    pub count_only: bool,
}

pub fn parse_sizes(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Usage(format!("bad size list `{s}`"));
    let sizes: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(bad());
    }
    Ok(sizes)
}

pub fn parse_encodings(s: &str) -> Result<Vec<Encoding>> {
    match s {
        "both" => Ok(vec![Encoding::Low, Encoding::High]),
        _ => s
            .split(',')
            .map(|e| e.trim().parse().map_err(CliError::Usage))
            .collect(),
    }
}

fn cmd_bench(path: &Path, params: &str, opts: &BenchOpts, seed: u64, out: Option<&Path>, argv: &[String]) -> Result<()> {
    let d = load_domain(path)?;
    let spec = d.validity.as_ref().ok_or_else(|| fail(instgen::model::ModelError::NoValiditySpec))?;
    let mut base = parse_params(params)?.with_seed(seed);
    for p in required_params(&d, &spec.structures) {
        if spec.structures.iter().all(|s| s.aux_param != p) {
            base.assignment.entry(p).or_insert(1);
        }
    }
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for &s in &opts.sizes {
        for &enc in &opts.encodings {
            let line = if opts.count_only {
                let start = Instant::now();
                let config = with_grid_size(&d, &base, s).map_err(fail)?;
                let m = compile(&d, &config, enc).map_err(fail)?;
                let n = count_constraints(&m).structural;
                format!("{s},{enc},{n},{},NotRun", start.elapsed().as_millis())
            } else {
                bench_row(&d, &base, s, enc, Some(opts.time_limit), opts.reps).map_err(fail)?.csv()
            };
            if out.is_some() {
                eprintln!("{line}");
            }
            csv.push_str(&line);
            csv.push('\n');
        }
    }
    let flags = json!({
        "sizes": opts.sizes,
        "encodings": opts.encodings,
        "params": base.to_string(),
        "reps": opts.reps,
        "time_limit": opts.time_limit.as_millis() as u64,
        "count_only": opts.count_only,
    });
    emit(&csv, out, RunManifest::start("bench", &[path], flags, seed, argv))
}
