//! The five subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coral_core::data::{derive_seed, sample_initial, sample_model_data, sample_offline, DatasetSummary, InitialSummary};
use coral_core::instances::Instance;
use coral_core::model::{j_value, plan_optimal};
use coral_core::objectives::FenchelPair;
use coral_core::solvers::{solve_empirical_gda, BoxSpec, SolveInputs};

use crate::config::{check_algorithm, check_exists, ExperimentSpec, RunConfig, SolverMode};
use crate::error::{CliError, CliResult};
use crate::experiments::{
    emit_report, empirical_kind, run_figure1, run_prop1, run_prop2_feasible, run_prop3, run_rate,
    solve_finite_parallel, ExperimentReport, ReportFiles, SweepOptions,
};
use crate::io::{self, ClassFile, EvalRecord, InstanceFile, ModelFile, MuFile, SolutionFile};
use crate::selftest;

/// Stream indices for the three dataset kinds drawn by `gen`.
const OFFLINE_STREAM: u64 = 0;
const INITIAL_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub instance: PathBuf,
    pub offline: PathBuf,
    pub initial: PathBuf,
    pub model: PathBuf,
}

/// Builds the instance and writes it with `D`, `D0` and `Dm`.
pub fn cmd_gen(cfg: &RunConfig) -> CliResult<GenManifest> {
    let inst = cfg.resolve_instance()?;
    let sizes = cfg.sizes()?;
    let out = cfg.out_dir();
    let core = |field: &str| {
        let field = field.to_string();
        move |e| CliError::from_core(field, e)
    };
    let d = sample_offline(&inst.model, &inst.mu, sizes.n, derive_seed(cfg.seed, OFFLINE_STREAM, 0))
        .map_err(core("sizes.n"))?;
    let d0 = sample_initial(
        &inst.model,
        sizes.n0.unwrap_or(sizes.n),
        derive_seed(cfg.seed, INITIAL_STREAM, 0),
    )
    .map_err(core("sizes.n0"))?;
    let dm = sample_model_data(
        &inst.model,
        &inst.mu,
        sizes.nm.unwrap_or(sizes.n),
        derive_seed(cfg.seed, MODEL_STREAM, 0),
    )
    .map_err(core("sizes.nm"))?;
    let manifest = GenManifest {
        master_seed: cfg.seed,
        config: cfg.echo(),
        instance: out.join("instance.json"),
        offline: out.join("offline.jsonl"),
        initial: out.join("initial.jsonl"),
        model: out.join("model.jsonl"),
    };
    io::write_json(&manifest.instance, &instance_file(&inst))?;
    io::save_offline(&d, &manifest.offline)?;
    io::save_initial(&d0, &manifest.initial)?;
    io::save_model_data(&dm, &manifest.model)?;
    io::write_json(&out.join("gen.json"), &manifest)?;
    Ok(manifest)
}

pub fn instance_file(inst: &Instance) -> InstanceFile {
    InstanceFile {
        name: inst.name.clone(),
        model: ModelFile::from_model(&inst.model),
        mu: MuFile::from_mu(&inst.mu),
        classes: ClassFile::from_classes(&inst.classes),
    }
}

fn data_error(field: &str) -> impl Fn(coral_core::Error) -> CliError + '_ {
    move |e| CliError::data(field, e)
}

/// Loaded dataset summaries for a solve.
struct LoadedData {
    data: DatasetSummary,
    initial: Option<InitialSummary>,
    model_data: Option<DatasetSummary>,
}

fn load_data(cfg: &RunConfig, inst: &Instance) -> CliResult<LoadedData> {
    let paths = cfg.data.as_ref().ok_or_else(|| CliError::config("data", "missing dataset paths"))?;
    let (ns, na) = (inst.model.n_states(), inst.model.n_actions());
    check_exists("data.offline", &paths.offline)?;
    let data = io::load_offline(&paths.offline)?
        .summarize(ns, na)
        .map_err(data_error("data.offline"))?;
    let initial = match &paths.initial {
        Some(p) => {
            check_exists("data.initial", p)?;
            Some(io::load_initial(p)?.summarize(ns).map_err(data_error("data.initial"))?)
        }
        None => None,
    };
    let model_data = match &paths.model {
        Some(p) => {
            check_exists("data.model", p)?;
            Some(io::load_model_data(p)?.summarize(ns, na).map_err(data_error("data.model"))?)
        }
        None => None,
    };
    Ok(LoadedData {
        data,
        initial,
        model_data,
    })
}

/// Solves the configured objective on the configured data.
pub fn cmd_solve(cfg: &RunConfig) -> CliResult<(PathBuf, SolutionFile)> {
    let inst = cfg.resolve_instance()?;
    let alg = cfg.algorithm()?;
    cfg.check_compatibility(&inst)?;
    let loaded = load_data(cfg, &inst)?;
    if alg.id.is_coral() && loaded.initial.is_none() {
        return Err(CliError::config("data.initial", format!("{} needs initial-state data", alg.id.as_str())));
    }
    if alg.id == crate::experiments::Algorithm::CoralMb && loaded.model_data.is_none() {
        return Err(CliError::config("data.model", "coral_mb needs model data"));
    }
    let n = loaded.data.n as usize;
    let kind = empirical_kind(alg.id, &alg.params(), &inst, n.max(1)).map_err(|e| CliError::from_core("algorithm", e))?;
    let gamma = inst.model.discount();
    let inputs = SolveInputs {
        kind,
        data: &loaded.data,
        initial: loaded.initial.as_ref(),
        model_data: loaded.model_data.as_ref(),
        mu: &inst.mu,
        gamma,
        fen: FenchelPair::for_discount(gamma),
    };
    let sol = match cfg.solver.mode {
        SolverMode::Finite => solve_finite_parallel(inputs, &inst),
        SolverMode::Gda => {
            let c = &inst.classes;
            let boxes = BoxSpec {
                w: c.w.bounds(),
                v: c.v.bounds(),
                u: c.u.as_ref().map(|k| k.bounds()),
                z: c.z.as_ref().map(|k| k.bounds()),
            };
            solve_empirical_gda(inputs, boxes, c.p.as_ref(), &cfg.gda(), None)
        }
    }
    .map_err(|e| match e {
        coral_core::Error::EmptyDataset => CliError::data("data.offline", e),
        e => CliError::from_core("solver", e),
    })?;
    let file = SolutionFile::from_solution(alg.id.as_str(), &sol, cfg.seed, cfg.echo());
    let path = cfg.out_dir().join("solution.json");
    io::write_json(&path, &file)?;
    Ok((path, file))
}

/// Scores a saved solution against the exact optimum.
pub fn cmd_eval(cfg: &RunConfig) -> CliResult<(PathBuf, EvalRecord)> {
    let inst = cfg.resolve_instance()?;
    let sol_path = cfg
        .solution
        .as_ref()
        .ok_or_else(|| CliError::config("solution", "missing solution path"))?;
    check_exists("solution", sol_path)?;
    let sol: SolutionFile = io::read_json(sol_path)?;
    if sol.n_states != inst.model.n_states() || sol.n_actions != inst.model.n_actions() {
        return Err(CliError::data("solution", "policy shape does not match the instance"));
    }
    let policy = sol.policy().map_err(|e| CliError::data("solution.policy", e))?;
    let plan = plan_optimal(&inst.model).map_err(|e| CliError::from_core("instance", e))?;
    let j_star = j_value(&inst.model, &plan.optimal_policy).map_err(|e| CliError::from_core("instance", e))?;
    let j_policy = j_value(&inst.model, &policy).map_err(|e| CliError::from_core("solution.policy", e))?;
    let rec = EvalRecord {
        subopt: j_star - j_policy,
        j_star,
        j_policy,
        master_seed: cfg.seed,
        config: cfg.echo(),
    };
    let path = cfg.out_dir().join("eval.json");
    io::write_json(&path, &rec)?;
    Ok((path, rec))
}

fn check_grid(field: &str, grid: &[usize], trials: usize) -> CliResult<()> {
    if grid.is_empty() {
        return Err(CliError::config(format!("{field}.n_grid"), "must not be empty"));
    }
    if let Some(i) = grid.iter().position(|&n| n == 0) {
        return Err(CliError::config(format!("{field}.n_grid[{i}]"), "sample sizes must be at least 1"));
    }
    if trials == 0 {
        return Err(CliError::config(format!("{field}.trials"), "must be at least 1"));
    }
    Ok(())
}

/// Runs the configured experiment, writes its report, and fails with an
/// acceptance error when any of its checks fails.
pub fn cmd_exp(cfg: &RunConfig) -> CliResult<(ReportFiles, ExperimentReport)> {
    let spec = cfg
        .experiment
        .as_ref()
        .ok_or_else(|| CliError::config("experiment", "missing experiment"))?;
    let opts = SweepOptions {
        master_seed: cfg.seed,
        timing: cfg.timing,
    };
    let solver = |e| CliError::from_core("experiment", e);
    let mut report = match spec {
        ExperimentSpec::Figure1 { gamma, alpha } => run_figure1(*gamma, *alpha, opts).map_err(solver)?,
        ExperimentSpec::Prop1 { n, trials, alm_n } => {
            check_grid("experiment", &[*n], *trials)?;
            run_prop1(*n, *trials, *alm_n, opts).map_err(solver)?
        }
        ExperimentSpec::Prop2Feasible {
            instance,
            n_grid,
            trials,
        } => {
            check_grid("experiment", n_grid, *trials)?;
            run_prop2_feasible(instance, n_grid, *trials, opts).map_err(solver)?
        }
        ExperimentSpec::Prop3 {
            regime,
            alpha,
            n_grid,
            trials,
        } => {
            check_grid("experiment", n_grid, *trials)?;
            run_prop3(*regime, *alpha, n_grid, *trials, opts).map_err(solver)?
        }
        ExperimentSpec::Rate {
            algorithm,
            instance,
            n_grid,
            trials,
        } => {
            check_grid("experiment", n_grid, *trials)?;
            let probe = instance
                .build(n_grid[0])
                .map_err(|e| CliError::from_core("experiment.instance", e))?;
            check_algorithm(algorithm, "experiment.algorithm", &probe)?;
            run_rate(algorithm.id, &algorithm.params(), instance, n_grid, *trials, opts).map_err(solver)?
        }
    };
    report.config = serde_json::json!({"run": cfg.echo(), "experiment": report.config});
    let files = emit_report(&report, &cfg.out_dir())?;
    if let Some(c) = report.checks.iter().find(|c| !c.passed) {
        return Err(CliError::acceptance(format!("experiment.{}", c.name), &c.detail));
    }
    Ok((files, report))
}

/// Runs the invariant suites and prints one line per check.
pub fn cmd_selftest(out: &mut dyn std::io::Write) -> CliResult<Vec<crate::experiments::Check>> {
    let checks = selftest::run_all();
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {}: {}", c.name, c.detail).map_err(|e| CliError::data("stdout", e))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len())
        .map_err(|e| CliError::data("stdout", e))?;
    if failed > 0 {
        let first = checks.iter().find(|c| !c.passed).expect("counted");
        return Err(CliError::acceptance(format!("selftest.{}", first.name), &first.detail));
    }
    Ok(checks)
}

/// Applies command-line overrides to a loaded config.
pub fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, out: Option<&Path>) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = Some(o.to_path_buf());
    }
}
