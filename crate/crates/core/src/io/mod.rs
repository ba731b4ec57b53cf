//! Configuration files, command dispatch and report files.

mod config;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::diagnostics::{
    apriori_bounds, minimality_check, penalized_skorohod_residual, random_supersolutions,
    sample_test_pairs, sandwich_check, skorohod_residual, SupSampler, ALGEBRAIC_TOL, ROOT_TOL,
};
use crate::engine::{NodeProblem, Reflection};
use crate::expr::ExprError;
use crate::mc::{simulate_paths, solve_bsde_mc, solve_penalized_mc};
use crate::model::{validate_problem, CheckStatus, ProblemSpec, SolutionQuadruple};
use crate::runner::{double_limit_study, monotone_limit_check, run_schedule, CellKey};

pub use config::{
    build_problem, canonical_hash, load_config, parse_config, Format, McConfig, OutputConfig,
    PenaltyConfig, RunConfig, RunPlan, SolverKind,
};
pub use report::{
    schedule_table, skorohod_table, Cell, FileEntry, ReportWriter, RunManifest, Table,
    SCHEDULE_COLUMNS, SKOROHOD_COLUMNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_DIAGNOSTIC: i32 = 4;

/// Thetas of the canonical Skorohod test family.
pub const THETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Randomized supersolution candidates per `diagnose` run.
pub const MINIMALITY_CANDIDATES: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("config syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("in `{field}`: {source}")]
    Expr {
        field: &'static str,
        source: ExprError,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io { .. } => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot write {}: {message}", path.display())]
pub struct IoError {
    pub path: PathBuf,
    pub message: String,
}

impl IoError {
    fn new(path: &Path, e: std::io::Error) -> Self {
        Self {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Oracle,
    Schedule,
    Diagnose,
    Mc,
    Validate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Oracle,
        Command::Schedule,
        Command::Diagnose,
        Command::Mc,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Oracle => "oracle",
            Command::Schedule => "schedule",
            Command::Diagnose => "diagnose",
            Command::Mc => "mc",
            Command::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// Result of a dispatched command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

/// Loads the config, applies overrides, runs the command and prints a
/// summary unless quiet. Returns the process exit code.
pub fn run(command: Command, config: &Path, options: &RunOptions) -> i32 {
    let (spec, mut plan) = match load_config(config) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(out) = &options.out {
        plan.config.output.dir = out.clone();
    }
    if let Some(seed) = options.seed {
        plan.config.mc.seed = seed;
    }
    let outcome = dispatch(command, &spec, &plan);
    if !options.quiet {
        for m in &outcome.messages {
            println!("{m}");
        }
        for f in &outcome.files {
            println!("wrote {}", f.display());
        }
    }
    if outcome.code != EXIT_OK {
        if let Some(last) = outcome.messages.last() {
            eprintln!("error: {last}");
        }
    }
    outcome.code
}

/// Runs one command on a loaded problem.
pub fn dispatch(command: Command, spec: &ProblemSpec, plan: &RunPlan) -> Outcome {
    let started = chrono::Utc::now();
    let mut messages = Vec::new();
    let result = execute(command, spec, plan, &mut messages).and_then(|(code, writer)| {
        let files = match writer {
            Some(w) => w
                .finish(command.name(), &plan.config_hash, started)
                .map_err(|e| Failure::new(EXIT_USAGE, e))?,
            None => Vec::new(),
        };
        Ok((code, files))
    });
    match result {
        Ok((code, files)) => Outcome {
            code,
            files,
            messages,
        },
        Err(f) => {
            messages.push(f.message);
            Outcome {
                code: f.code,
                files: Vec::new(),
                messages,
            }
        }
    }
}

fn sampler(plan: &RunPlan) -> SupSampler {
    SupSampler {
        seed: plan.config.mc.seed,
        ..SupSampler::default()
    }
}

fn top_cell(plan: &RunPlan) -> CellKey {
    *plan
        .schedule
        .cells()
        .last()
        .expect("schedules are nonempty")
}

fn solver_err(e: impl fmt::Display) -> Failure {
    Failure::new(EXIT_SOLVER, e)
}

fn write_err(e: IoError) -> Failure {
    Failure::new(EXIT_USAGE, e)
}

fn summary_row(
    table: &mut Table,
    run: &str,
    key: Option<CellKey>,
    q: &SolutionQuadruple,
    spec: &ProblemSpec,
    plan: &RunPlan,
    oracle_y0: Option<f64>,
) {
    let b = apriori_bounds(&spec.lattice(), q, sampler(plan));
    table.push(vec![
        Cell::Text(run.into()),
        key.and_then(|k| k.p).into(),
        key.map(|k| k.m).into(),
        key.map(|k| k.n).into(),
        q.y0().into(),
        (*q.mean_a.last().unwrap_or(&0.0)).into(),
        (*q.mean_k.last().unwrap_or(&0.0)).into(),
        b.e_sup_y2.into(),
        b.e_int_z2.into(),
        b.e_a_t2.into(),
        b.e_k_t2.into(),
        oracle_y0.map(|o| (q.y0() - o).abs()).into(),
        q.identity_residual().into(),
    ]);
}

const SUMMARY_COLUMNS: [&str; 13] = [
    "run",
    "p",
    "m",
    "n",
    "y0",
    "e_AT",
    "e_KT",
    "e_supY2",
    "e_intZ2",
    "e_AT2",
    "e_KT2",
    "gap_vs_oracle",
    "identity_residual",
];

fn cell_problem(spec: &ProblemSpec, key: CellKey) -> Result<NodeProblem, Failure> {
    let driver =
        crate::runner::driver_for(spec, key.p).map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
    Ok(NodeProblem::from_spec(spec).with_driver(Arc::new(driver)))
}

fn execute(
    command: Command,
    spec: &ProblemSpec,
    plan: &RunPlan,
    messages: &mut Vec<String>,
) -> Result<(i32, Option<ReportWriter>), Failure> {
    let report = validate_problem(spec).map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
    for c in &report.checks {
        messages.push(format!(
            "{:<24} {:?}: {}",
            c.assumption.to_string(),
            c.status,
            c.detail
        ));
    }
    if report.checks.iter().any(|c| c.status == CheckStatus::Fail) {
        return Err(Failure::new(EXIT_VALIDATION, "problem failed validation"));
    }
    if command == Command::Validate {
        return Ok((EXIT_OK, None));
    }
    let out = &plan.config.output;
    let mut writer = ReportWriter::create(&out.dir, &out.formats).map_err(write_err)?;
    let base = NodeProblem::from_spec(spec);
    let oracle = base.solve(Reflection::CLAMP).map_err(solver_err)?;
    let mut code = EXIT_OK;

    match command {
        Command::Validate => unreachable!(),
        Command::Oracle => {
            let mut t = Table::new("summary", &SUMMARY_COLUMNS);
            summary_row(&mut t, "oracle", None, &oracle, spec, plan, None);
            writer.table(&t).map_err(write_err)?;
            messages.push(format!("oracle Y0 = {}", oracle.y0()));
        }
        Command::Solve if plan.config.solver == SolverKind::Lattice => {
            let key = top_cell(plan);
            let q = cell_problem(spec, key)?
                .solve(Reflection::penalized(key.m, key.n))
                .map_err(solver_err)?;
            let mut t = Table::new("summary", &SUMMARY_COLUMNS);
            summary_row(&mut t, "oracle", None, &oracle, spec, plan, None);
            summary_row(
                &mut t,
                "penalized",
                Some(key),
                &q,
                spec,
                plan,
                Some(oracle.y0()),
            );
            writer.table(&t).map_err(write_err)?;
            messages.push(format!(
                "penalized Y0 = {} at m = {}, n = {} (oracle {})",
                q.y0(),
                key.m,
                key.n,
                oracle.y0()
            ));
        }
        Command::Solve | Command::Mc => {
            let mc = &plan.config.mc;
            let bundle =
                simulate_paths(spec.grid, mc.paths, mc.seed, mc.increments).map_err(solver_err)?;
            let key = top_cell(plan);
            let problem = cell_problem(spec, key)?;
            let unbounded =
                spec.barriers.lower.is_unbounded() && spec.barriers.upper.is_unbounded();
            let driver = crate::runner::driver_for(spec, key.p)
                .map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
            let (sol, lattice_q) = if unbounded {
                let s = solve_bsde_mc(&bundle, &driver, &spec.terminal, plan.basis)
                    .map_err(solver_err)?;
                (s, problem.solve(Reflection::NONE).map_err(solver_err)?)
            } else {
                let pd = crate::engine::PenalizedDriver::new(
                    driver,
                    key.m,
                    key.n,
                    spec.barriers.clone(),
                );
                let s = solve_penalized_mc(&bundle, &pd, &spec.terminal, plan.basis)
                    .map_err(solver_err)?;
                (
                    s,
                    problem
                        .solve(Reflection::penalized(key.m, key.n))
                        .map_err(solver_err)?,
                )
            };
            let mut t = Table::new(
                "mc",
                &[
                    "paths",
                    "seed",
                    "p",
                    "m",
                    "n",
                    "y0",
                    "stderr",
                    "lattice_y0",
                    "e_AT",
                    "e_KT",
                    "e_AT2",
                    "e_KT2",
                    "e_supY2",
                    "e_intZ2",
                ],
            );
            t.push(vec![
                mc.paths.into(),
                Cell::Text(mc.seed.to_string()),
                key.p.into(),
                (!unbounded).then_some(key.m).into(),
                (!unbounded).then_some(key.n).into(),
                sol.y0.mean.into(),
                sol.y0.stderr.into(),
                lattice_q.y0().into(),
                sol.a_terminal.mean.into(),
                sol.k_terminal.mean.into(),
                sol.a_terminal_sq.mean.into(),
                sol.k_terminal_sq.mean.into(),
                sol.sup_y_sq.mean.into(),
                sol.int_z_sq.mean.into(),
            ]);
            writer.table(&t).map_err(write_err)?;
            messages.push(format!(
                "Monte Carlo Y0 = {} +- {} (lattice {})",
                sol.y0.mean,
                sol.y0.stderr,
                lattice_q.y0()
            ));
        }
        Command::Schedule => {
            let mut report =
                run_schedule(spec, &plan.schedule, sampler(plan)).map_err(solver_err)?;
            let double = double_limit_study(spec, &plan.schedule).map_err(solver_err)?;
            let mut t = Table::new(
                "double_limit",
                &[
                    "m",
                    "n_max",
                    "y0_at_n_max",
                    "extrapolated",
                    "hybrid_y0",
                    "gap_at_n_max",
                    "extrapolated_gap",
                    "within_bound",
                ],
            );
            for r in &double.intermediates {
                t.push(vec![
                    r.m.into(),
                    r.n_max.into(),
                    r.y0_at_n_max.into(),
                    r.extrapolated.into(),
                    r.hybrid_y0.into(),
                    r.gap_at_n_max.into(),
                    r.extrapolated_gap.into(),
                    r.within_bound.into(),
                ]);
            }
            report.double_limit = Some(double);
            writer
                .table(&schedule_table(&report.records))
                .map_err(write_err)?;
            writer.table(&t).map_err(write_err)?;
            writer.json("convergence", &report).map_err(write_err)?;
            messages.push(format!(
                "{} cells, oracle Y0 = {}, monotonicity violations m/n = {}/{}",
                report.records.len(),
                report.oracle_y0,
                report.mono_viol_m,
                report.mono_viol_n
            ));
        }
        Command::Diagnose => {
            let mut failures = Vec::new();
            let identity = oracle.identity_residual();
            if identity > ROOT_TOL {
                failures.push(format!("oracle identity residual {identity:e}"));
            }
            let pairs = sample_test_pairs(&oracle, &base.lower, &base.upper, &THETAS)
                .map_err(|e| Failure::new(EXIT_DIAGNOSTIC, e))?;
            let mut rows = Vec::new();
            for pair in &pairs {
                let (ra, rk) = skorohod_residual(&oracle, pair)
                    .map_err(|e| Failure::new(EXIT_DIAGNOSTIC, e))?;
                if ra > ALGEBRAIC_TOL || rk > ALGEBRAIC_TOL {
                    failures.push(format!("oracle Skorohod residual ({ra:e}, {rk:e})"));
                }
                rows.push((pair.theta.unwrap_or(f64::NAN), ra, rk));
            }
            writer.table(&skorohod_table(&rows)).map_err(write_err)?;

            let mut pen = Table::new(
                "penalized_skorohod",
                &[
                    "p",
                    "m",
                    "n",
                    "r_A",
                    "r_K",
                    "y_minus0",
                    "y0",
                    "y_plus0",
                    "sandwich_ok",
                ],
            );
            for key in plan.schedule.cells() {
                let problem = cell_problem(spec, key)?;
                let q = problem
                    .solve(Reflection::penalized(key.m, key.n))
                    .map_err(solver_err)?;
                let (ra, rk) = penalized_skorohod_residual(&q, &base.lower, &base.upper, 0.0)
                    .map_err(|e| Failure::new(EXIT_DIAGNOSTIC, e))?;
                let s = sandwich_check(&problem, &oracle, key.m, key.n).map_err(solver_err)?;
                if !s.passed() {
                    failures.push(format!("sandwich violated at m = {}, n = {}", key.m, key.n));
                }
                pen.push(vec![
                    key.p.into(),
                    key.m.into(),
                    key.n.into(),
                    ra.into(),
                    rk.into(),
                    s.y_minus0.into(),
                    s.y0.into(),
                    s.y_plus0.into(),
                    s.passed().into(),
                ]);
            }
            writer.table(&pen).map_err(write_err)?;

            let candidates =
                random_supersolutions(&base, MINIMALITY_CANDIDATES, plan.config.mc.seed, 0.05)
                    .map_err(solver_err)?;
            let minimality = minimality_check(&base, &oracle, &candidates)
                .map_err(|e| Failure::new(EXIT_DIAGNOSTIC, e))?;
            if !minimality.passed() {
                failures.push(format!(
                    "{} candidates below the oracle",
                    minimality.violations
                ));
            }
            writer.json("minimality", &minimality).map_err(write_err)?;

            let runs = plan
                .schedule
                .m
                .iter()
                .map(|&m| {
                    let p = if plan.schedule.tie_p_to_m {
                        Some(m)
                    } else {
                        top_cell(plan).p
                    };
                    cell_problem(
                        spec,
                        CellKey {
                            p,
                            m,
                            n: f64::INFINITY,
                        },
                    )?
                    .solve(Reflection::upper_clamped(m))
                    .map_err(solver_err)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let conditions = monotone_limit_check(&runs, sampler(plan)).map_err(solver_err)?;
            if !conditions.passed() {
                failures.push("monotone limit conditions failed".into());
            }
            writer.json("conditions", &conditions).map_err(write_err)?;

            messages.push(format!(
                "oracle Skorohod residuals max = {:e}; minimality {}/{} candidates ok",
                rows.iter().map(|r| r.1.max(r.2)).fold(0.0, f64::max),
                minimality.candidates - minimality.violations,
                minimality.candidates
            ));
            if !failures.is_empty() {
                code = EXIT_DIAGNOSTIC;
                messages.push(failures.join("; "));
            }
        }
    }
    Ok((code, Some(writer)))
}
