//! Batch command line: build the desk instance, project, solve, validate,
//! benchmark against scenario approximation, and replay a recorded run.
//!
//! Every command writes `manifest.json` next to its outputs. Wall-clock
//! measurements go to `runtime.csv` only, so all other outputs of two runs
//! with the same manifest are byte-identical.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::conic::{dump, SolverSettings};
use crate::error::{Error, Result};
use crate::galerkin::{basis_for, ProjectionSettings, RecoursePolicy, TailBound};
use crate::mcvalidate::{
    equality_residuals, estimate_cost, estimate_violations, write_cost, write_violations,
    DEFAULT_EPSILON, DEFAULT_MC_SAMPLES,
};
use crate::pce::{solve_pce, PceSolution};
use crate::sa_benchmark::{
    accuracy_rows, compare, run_repetitions, write_comparison, write_csv, Decisions, SaRun,
};
use crate::sprog::{load_model, save_model, StochModel, VarId};
use crate::vpp::{build_instance, VppConfig};

/// Outputs that legitimately differ between otherwise identical runs.
pub const NONDETERMINISTIC_OUTPUTS: [&str; 2] = ["manifest.json", "runtime.csv"];

pub const MANIFEST_FILE: &str = "manifest.json";

const SOLVER_NAME: &str = "clarabel 0.11";

#[derive(Debug, Parser)]
#[command(name = "chaosproj", version, about = "Polynomial chaos projection of two-stage stochastic LPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Write the desk VPP instance (bundled or from a config) as a model file.
    BuildVpp(BuildVppArgs),
    /// Project a model and write the conic problem dump and a dimension report.
    Project(ProjectArgs),
    /// Project and solve a model; write first-stage values and the coefficient table.
    Solve(SolveArgs),
    /// Monte-Carlo validation of a solved policy.
    Validate(ValidateArgs),
    /// Scenario-approximation runs and their comparison with the projected solution.
    Benchmark(BenchmarkArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProjectionOpts {
    /// Total polynomial degree of the basis (0 implies --truncate).
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Safety factor for chance constraints without their own ε.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Global violation probability; sets λ unless --lambda is given.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Use the distribution-free Cantelli bound for λ.
    #[arg(long)]
    pub cantelli: bool,
    /// Drop modes above the basis degree instead of failing.
    #[arg(long)]
    pub truncate: bool,
}

impl ProjectionOpts {
    pub fn settings(&self) -> Result<ProjectionSettings> {
        let epsilon = self.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("--epsilon must lie in (0, 1), got {epsilon}")));
        }
        let bound = if self.cantelli {
            TailBound::Cantelli
        } else {
            TailBound::Gaussian
        };
        let lambda = match (self.lambda, self.epsilon.is_some() || self.cantelli) {
            (Some(l), _) => l,
            (None, true) => bound.lambda(epsilon),
            (None, false) => ProjectionSettings::default().lambda,
        };
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonPositiveSafetyFactor(lambda));
        }
        Ok(ProjectionSettings {
            lambda,
            epsilon,
            bound,
            truncate: self.truncate || self.degree == 0,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BuildVppArgs {
    /// Instance configuration (TOML); the bundled desk instance if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scale applied to every germ's deviation from its mean.
    #[arg(long)]
    pub uncertainty_scale: Option<f64>,
    /// Output directory; the model is written to `model.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub projection: ProjectionOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub projection: ProjectionOpts,
    /// Also write the conic problem dump.
    #[arg(long)]
    pub dump: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    pub model: PathBuf,
    /// Output directory of a `solve` run.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Violation target for constraints without their own ε; defaults to
    /// the solve's global ε.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub projection: ProjectionOpts,
    /// Scenario counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 100, 200, 500, 1000])]
    pub scenarios: Vec<usize>,
    /// Reference scenario count (defaults to the largest of --scenarios).
    #[arg(long)]
    pub reference: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub repetitions: usize,
    /// Seed of the first repetition; repetition r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorRecord {
    pub fn from_error(e: &Error) -> Self {
        ErrorRecord {
            kind: e.kind().to_string(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub solver: String,
    pub command: Command,
    pub model: Option<PathBuf>,
    pub degree: Option<usize>,
    pub projection: Option<ProjectionSettings>,
    pub solver_settings: SolverSettings,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
    pub error: Option<ErrorRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(p, e))
}

impl Command {
    fn absolutize(&mut self) -> Result<()> {
        match self {
            Command::BuildVpp(a) => {
                if let Some(c) = &a.config {
                    a.config = Some(absolute(c)?);
                }
                a.out = absolute(&a.out)?;
            }
            Command::Project(a) => {
                a.model = absolute(&a.model)?;
                a.out = absolute(&a.out)?;
            }
            Command::Solve(a) => {
                a.model = absolute(&a.model)?;
                a.out = absolute(&a.out)?;
            }
            Command::Validate(a) => {
                a.model = absolute(&a.model)?;
                a.solution = absolute(&a.solution)?;
                a.out = absolute(&a.out)?;
            }
            Command::Benchmark(a) => {
                a.model = absolute(&a.model)?;
                a.out = absolute(&a.out)?;
            }
            Command::Replay(a) => {
                a.manifest = absolute(&a.manifest)?;
                if let Some(o) = &a.out {
                    a.out = Some(absolute(o)?);
                }
            }
        }
        Ok(())
    }

    fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::BuildVpp(a) => Some(&a.out),
            Command::Project(a) => Some(&a.out),
            Command::Solve(a) => Some(&a.out),
            Command::Validate(a) => Some(&a.out),
            Command::Benchmark(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::BuildVpp(a) => a.out = dir,
            Command::Project(a) => a.out = dir,
            Command::Solve(a) => a.out = dir,
            Command::Validate(a) => a.out = dir,
            Command::Benchmark(a) => a.out = dir,
            Command::Replay(a) => a.out = Some(dir),
        }
    }

    fn model_path(&self) -> Option<&Path> {
        match self {
            Command::Project(a) => Some(&a.model),
            Command::Solve(a) => Some(&a.model),
            Command::Validate(a) => Some(&a.model),
            Command::Benchmark(a) => Some(&a.model),
            _ => None,
        }
    }

    fn projection(&self) -> Option<&ProjectionOpts> {
        match self {
            Command::Project(a) => Some(&a.projection),
            Command::Solve(a) => Some(&a.projection),
            Command::Benchmark(a) => Some(&a.projection),
            _ => None,
        }
    }

    fn seeds(&self) -> Vec<u64> {
        match self {
            Command::Validate(a) => vec![a.seed],
            Command::Benchmark(a) => (0..a.repetitions as u64).map(|r| a.seed + r).collect(),
            _ => Vec::new(),
        }
    }
}

/// Output directory that remembers the files written into it.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn record(&mut self, path: &Path) {
        if let Some(name) = path.file_name() {
            self.files.push(name.to_string_lossy().into_owned());
        }
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }
}

fn load_finalized(path: &Path) -> Result<StochModel> {
    let mut m = load_model(path)?;
    m.finalize()?;
    Ok(m)
}

#[derive(Serialize)]
struct RuntimeRow<'a> {
    method: &'a str,
    n_s: usize,
    seed: u64,
    wall_seconds: f64,
    solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionInfo {
    pub status: String,
    pub objective: f64,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub reduced_accuracy: bool,
    pub degree: usize,
    pub basis_len: usize,
    pub projection: ProjectionSettings,
    pub germs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientRow {
    variable: String,
    mode: usize,
    multi_index: String,
    value: f64,
}

#[derive(Serialize)]
struct ValueRow<'a> {
    variable: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct ColumnRow<'a> {
    column: usize,
    label: &'a str,
}

fn write_solution(out: &mut Outputs, model: &StochModel, s: &PceSolution, degree: usize, projection: &ProjectionSettings) -> Result<()> {
    let labels: Vec<String> = (0..model.n_vars()).map(|v| model.var_label(VarId(v))).collect();
    let first: Vec<ValueRow> = model
        .first_stage_vars()
        .zip(&s.first_stage)
        .map(|(v, &value)| ValueRow {
            variable: &labels[v.0],
            value,
        })
        .collect();
    write_csv(&out.path("first_stage.csv"), &first)?;
    let index = s.basis.index_set();
    let mut rows = Vec::new();
    for (v, coefs) in s.policy.coefficients.iter().enumerate() {
        for (a, &value) in coefs.iter().enumerate() {
            rows.push(CoefficientRow {
                variable: labels[v].clone(),
                mode: a,
                multi_index: index[a].to_string(),
                value,
            });
        }
    }
    write_csv(&out.path("coefficients.csv"), &rows)?;
    out.json(
        "solution.json",
        &SolutionInfo {
            status: "optimal".into(),
            objective: s.objective,
            iterations: s.result.iterations,
            primal_residual: s.result.primal_residual,
            dual_residual: s.result.dual_residual,
            reduced_accuracy: s.result.reduced_accuracy,
            degree,
            basis_len: s.basis.len(),
            projection: *projection,
            germs: model.germs().iter().map(|g| g.name.clone()).collect(),
        },
    )
}

/// Reads a policy written by `solve` for `model`.
pub fn load_policy(model: &StochModel, dir: &Path) -> Result<(SolutionInfo, RecoursePolicy)> {
    let info_path = dir.join("solution.json");
    let text = std::fs::read_to_string(&info_path).map_err(|e| Error::io(&info_path, e))?;
    let info: SolutionInfo =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", info_path.display())))?;
    let names: Vec<String> = model.germs().iter().map(|g| g.name.clone()).collect();
    if names != info.germs {
        return Err(Error::GermMismatch(format!(
            "solution was computed for germs {:?}, model declares {:?}",
            info.germs, names
        )));
    }
    let basis = std::sync::Arc::new(basis_for(model, info.degree)?);
    let k = basis.len();
    let by_label: HashMap<String, usize> = (0..model.n_vars())
        .map(|v| (model.var_label(VarId(v)), v))
        .collect();
    let mut coefficients: Vec<Vec<f64>> = (0..model.n_vars())
        .map(|v| match model.stage(VarId(v)) {
            crate::sprog::Stage::First => vec![f64::NAN],
            crate::sprog::Stage::Second => vec![f64::NAN; k],
        })
        .collect();
    let path = dir.join("coefficients.csv");
    let mut reader = csv::Reader::from_path(&path)?;
    for row in reader.deserialize() {
        let row: CoefficientRow = row?;
        let v = *by_label
            .get(&row.variable)
            .ok_or_else(|| Error::Config(format!("{}: unknown variable `{}`", path.display(), row.variable)))?;
        let slot = coefficients[v].get_mut(row.mode).ok_or_else(|| {
            Error::Config(format!("{}: mode {} out of range for `{}`", path.display(), row.mode, row.variable))
        })?;
        *slot = row.value;
    }
    if let Some(v) = coefficients.iter().position(|c| c.iter().any(|x| x.is_nan())) {
        return Err(Error::Config(format!(
            "{}: missing coefficients for `{}`",
            path.display(),
            model.var_label(VarId(v))
        )));
    }
    Ok((info, RecoursePolicy { basis, coefficients }))
}

fn cmd_build_vpp(a: &BuildVppArgs, out: &mut Outputs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => VppConfig::load(p)?,
        None => VppConfig::default(),
    };
    if let Some(s) = a.uncertainty_scale {
        cfg = cfg.with_uncertainty_scale(s);
        cfg.validate()?;
    }
    let model = build_instance(&cfg)?;
    save_model(&model, &out.path("model.txt"))?;
    let s = model.summary();
    println!(
        "model: {} first-stage, {} recourse variables, {} germs, {} equalities, {} inequalities",
        s.n_first, s.n_second, s.n_germs, s.n_eq, s.n_ineq
    );
    Ok(())
}

fn cmd_project(a: &ProjectArgs, out: &mut Outputs) -> Result<()> {
    let model = load_finalized(&a.model)?;
    let settings = a.projection.settings()?;
    let basis = basis_for(&model, a.projection.degree)?;
    let program = crate::galerkin::project_model(&model, &basis, &settings)?;
    let problem = crate::conic::assemble(&program);
    dump(&problem, &out.path("projected.conic"))?;
    let labels = program.layout.labels(&model, &basis);
    let rows: Vec<ColumnRow> = labels
        .iter()
        .enumerate()
        .map(|(column, label)| ColumnRow { column, label })
        .collect();
    write_csv(&out.path("columns.csv"), &rows)?;
    out.json("projection.json", &program.report)?;
    let r = program.report;
    println!(
        "|A| = {} (N^omega = {}, N^d = {}); {} columns, {} equalities, {} cones, {} linear inequalities, {} truncated terms",
        r.basis_len, r.n_germs, r.degree, r.n_columns, r.n_equalities, r.n_soc, r.n_linear_inequalities, r.truncated_terms
    );
    Ok(())
}

fn write_runtime(out: &mut Outputs, rows: &[RuntimeRow]) -> Result<()> {
    write_csv(&out.path("runtime.csv"), rows)
}

fn cmd_solve(a: &SolveArgs, out: &mut Outputs, solver: &SolverSettings) -> Result<()> {
    let model = load_finalized(&a.model)?;
    let settings = a.projection.settings()?;
    let s = solve_pce(&model, a.projection.degree, &settings, solver)?;
    if a.dump {
        dump(&s.problem, &out.path("projected.conic"))?;
    }
    write_solution(out, &model, &s, a.projection.degree, &settings)?;
    write_runtime(
        out,
        &[RuntimeRow {
            method: "pce",
            n_s: 0,
            seed: 0,
            wall_seconds: s.wall_seconds,
            solve_seconds: s.result.solve_seconds,
        }],
    )?;
    println!(
        "optimal expected cost {} (|A| = {}, {} iterations)",
        s.objective,
        s.basis.len(),
        s.result.iterations
    );
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, out: &mut Outputs) -> Result<()> {
    let model = load_finalized(&a.model)?;
    let (info, policy) = load_policy(&model, &a.solution)?;
    let epsilon = a.epsilon.unwrap_or(info.projection.epsilon);
    let violations = estimate_violations(&policy, &model, a.mc_samples, a.seed, epsilon)?;
    let p = write_violations(&violations, &out.dir)?;
    out.record(&p);
    let cost = estimate_cost(&policy, &model, a.mc_samples, a.seed)?;
    let p = write_cost(&cost, &out.dir)?;
    out.record(&p);
    let residuals = equality_residuals(&policy, &model, a.mc_samples, a.seed)?;
    let name = format!("residuals_n{}_seed{}.csv", a.mc_samples, a.seed);
    write_csv(&out.path(&name), &residuals.equalities)?;
    let summary = format!(
        "{}\nexpected cost {} ± {} (95% CI {} to {}), projected {}\nmax equality residual {:e}\n",
        violations.summary_line(),
        cost.mean,
        cost.standard_error,
        cost.ci_low,
        cost.ci_high,
        info.objective,
        residuals.max_abs_residual
    );
    out.write("summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Serialize)]
struct SaRunRow {
    n_s: usize,
    seed: u64,
    objective: f64,
}

#[derive(Serialize)]
struct SaDecisionRow {
    n_s: usize,
    seed: u64,
    decision: String,
    step: usize,
    value: f64,
}

fn cmd_benchmark(a: &BenchmarkArgs, out: &mut Outputs, solver: &SolverSettings) -> Result<()> {
    if a.scenarios.is_empty() || a.scenarios.contains(&0) || a.repetitions == 0 {
        return Err(Error::Config("--scenarios must be positive and --repetitions at least 1".into()));
    }
    let model = load_finalized(&a.model)?;
    let settings = a.projection.settings()?;
    let pce = solve_pce(&model, a.projection.degree, &settings, solver)?;
    let pce_dec = pce.decisions(&model);
    let mut grid = a.scenarios.clone();
    grid.sort_unstable();
    grid.dedup();
    let reference_n = a.reference.unwrap_or(*grid.last().expect("non-empty grid"));
    if !grid.contains(&reference_n) {
        grid.push(reference_n);
    }
    let mut runtime = vec![RuntimeRow {
        method: "pce",
        n_s: 0,
        seed: 0,
        wall_seconds: pce.wall_seconds,
        solve_seconds: pce.result.solve_seconds,
    }];
    let mut all: Vec<(usize, Vec<SaRun>)> = Vec::new();
    for &n_s in &grid {
        let runs = run_repetitions(&model, n_s, a.repetitions, a.seed, solver)?;
        let mean = runs.iter().map(|r| r.objective).sum::<f64>() / runs.len() as f64;
        println!("n_s = {n_s}: mean SA objective {mean} over {} runs", runs.len());
        all.push((n_s, runs));
    }
    let decisions = |runs: &[SaRun]| -> Vec<Decisions> { runs.iter().map(|r| r.decisions(&model)).collect() };
    let reference = decisions(&all.iter().find(|(n, _)| *n == reference_n).expect("reference runs").1);

    let mut run_rows = Vec::new();
    let mut dec_rows = Vec::new();
    let mut accuracy = accuracy_rows("pce", 0, std::slice::from_ref(&pce_dec), &reference)?;
    for (n_s, runs) in &all {
        let decs = decisions(runs);
        for (r, d) in runs.iter().zip(&decs) {
            run_rows.push(SaRunRow {
                n_s: *n_s,
                seed: r.seed,
                objective: r.objective,
            });
            runtime.push(RuntimeRow {
                method: "sa",
                n_s: *n_s,
                seed: r.seed,
                wall_seconds: r.wall_seconds,
                solve_seconds: r.solve_seconds,
            });
            for t in &d.trajectories {
                for (step, &value) in t.values.iter().enumerate() {
                    dec_rows.push(SaDecisionRow {
                        n_s: *n_s,
                        seed: r.seed,
                        decision: t.name.clone(),
                        step,
                        value,
                    });
                }
            }
        }
        let report = compare(&pce_dec, &decs)?;
        let (rows, summary) = write_comparison(&report, &out.dir, *n_s, a.seed)?;
        out.record(&rows);
        out.record(&summary);
        accuracy.extend(accuracy_rows("sa", *n_s, &decs, &reference)?);
    }
    write_csv(&out.path("sa_runs.csv"), &run_rows)?;
    write_csv(&out.path("sa_first_stage.csv"), &dec_rows)?;
    write_csv(&out.path("accuracy.csv"), &accuracy)?;
    write_runtime(out, &runtime)?;
    let report = compare(&pce_dec, &reference)?;
    println!(
        "PCE objective {} vs reference {} (n_s = {reference_n}): gap {:.3}%, envelope coverage {:.1}%",
        report.pce_objective,
        report.reference_objective,
        100.0 * report.gap_rel,
        100.0 * report.coverage
    );
    Ok(())
}

fn execute(command: &Command, out: &mut Outputs, solver: &SolverSettings) -> Result<()> {
    match command {
        Command::BuildVpp(a) => cmd_build_vpp(a, out),
        Command::Project(a) => cmd_project(a, out),
        Command::Solve(a) => cmd_solve(a, out, solver),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Benchmark(a) => cmd_benchmark(a, out, solver),
        Command::Replay(_) => Err(Error::Config("a manifest cannot record a replay".into())),
    }
}

/// Runs one command and writes its manifest; returns the manifest.
pub fn run(mut command: Command) -> Result<RunManifest> {
    command.absolutize()?;
    if let Command::Replay(r) = &command {
        let mut recorded = RunManifest::load(&r.manifest)?.command;
        if let Some(dir) = &r.out {
            recorded.set_out_dir(dir.clone());
        }
        return run(recorded);
    }
    let started = unix_now();
    let solver = SolverSettings::default();
    let dir = command.out_dir().expect("non-replay commands have an output dir").to_path_buf();
    let mut out = Outputs::create(&dir)?;
    let result = execute(&command, &mut out, &solver);
    let projection = command.projection().map(|p| p.settings()).transpose().ok().flatten();
    let manifest = RunManifest {
        tool: format!("chaosproj {}", env!("CARGO_PKG_VERSION")),
        solver: SOLVER_NAME.into(),
        model: command.model_path().map(Path::to_path_buf),
        degree: command.projection().map(|p| p.degree),
        projection,
        solver_settings: solver,
        seeds: command.seeds(),
        output_dir: dir,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: out.files.clone(),
        error: result.as_ref().err().map(ErrorRecord::from_error),
        command,
    };
    out.json(MANIFEST_FILE, &manifest)?;
    result.map(|_| manifest)
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(_) => 0,
        Err(e) => {
            let record = ErrorRecord::from_error(&e);
            eprintln!(
                "{}",
                serde_json::to_string(&record).unwrap_or_else(|_| record.message.clone())
            );
            record.exit_code
        }
    }
}
