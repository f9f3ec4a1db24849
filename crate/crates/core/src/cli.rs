//! Configuration files and the `logkirchhoff` command line.
//!
//! Exit status: 0 on success, 1 when the configuration or an input fails
//! validation, 2 when the numerics fail or a result is not certified.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::energy::{
    energy, euler_lagrange_residual, level_identity, nehari_residuals, Problem,
};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_report, default_radius, lambda_sweep, radius_study, ConvergenceSummary,
    ConvergenceThresholds, Instance, RadiusRow, SweepRow,
};
use crate::io::{read_solution, write_field, write_solution, ProblemTag, SolutionMeta};
use crate::lattice::{DomainSpec, LatticeGraph, Truncation, Vertex};
use crate::model::{validate_potential, ModelParams, PotentialKind, PotentialReport};
use crate::nehari::{project_pair, project_scalar, DEFAULT_TOL};
use crate::solver::{
    default_seeds, limit_problem, solve_levels, Constraint, LevelPair, ReportSummary, SeedSpec,
    SolveOptions,
};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "LOGKIRCHHOFF_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub lambda: f64,
    /// Defaults to `p + 1`.
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSection {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Well given as the ℓ¹ ball of this radius.
    pub omega_ball: Option<u64>,
    /// Well given as an explicit vertex list.
    pub omega: Option<Vec<Vertex>>,
    /// Sublevel `M` reported by `validate`.
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(default = "default_shape")]
    pub shape: Truncation,
    /// Defaults to the smallest radius with the halo 8 steps from the well.
    pub radius: Option<u64>,
}

fn default_shape() -> Truncation {
    Truncation::L1Ball
}

impl Default for TruncationSection {
    fn default() -> Self {
        TruncationSection {
            shape: Truncation::L1Ball,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(flatten)]
    pub options: SolveOptions,
    #[serde(default = "default_rng_seed")]
    pub rng_seed: u64,
    /// Defaults to [`default_seeds`] of `rng_seed`.
    pub seeds: Option<Vec<SeedSpec>>,
}

fn default_rng_seed() -> u64 {
    2024
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            options: SolveOptions::default(),
            rng_seed: default_rng_seed(),
            seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    /// Radii for the truncation study (empty to skip).
    pub radii: Vec<u64>,
    pub thresholds: ConvergenceThresholds,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lambdas: vec![1.0, 10.0, 100.0, 1000.0, 10000.0],
            radii: Vec::new(),
            thresholds: ConvergenceThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("output"),
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
        }
    }
}

/// A run configuration, as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub potential: PotentialSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A configuration after validation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub params: ModelParams,
    pub domain: DomainSpec,
    pub radius: u64,
    pub seeds: Vec<SeedSpec>,
}

impl Resolved {
    pub fn instance(&self) -> Instance {
        Instance {
            params: self.params,
            potential: self.config.potential.kind,
            domain: self.domain.clone(),
            shape: self.config.truncation.shape,
            radius: self.radius,
        }
    }

    pub fn options(&self) -> &SolveOptions {
        &self.config.solver.options
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.config.output.formats.contains(&f)
    }
}

/// 1-based line of `key` inside `[section]`, if present.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = t.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

fn anchored(text: &str, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match key_line(text, section, key) {
        Some(n) => Error::Config(format!("line {n}: {msg}")),
        None => Error::Config(format!("[{section}] {msg}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Resolved> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().to_string();
            match line {
                Some(n) => Error::Config(format!("line {n}: {msg}")),
                None => Error::Config(msg),
            }
        })?;
        config.resolve(text)
    }

    pub fn load(path: &Path) -> Result<Resolved> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks every constraint before any computation.
    pub fn resolve(self, text: &str) -> Result<Resolved> {
        let m = &self.model;
        let q = m.q.unwrap_or(m.p + 1.0);
        let params = ModelParams::new(m.a, m.b, m.p, m.lambda, q).map_err(|e| {
            let key = if !(m.a > 0.0) {
                "a"
            } else if !(m.b > 0.0) {
                "b"
            } else if !(m.p > 6.0) {
                "p"
            } else if !(m.lambda > 0.0) {
                "lambda"
            } else {
                "q"
            };
            anchored(text, "model", key, e)
        })?;
        let pot = &self.potential;
        let domain = match (&pot.omega_ball, &pot.omega) {
            (Some(r), None) => DomainSpec::ball(*r),
            (None, Some(list)) => DomainSpec::new(list.iter().copied())
                .map_err(|e| anchored(text, "potential", "omega", e))?,
            _ => {
                return Err(anchored(
                    text,
                    "potential",
                    "kind",
                    "give exactly one of omega_ball or omega",
                ))
            }
        };
        match pot.kind {
            PotentialKind::StepWell { h0 } if !(h0 > 0.0 && h0.is_finite()) => {
                return Err(anchored(text, "potential", "h0", format!("h0 must be positive, got {h0}")));
            }
            PotentialKind::DistancePower { scale, exponent }
                if !(scale > 0.0 && exponent > 0.0 && scale.is_finite() && exponent.is_finite()) =>
            {
                return Err(anchored(
                    text,
                    "potential",
                    "scale",
                    "scale and exponent must be positive",
                ));
            }
            _ => {}
        }
        let min_radius = domain.omega().iter().map(Vertex::norm1).max().unwrap_or(0) + 1;
        let radius = self.truncation.radius.unwrap_or_else(|| default_radius(&domain));
        let fits = {
            let g = LatticeGraph::new(self.truncation.shape, radius);
            domain.omega().iter().all(|v| {
                g.index_of(*v).is_some_and(|i| g.is_interior(i))
            }) && domain.boundary().iter().all(|v| g.contains(*v))
        };
        if radius < min_radius || !fits {
            return Err(anchored(
                text,
                "truncation",
                "radius",
                format!("radius {radius} is too small for the well (need at least {min_radius})"),
            ));
        }
        let o = &self.solver.options;
        if !(o.gradient_tol > 0.0 && o.projection_tol > 0.0 && o.newton_tol > 0.0) {
            return Err(anchored(text, "solver", "gradient_tol", "tolerances must be positive"));
        }
        if !(o.armijo.shrink > 0.0 && o.armijo.shrink < 1.0 && o.armijo.initial_step > 0.0) {
            return Err(Error::Config("[solver.armijo] need 0 < shrink < 1 and initial_step > 0".into()));
        }
        let sw = &self.sweep;
        if sw.lambdas.iter().any(|l| !(*l > 0.0)) || sw.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(anchored(text, "sweep", "lambdas", "λ values must be positive and ascending"));
        }
        if sw.radii.windows(2).any(|w| w[1] <= w[0]) || sw.radii.first().is_some_and(|r| *r < min_radius) {
            return Err(anchored(text, "sweep", "radii", "radii must be ascending and fit the well"));
        }
        let seeds = self
            .solver
            .seeds
            .clone()
            .unwrap_or_else(|| default_seeds(self.solver.rng_seed));
        if seeds.is_empty() {
            return Err(anchored(text, "solver", "seeds", "seed list is empty"));
        }
        Ok(Resolved {
            config: self,
            params,
            domain,
            radius,
            seeds,
        })
    }
}

/// Rebuilds the problem a solution file was computed for.
pub fn problem_from_meta(meta: &SolutionMeta) -> Result<Problem> {
    let graph = std::sync::Arc::new(LatticeGraph::new(meta.shape, meta.radius));
    let domain = DomainSpec::new(meta.omega.iter().copied())?;
    match meta.problem {
        ProblemTag::WholeLattice => {
            let kind = meta.potential.ok_or_else(|| {
                Error::InvalidInput("whole-lattice solution without a potential".into())
            })?;
            Problem::whole_lattice(
                graph,
                meta.params,
                crate::model::PotentialSpec { kind, omega: domain },
            )
        }
        ProblemTag::Domain => Problem::domain(graph, meta.params, domain),
    }
}

#[derive(Parser, Debug)]
#[command(name = "logkirchhoff", version, about = "Nodal and ground states of the discrete logarithmic Kirchhoff equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the configured and environment output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    /// The sign-changing set M.
    M,
    /// The Nehari manifold N.
    N,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the configuration and the potential hypotheses.
    Validate(Common),
    /// Solve the whole-lattice problem for m and c.
    Solve(Common),
    /// Solve the Dirichlet problem on the well for m and c.
    Limit(Common),
    /// Project a stored field onto M or N.
    Project {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "m")]
        onto: Target,
        /// Output file (defaults to `<input>.projected.json`).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-verify the invariants of a stored solution.
    Check {
        #[arg(short, long)]
        input: PathBuf,
        /// Certification threshold on the residual sup norm.
        #[arg(long, default_value_t = 1e-8)]
        residual_tol: f64,
    },
    /// Sweep λ toward the limit problem and report convergence.
    Sweep(Common),
}

fn output_dir(resolved: &Resolved, flag: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| resolved.config.output.directory.clone());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

/// Runs one command; returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Validate(c) => cmd_validate(&c),
        Command::Solve(c) => cmd_solve(&c, false),
        Command::Limit(c) => cmd_solve(&c, true),
        Command::Project { input, onto, output } => cmd_project(&input, onto, output),
        Command::Check {
            input,
            residual_tol,
        } => cmd_check(&input, residual_tol),
        Command::Sweep(c) => cmd_sweep(&c),
    }
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    params: ModelParams,
    radius: u64,
    vertex_count: usize,
    omega_size: usize,
    boundary_size: usize,
    /// `|D_M|`, the sublevel set `{h < M}` inside the truncation.
    sublevel_size: usize,
    potential: &'a PotentialReport,
    ok: bool,
}

fn cmd_validate(c: &Common) -> Result<i32> {
    let r = RunConfig::load(&c.config)?;
    let g = LatticeGraph::new(r.config.truncation.shape, r.radius);
    let spec = r.instance().potential_spec();
    let report = validate_potential(&spec, &g, r.config.potential.level)?;
    let ok = report.omega_nonempty && report.omega_connected && report.omega_fits;
    let out = ValidateReport {
        params: r.params,
        radius: r.radius,
        vertex_count: g.len(),
        omega_size: report.omega_size,
        boundary_size: r.domain.boundary().len(),
        sublevel_size: report.sublevel_size,
        potential: &report,
        ok,
    };
    let dir = output_dir(&r, &c.output_dir)?;
    write_json(&dir.join("validate.json"), &out)?;
    println!("omega: {} vertices, boundary: {} vertices", out.omega_size, out.boundary_size);
    println!("D_M (M = {}): {} vertices", report.level, report.sublevel_size);
    println!("truncation: {} radius {} ({} vertices)", r.config.truncation.shape, r.radius, g.len());
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(if ok { 0 } else { 1 })
}

#[derive(Serialize)]
struct LevelsReport {
    problem: ProblemTag,
    params: ModelParams,
    radius: u64,
    m: f64,
    c: f64,
    gap: f64,
    nodal: ReportSummary,
    ground: ReportSummary,
}

fn emit_levels(r: &Resolved, dir: &Path, prefix: &str, pair: &LevelPair) -> Result<bool> {
    let tag = if pair.problem.is_domain() {
        ProblemTag::Domain
    } else {
        ProblemTag::WholeLattice
    };
    if r.wants(OutputFormat::Json) {
        write_solution(&pair.nodal, &pair.problem, &dir.join(format!("{prefix}_nodal.json")))?;
        write_solution(&pair.ground, &pair.problem, &dir.join(format!("{prefix}_ground.json")))?;
        write_json(
            &dir.join(format!("{prefix}_report.json")),
            &LevelsReport {
                problem: tag,
                params: *pair.problem.params(),
                radius: pair.problem.graph().radius(),
                m: pair.nodal.level,
                c: pair.ground.level,
                gap: pair.gap(),
                nodal: pair.nodal.summary(),
                ground: pair.ground.summary(),
            },
        )?;
    }
    if r.wants(OutputFormat::Csv) {
        std::fs::write(dir.join(format!("{prefix}_nodal_history.csv")), pair.nodal.history_csv())?;
        std::fs::write(dir.join(format!("{prefix}_ground_history.csv")), pair.ground.history_csv())?;
    }
    println!("m = {:?} (residual {:e}, seed {}, certified {})", pair.nodal.level, pair.nodal.residual_sup, pair.nodal.seed_name, pair.nodal.certified);
    println!("c = {:?} (residual {:e}, seed {}, certified {})", pair.ground.level, pair.ground.residual_sup, pair.ground.seed_name, pair.ground.certified);
    println!("m - 2c = {:?}", pair.gap());
    Ok(pair.nodal.certified && pair.ground.certified)
}

fn cmd_solve(c: &Common, limit: bool) -> Result<i32> {
    let r = RunConfig::load(&c.config)?;
    let dir = output_dir(&r, &c.output_dir)?;
    let (problem, prefix) = if limit {
        (limit_problem(r.params, r.domain.clone())?, "limit")
    } else {
        let inst = r.instance();
        (inst.problem(&inst.graph(), r.params.lambda)?, "solve")
    };
    let pair = solve_levels(problem, &r.seeds, r.options())?;
    let ok = emit_levels(&r, &dir, prefix, &pair)?;
    Ok(if ok { 0 } else { 2 })
}

fn cmd_project(input: &Path, onto: Target, output: Option<PathBuf>) -> Result<i32> {
    let sol = read_solution(input)?;
    let problem = problem_from_meta(&sol.meta)?;
    let u = &sol.field;
    problem.check_admissible(u)?;
    let (projected, constraint) = match onto {
        Target::M => {
            let pr = project_pair(u, &problem, DEFAULT_TOL)?;
            println!("s = {:?}, t = {:?}, residuals ({:e}, {:e}), bracket [{}, {}]", pr.s, pr.t, pr.residual_g1, pr.residual_g2, pr.bracket.0, pr.bracket.1);
            if !pr.converged {
                return Err(Error::NumericalFailure("pair projection did not converge".into()));
            }
            (pr.apply(u), Constraint::SignChanging)
        }
        Target::N => {
            let sp = project_scalar(u, &problem, DEFAULT_TOL)?;
            println!("s = {:?}, residual {:e}", sp.s, sp.residual);
            (u.scaled(sp.s), Constraint::Ground)
        }
    };
    let level = energy(&projected, &problem)?.total;
    println!("J = {level:?}");
    let meta = SolutionMeta {
        constraint: Some(constraint),
        level: Some(level),
        residual_sup: None,
        nehari_residuals: None,
        seed: Some(input.display().to_string()),
        certified: None,
        ..sol.meta.clone()
    };
    let out = output.unwrap_or_else(|| input.with_extension("projected.json"));
    write_field(&projected, &meta, &out)?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

/// Quantities recomputed from a stored field.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Recomputed {
    pub level: f64,
    pub residual_sup: f64,
    /// `λ Σ h u²` (zero for the problem on the well).
    pub potential_mass: f64,
    pub h_norm_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub items: Vec<CheckItem>,
    pub values: Option<Recomputed>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn violated(&self) -> Vec<&'static str> {
        self.items.iter().filter(|i| !i.passed).map(|i| i.name).collect()
    }
}

/// Invariant checks on a stored solution.
pub fn check_solution(path: &Path, residual_tol: f64) -> Result<CheckOutcome> {
    let sol = read_solution(path)?;
    let problem = problem_from_meta(&sol.meta)?;
    let u = &sol.field;
    let mut items = Vec::new();
    let mut push = |name, value: f64, limit: f64| {
        items.push(CheckItem {
            name,
            value,
            limit,
            passed: value < limit,
        })
    };
    if let Err(Error::ConstraintViolation { count, .. }) = problem.check_admissible(u) {
        push("support", count as f64, 1.0);
        return Ok(CheckOutcome { items, values: None });
    }
    let r = euler_lagrange_residual(u, &problem)?;
    let rs = r.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    push("euler-lagrange-residual", rs, residual_tol);
    let j = energy(u, &problem)?.total;
    let sc = problem.sign_scalars(u)?;
    if let Some(level) = sol.meta.level {
        push("stored-level", (j - level).abs() / (1.0 + level.abs()), 1e-12);
    }
    match sol.meta.constraint {
        Some(Constraint::SignChanging) | None if u.has_positive_part() && u.has_negative_part() => {
            let nr = nehari_residuals(u, &problem)?;
            let scaled = (nr.plus.abs() / (1.0 + sc.norm_plus)).max(nr.minus.abs() / (1.0 + sc.norm_minus));
            push("nehari-residuals", scaled, 1e-10);
        }
        Some(Constraint::SignChanging) => push("sign-changing", 1.0, 0.0),
        _ => {
            let h = sc.radial_residual(1.0);
            push("nehari-residual", h.abs() / (1.0 + sc.norm_sq()), 1e-10);
        }
    }
    let li = level_identity(u, &problem)?;
    push("level-identity", (li - j).abs() / (1.0 + j.abs()), 1e-8);
    let values = Recomputed {
        level: j,
        residual_sup: rs,
        potential_mass: problem.potential_mass(u)?,
        h_norm_sq: problem.h_norm_sq(u)?,
    };
    Ok(CheckOutcome {
        items,
        values: Some(values),
    })
}

fn cmd_check(input: &Path, residual_tol: f64) -> Result<i32> {
    let outcome = check_solution(input, residual_tol)?;
    for it in &outcome.items {
        let tag = if it.passed { "ok" } else { "VIOLATED" };
        println!("{tag:9} {:24} {:e} (limit {:e})", it.name, it.value, it.limit);
    }
    if let Some(v) = &outcome.values {
        println!("level {:?}", v.level);
        println!("residual_sup {:?}", v.residual_sup);
        println!("pot_mass {:?}", v.potential_mass);
        println!("h_norm_sq {:?}", v.h_norm_sq);
    }
    Ok(if outcome.passed() { 0 } else { 2 })
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    params: ModelParams,
    radius: u64,
    seeds: &'a [SeedSpec],
    rows: &'a [SweepRow],
    limit_row: &'a crate::experiments::LimitRow,
    convergence: Option<ConvergenceSummary>,
    convergence_error: Option<String>,
    radius_study: Option<Vec<RadiusRow>>,
}

fn cmd_sweep(c: &Common) -> Result<i32> {
    let r = RunConfig::load(&c.config)?;
    let dir = output_dir(&r, &c.output_dir)?;
    let inst = r.instance();
    let sweep = lambda_sweep(&inst, &r.config.sweep.lambdas, &r.seeds, r.options())?;
    let conv = convergence_report(&sweep, &r.config.sweep.thresholds);
    let study = if r.config.sweep.radii.is_empty() {
        None
    } else {
        Some(radius_study(&inst, r.params.lambda, &r.config.sweep.radii, &r.seeds, r.options())?)
    };
    if r.wants(OutputFormat::Csv) {
        std::fs::write(dir.join("sweep.csv"), sweep.csv())?;
        if let Some(rows) = &study {
            let t: Vec<Vec<f64>> = rows
                .iter()
                .map(|x| vec![x.radius as f64, x.m_lambda, x.c_lambda, x.m_change, x.c_change])
                .collect();
            std::fs::write(
                dir.join("radius.csv"),
                crate::io::csv_table(&["radius", "m_lambda", "c_lambda", "m_change", "c_change"], &t),
            )?;
        }
    }
    if r.wants(OutputFormat::Json) {
        let g = inst.graph();
        for (k, row) in sweep.rows.iter().enumerate() {
            let pb = inst.problem(&g, row.lambda)?;
            write_solution(&sweep.nodal[k], &pb, &dir.join(format!("sweep_{k}_nodal.json")))?;
            write_solution(&sweep.ground[k], &pb, &dir.join(format!("sweep_{k}_ground.json")))?;
        }
        write_solution(&sweep.limit.nodal, &sweep.limit.problem, &dir.join("sweep_limit_nodal.json"))?;
        write_solution(&sweep.limit.ground, &sweep.limit.problem, &dir.join("sweep_limit_ground.json"))?;
        write_json(
            &dir.join("sweep_report.json"),
            &SweepOutput {
                params: r.params,
                radius: r.radius,
                seeds: &r.seeds,
                rows: &sweep.rows,
                limit_row: &sweep.limit_row,
                convergence: conv.as_ref().ok().cloned(),
                convergence_error: conv.as_ref().err().map(|e| e.to_string()),
                radius_study: study.clone(),
            },
        )?;
    }
    println!("m_Omega = {:?}, c_Omega = {:?}", sweep.limit_row.m_omega, sweep.limit_row.c_omega);
    print!("{}", sweep.csv());
    match &conv {
        Ok(s) => println!(
            "last |m - m_Omega|/m_Omega = {:e}, h1 = {:e}, potential mass = {:e}",
            s.last_level_rel, s.last_h1, s.last_pot_mass
        ),
        Err(e) => println!("convergence report: {e}"),
    }
    let certified = sweep.limit_row.certified && sweep.rows.iter().all(|x| x.certified);
    Ok(if certified { 0 } else { 2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
a = 1.0
b = 1.0
p = 7.0
lambda = 10.0

[potential]
kind = "step-well"
h0 = 1.0
omega_ball = 1

[truncation]
radius = 5
"#;

    #[test]
    fn parses_and_defaults() {
        let r = RunConfig::parse(BASE).unwrap();
        assert_eq!(r.params.q, 8.0);
        assert_eq!(r.radius, 5);
        assert_eq!(r.seeds.len(), 8);
        assert_eq!(r.config.solver.options, SolveOptions::default());
    }

    #[test]
    fn bad_exponent_is_line_anchored() {
        let text = BASE.replace("p = 7.0", "p = 5.0");
        match RunConfig::parse(&text) {
            Err(Error::Config(m)) => assert!(m.starts_with("line 5:"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_is_line_anchored() {
        let text = BASE.replace("h0 = 1.0", "h0 = = 1.0");
        match RunConfig::parse(&text) {
            Err(Error::Config(m)) => assert!(m.starts_with("line 10:"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn radius_too_small() {
        let text = BASE.replace("radius = 5", "radius = 1");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn explicit_seeds_and_omega() {
        let text = BASE.replace("omega_ball = 1", "omega = [[0, 0, 0], [1, 0, 0]]")
            + r#"
[solver]
rng_seed = 5
gradient_tol = 1e-8

[[solver.seeds]]
name = "d"
kind = "dipole"
axis = 0
separation = 1

[[solver.seeds]]
name = "b"
kind = "bump-pair"
plus = [0, 0, 0]
minus = [1, 0, 0]
width = 0.8
amplitude = 2.0
"#;
        let r = RunConfig::parse(&text).unwrap();
        assert_eq!(r.domain.len(), 2);
        assert_eq!(r.seeds.len(), 2);
        assert_eq!(r.seeds[1].amplitude, 2.0);
        assert_eq!(r.config.solver.options.gradient_tol, 1e-8);
    }

    #[test]
    fn disconnected_well_rejected() {
        let text = BASE.replace("omega_ball = 1", "omega = [[0, 0, 0], [2, 0, 0]]");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }
}
