//! Minimization of the energy over `M` (nodal level `m`) and `N` (ground
//! level `c`), followed by Newton refinement of the Euler–Lagrange system.
//!
//! Descent runs on the reduced functional `Φ(w) = J(P(w))` where `P` is the
//! pair (resp. radial) projection. On the constraint set the free gradient is
//! the Euler–Lagrange residual, which is already orthogonal to `w^±`; its
//! tangential part is used both as search direction input and as stopping
//! measure. Energies of trial points come from the closed-form expansion in
//! the sign-part scalars, so each backtracking step costs one pass over the
//! graph.
//!
//! Seeds are solved independently (in parallel when enabled) and merged by
//! position in the seed list, so results do not depend on scheduling.

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{gradient_pairing, laplacian_into, split_signs, Field};
use crate::energy::{energy, nehari_residuals, Problem, SignScalars};
use crate::error::{Error, Result};
use crate::lattice::{build_box, graph_distance, DomainSpec, Vertex};
use crate::model::{log_force_derivative, ModelParams};
use crate::nehari::{project_pair_scalars, project_scalar_scalars};

/// Which constraint set the minimization runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// `M`: both sign parts on their Nehari constraints.
    SignChanging,
    /// `N`: the Nehari manifold.
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentMethod {
    #[default]
    Lbfgs,
    Steepest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Armijo {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub method: DescentMethod,
    pub lbfgs_memory: usize,
    pub armijo: Armijo,
    /// Stop descent once `‖grad_tan‖₂ < gradient_tol·(1 + |J|)`.
    pub gradient_tol: f64,
    pub max_iterations: usize,
    pub projection_tol: f64,
    /// Newton target for `‖r‖_∞`.
    pub newton_tol: f64,
    pub newton_max_iterations: usize,
    /// Certification thresholds for `‖r‖_∞` and the scaled Nehari residuals.
    pub certify_residual: f64,
    pub certify_nehari: f64,
    /// Levels closer than this (relative) count as tied.
    pub tie_tol: f64,
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: DescentMethod::Lbfgs,
            lbfgs_memory: 10,
            armijo: Armijo::default(),
            gradient_tol: 1e-9,
            max_iterations: 100_000,
            projection_tol: 1e-10,
            newton_tol: 1e-10,
            newton_max_iterations: 50,
            certify_residual: 1e-8,
            certify_nehari: 1e-10,
            tie_tol: 1e-10,
            parallel: true,
        }
    }
}

/// How a seed field is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeedKind {
    /// `+1` at `−⌊d/2⌋e_axis`, `−1` at `d − ⌊d/2⌋` along the same axis.
    Dipole { axis: usize, separation: u64 },
    /// `e^{−d(x,plus)²/w²} − e^{−d(x,minus)²/w²}` with graph distance `d`.
    BumpPair { plus: Vertex, minus: Vertex, width: f64 },
    /// A bump pair with centres drawn from the well and width in `[0.6, 1.6)`
    /// by a ChaCha8 generator seeded with `rng_seed`.
    RandomBumpPair { rng_seed: u64 },
    /// Values read from a stored solution file.
    File { path: PathBuf },
    /// An explicit field, e.g. a warm start.
    #[serde(skip)]
    Field(Field),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: SeedKind,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

impl SeedSpec {
    pub fn new(name: impl Into<String>, kind: SeedKind) -> Self {
        SeedSpec {
            name: name.into(),
            kind,
            amplitude: 1.0,
        }
    }

    pub fn field(name: impl Into<String>, field: Field) -> Self {
        SeedSpec::new(name, SeedKind::Field(field))
    }
}

/// Four axis-aligned dipoles at separations 1..=4 and four random bump pairs
/// with generator seeds `rng_seed..rng_seed+4`.
pub fn default_seeds(rng_seed: u64) -> Vec<SeedSpec> {
    let mut seeds: Vec<SeedSpec> = (0..4)
        .map(|k| {
            SeedSpec::new(
                format!("dipole-{}", k + 1),
                SeedKind::Dipole {
                    axis: k % 3,
                    separation: k as u64 + 1,
                },
            )
        })
        .collect();
    seeds.extend((0..4).map(|k| {
        SeedSpec::new(
            format!("random-{k}"),
            SeedKind::RandomBumpPair {
                rng_seed: rng_seed.wrapping_add(k),
            },
        )
    }));
    seeds
}

fn bump(d: u64, width: f64) -> f64 {
    let d = d as f64;
    (-(d * d) / (width * width)).exp()
}

/// Materialize a seed on the problem's graph, restricted to admissible
/// vertices. Ground seeds keep only the positive part (or `|u|` if that
/// vanishes).
pub fn seed_field(seed: &SeedSpec, problem: &Problem, constraint: Constraint) -> Result<Field> {
    let g = problem.graph();
    let raw = match &seed.kind {
        SeedKind::Dipole { axis, separation } => {
            if *axis > 2 || *separation == 0 {
                return Err(Error::InvalidParameter(format!(
                    "dipole needs axis < 3 and separation > 0, got {axis}, {separation}"
                )));
            }
            let e = Vertex::unit(*axis);
            let plus = e.scaled(-((separation / 2) as i64));
            let minus = plus.offset(e.scaled(*separation as i64).coords());
            let mut u = Field::zeros(g);
            for (v, val) in [(plus, 1.0), (minus, -1.0)] {
                if let Some(i) = g.index_of(v) {
                    u[i] = val;
                }
            }
            u
        }
        SeedKind::BumpPair { plus, minus, width } => {
            if !(*width > 0.0) {
                return Err(Error::InvalidParameter(format!("bump width must be positive, got {width}")));
            }
            Field::from_fn(g, |x| {
                bump(graph_distance(x, *plus), *width) - bump(graph_distance(x, *minus), *width)
            })
        }
        SeedKind::RandomBumpPair { rng_seed } => {
            let well: Vec<Vertex> = problem.well().omega().iter().copied().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            let (plus, minus) = if well.len() == 1 {
                (well[0], well[0].offset([1, 0, 0]))
            } else {
                let i = rng.gen_range(0..well.len());
                let mut j = rng.gen_range(0..well.len() - 1);
                if j >= i {
                    j += 1;
                }
                (well[i], well[j])
            };
            let width: f64 = rng.gen_range(0.6..1.6);
            Field::from_fn(g, |x| {
                bump(graph_distance(x, plus), width) - bump(graph_distance(x, minus), width)
            })
        }
        SeedKind::File { path } => crate::io::read_solution(path)?.field.transfer_to(g)?,
        SeedKind::Field(f) => f.transfer_to(g)?,
    };
    let mut u = problem.restrict(&raw).scaled(seed.amplitude);
    if constraint == Constraint::Ground {
        let (up, um) = split_signs(&u);
        u = if up.has_positive_part() { up } else { um.scaled(-1.0) };
    }
    match constraint {
        Constraint::SignChanging if !(u.has_positive_part() && u.has_negative_part()) => {
            Err(Error::InvalidInput(format!(
                "seed '{}' is not sign-changing on the admissible set",
                seed.name
            )))
        }
        Constraint::Ground if !u.has_positive_part() => Err(Error::InvalidInput(format!(
            "seed '{}' vanishes on the admissible set",
            seed.name
        ))),
        _ => Ok(u),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub energy: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    IterationLimit,
    /// No step along the steepest direction passed the Armijo test.
    LineSearchExhausted,
    /// Accepted steps stopped lowering `J` in floating point.
    EnergyFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub seed_id: usize,
    pub seed_name: String,
    pub level: Option<f64>,
    pub certified: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub constraint: Constraint,
    pub minimizer: Field,
    /// `J(minimizer)`.
    pub level: f64,
    /// `‖r‖_∞`.
    pub residual_sup: f64,
    /// `((J'(u),u⁺), (J'(u),u⁻))`; for ground solves the second entry is 0
    /// and the first is `(J'(u),u)`.
    pub nehari_residuals: (f64, f64),
    /// Nehari residuals divided by `1 + ‖u^±‖²`.
    pub nehari_scaled: f64,
    /// `(‖u⁺‖₂, ‖u⁻‖₂)`.
    pub sign_norms: (f64, f64),
    pub seed_id: usize,
    pub seed_name: String,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub stop: StopReason,
    pub history: Vec<HistoryEntry>,
    pub certified: bool,
    /// Why certification failed, if it did.
    pub note: Option<String>,
    pub candidates: Vec<CandidateSummary>,
}

/// Serializable part of a [`SolveReport`] (everything but the field and the
/// iteration history).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub constraint: Constraint,
    pub level: f64,
    pub residual_sup: f64,
    pub nehari_residuals: (f64, f64),
    pub nehari_scaled: f64,
    pub sign_norms: (f64, f64),
    pub seed_id: usize,
    pub seed_name: String,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub stop: StopReason,
    pub certified: bool,
    pub note: Option<String>,
    pub candidates: Vec<CandidateSummary>,
}

impl SolveReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            constraint: self.constraint,
            level: self.level,
            residual_sup: self.residual_sup,
            nehari_residuals: self.nehari_residuals,
            nehari_scaled: self.nehari_scaled,
            sign_norms: self.sign_norms,
            seed_id: self.seed_id,
            seed_name: self.seed_name.clone(),
            iterations: self.iterations,
            newton_iterations: self.newton_iterations,
            stop: self.stop,
            certified: self.certified,
            note: self.note.clone(),
            candidates: self.candidates.clone(),
        }
    }

    /// `iteration,energy,gradient` rows of the descent history.
    pub fn history_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .history
            .iter()
            .map(|h| vec![h.iteration as f64, h.energy, h.gradient])
            .collect();
        crate::io::csv_table(&["iteration", "energy", "gradient"], &rows)
    }
}

// ---- vector helpers ---------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn recombine_raw(w: &[f64], s: f64, t: f64) -> Vec<f64> {
    w.iter().map(|&x| if x > 0.0 { s * x } else { t * x }).collect()
}

// ---- projection onto the constraint -----------------------------------

struct Projected {
    scalars: SignScalars,
    s: f64,
    t: f64,
    energy: f64,
}

fn project(problem: &Problem, constraint: Constraint, w: &[f64], tol: f64) -> Option<Projected> {
    let sc = problem.sign_scalars_raw(w);
    match constraint {
        Constraint::SignChanging => {
            if !sc.both_signs() {
                return None;
            }
            let pr = project_pair_scalars(&sc, tol).ok().filter(|p| p.converged)?;
            Some(Projected {
                scalars: sc,
                s: pr.s,
                t: pr.t,
                energy: sc.energy(pr.s, pr.t),
            })
        }
        Constraint::Ground => {
            let sp = project_scalar_scalars(&sc, tol).ok()?;
            Some(Projected {
                scalars: sc,
                s: sp.s,
                t: sp.s,
                energy: sc.radial_energy(sp.s),
            })
        }
    }
    .filter(|p| p.energy.is_finite())
}

/// Residual with its components along the constraint normals removed.
fn tangential(constraint: Constraint, w: &[f64], r: &[f64]) -> Vec<f64> {
    let mut g = r.to_vec();
    match constraint {
        Constraint::SignChanging => {
            let (mut rp, mut rm, mut pp, mut mm) = (0.0, 0.0, 0.0, 0.0);
            for (x, y) in w.iter().zip(r) {
                if *x > 0.0 {
                    rp += x * y;
                    pp += x * x;
                } else {
                    rm += x * y;
                    mm += x * x;
                }
            }
            let (cp, cm) = (rp / pp, rm / mm);
            for (gi, x) in g.iter_mut().zip(w) {
                *gi -= if *x > 0.0 { cp * x } else { cm * x };
            }
        }
        Constraint::Ground => {
            let c = dot(w, r) / dot(w, w);
            for (gi, x) in g.iter_mut().zip(w) {
                *gi -= c * x;
            }
        }
    }
    g
}

const STALL_STEPS: usize = 10;
const STALL_GRADIENT: f64 = 1e-4;

struct DescentOutcome {
    w: Vec<f64>,
    energy: f64,
    gradient: f64,
    iterations: usize,
    history: Vec<HistoryEntry>,
    stop: StopReason,
}

fn lbfgs_direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|x| *x *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

fn descend(
    problem: &Problem,
    constraint: Constraint,
    w0: &[f64],
    opts: &SolveOptions,
) -> Result<DescentOutcome> {
    let n = w0.len();
    let tol = opts.projection_tol;
    let p0 = project(problem, constraint, w0, tol)
        .ok_or_else(|| Error::NumericalFailure("seed could not be projected".into()))?;
    let mut w = recombine_raw(w0, p0.s, p0.t);
    let mut e = p0.energy;
    let (mut lap, mut r) = (vec![0.0; n], vec![0.0; n]);
    problem.residual_into(&w, &mut lap, &mut r);
    let mut g = tangential(constraint, &w, &r);
    let mut gnorm = norm(&g);
    let mut history = vec![HistoryEntry {
        iteration: 0,
        energy: e,
        gradient: gnorm,
    }];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stalled = 0;
    let mut stop = StopReason::IterationLimit;
    let mut iterations = 0;
    let armijo = opts.armijo;

    while iterations < opts.max_iterations {
        if gnorm < opts.gradient_tol * (1.0 + e.abs()) {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut d = match opts.method {
            DescentMethod::Lbfgs if !mem.is_empty() => lbfgs_direction(&g, &mem),
            _ => g.iter().map(|x| -x).collect(),
        };
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = g.iter().map(|x| -x).collect();
            slope = -gnorm * gnorm;
        }
        let mut alpha = armijo.initial_step;
        let mut accepted = None;
        for _ in 0..armijo.max_backtracks {
            let trial: Vec<f64> = w.iter().zip(&d).map(|(x, y)| x + alpha * y).collect();
            if let Some(p) = project(problem, constraint, &trial, tol) {
                if p.energy <= e + armijo.sufficient_decrease * alpha * slope {
                    accepted = Some((trial, p));
                    break;
                }
            }
            alpha *= armijo.shrink;
        }
        let Some((trial, p)) = accepted else {
            if mem.is_empty() {
                stop = StopReason::LineSearchExhausted;
                break;
            }
            mem.clear();
            continue;
        };
        iterations += 1;
        let w_new = recombine_raw(&trial, p.s, p.t);
        debug_assert!(p.scalars.pow_plus >= 0.0);
        problem.residual_into(&w_new, &mut lap, &mut r);
        let g_new = tangential(constraint, &w_new, &r);
        if p.energy >= e {
            stalled += 1;
            if stalled >= STALL_STEPS {
                // Decreases below the rounding level of J: hand over to Newton
                // if the gradient is already small, otherwise give up.
                if gnorm < STALL_GRADIENT * (1.0 + e.abs()) {
                    stop = StopReason::EnergyFloor;
                    break;
                }
                return Err(Error::Stagnation(format!(
                    "energy failed to decrease for {STALL_STEPS} consecutive steps at iteration {iterations} (J = {e}, |grad| = {gnorm:e})"
                )));
            }
        } else {
            stalled = 0;
        }
        if opts.method == DescentMethod::Lbfgs {
            let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if mem.len() == opts.lbfgs_memory.max(1) {
                    mem.pop_front();
                }
                mem.push_back((s, y, 1.0 / sy));
            }
        }
        w = w_new;
        g = g_new;
        e = p.energy;
        gnorm = norm(&g);
        history.push(HistoryEntry {
            iteration: iterations,
            energy: e,
            gradient: gnorm,
        });
    }
    Ok(DescentOutcome {
        w,
        energy: e,
        gradient: gnorm,
        iterations,
        history,
        stop,
    })
}

// ---- Newton refinement ------------------------------------------------

/// Second variation of the energy at `u`, restricted to admissible fields.
struct Hessian<'a> {
    problem: &'a Problem,
    u: &'a [f64],
    coef: f64,
    lap_u: Vec<f64>,
    diag_rest: Vec<f64>,
}

impl<'a> Hessian<'a> {
    fn new(problem: &'a Problem, u: &'a [f64]) -> Self {
        let n = u.len();
        let e = problem.gradient_energy_raw(u);
        let mut lap_u = vec![0.0; n];
        laplacian_into(problem.graph(), u, &mut lap_u);
        let p = problem.params().p;
        let mut diag_rest = vec![0.0; n];
        for &i in problem.free_indices() {
            diag_rest[i] = problem.weight()[i] - log_force_derivative(u[i], p);
        }
        Hessian {
            problem,
            u,
            coef: problem.params().a + problem.params().b * e,
            lap_u,
            diag_rest,
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let pb = self.problem;
        laplacian_into(pb.graph(), v, scratch);
        let gam = gradient_pairing(pb.graph(), self.u, v, pb.grad_region(), pb.summation());
        let b = pb.params().b;
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in pb.free_indices() {
            out[i] = -self.coef * scratch[i] - 2.0 * b * gam * self.lap_u[i] + self.diag_rest[i] * v[i];
        }
    }

    /// `|H_xx|`, floored, inverted; zero off the free set.
    fn inverse_abs_diagonal(&self) -> Vec<f64> {
        let pb = self.problem;
        let b = pb.params().b;
        let g = pb.graph();
        let mut d = vec![0.0; self.u.len()];
        let mut dmax: f64 = 0.0;
        for &i in pb.free_indices() {
            let h = self.coef * g.neighbors(i).len() as f64
                + 2.0 * b * self.lap_u[i] * self.lap_u[i]
                + self.diag_rest[i];
            d[i] = h.abs();
            dmax = dmax.max(d[i]);
        }
        for &i in pb.free_indices() {
            d[i] = 1.0 / d[i].max(1e-8 * dmax);
        }
        d
    }
}

/// `J''(u)[v]`: `−(a+bE)Δv − 2b(Σ∇u∇v)Δu + h_λv − (|u|^{p−2}u log u²)'·v`.
pub fn hessian_vector(u: &Field, v: &Field, problem: &Problem) -> Result<Field> {
    problem.check_admissible(u)?;
    problem.check_admissible(v)?;
    let h = Hessian::new(problem, u.values());
    let n = u.len();
    let (mut out, mut scratch) = (vec![0.0; n], vec![0.0; n]);
    h.apply(v.values(), &mut out, &mut scratch);
    Field::from_values(problem.graph(), out)
}

/// Preconditioned MINRES for the symmetric, possibly indefinite system
/// `H x = b`; `minv` is the inverse of an SPD diagonal preconditioner.
fn minres(h: &Hessian, b: &[f64], minv: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y: Vec<f64> = r1.iter().zip(minv).map(|(a, m)| a * m).collect();
    let beta1 = dot(&r1, &y).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let (mut w, mut w2) = (vec![0.0; n], vec![0.0; n]);
    let mut v = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        h.apply(&v, &mut y, &mut scratch);
        if itn >= 2 {
            let c = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(yi, ri)| *yi -= c * ri);
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(yi, ri)| *yi -= c * ri);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        y.iter_mut().zip(&r2).zip(minv).for_each(|((yi, ri), m)| *yi = ri * m);
        oldb = beta;
        let bb = dot(&r2, &y);
        if !(bb >= 0.0) {
            break;
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar < rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    x
}

struct NewtonOutcome {
    u: Vec<f64>,
    iterations: usize,
}

fn newton_raw(problem: &Problem, mut u: Vec<f64>, tol: f64, max_iter: usize) -> Result<NewtonOutcome> {
    let n = u.len();
    let nfree = problem.free_indices().len();
    let (mut lap, mut r) = (vec![0.0; n], vec![0.0; n]);
    let mut scratch = vec![0.0; n];
    problem.residual_into(&u, &mut lap, &mut r);
    let mut rnorm = norm(&r);
    for k in 0..=max_iter {
        let rs = sup(&r);
        if rs < tol {
            return Ok(NewtonOutcome {
                u,
                iterations: k,
            });
        }
        if k == max_iter {
            return Err(Error::RefinementFailure(format!(
                "no convergence in {max_iter} Newton steps (|r|_inf = {rs:e})"
            )));
        }
        let h = Hessian::new(problem, &u);
        let minv = h.inverse_abs_diagonal();
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let delta = minres(&h, &rhs, &minv, 1e-12, 20 * nfree.max(50));
        let mut trial_r = vec![0.0; n];
        let mut step_ok = None;
        let mut alpha = 1.0;
        while alpha > 1e-10 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            problem.residual_into(&trial, &mut lap, &mut trial_r);
            let tn = norm(&trial_r);
            if tn.is_finite() && tn <= (1.0 - 1e-4 * alpha) * rnorm {
                step_ok = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let next = match step_ok {
            Some(t) => t,
            None => {
                // Gradient flow on ½‖r‖², whose gradient is H r.
                let mut q = vec![0.0; n];
                h.apply(&r, &mut q, &mut scratch);
                let mut hq = vec![0.0; n];
                h.apply(&q, &mut hq, &mut scratch);
                let qq = dot(&q, &q);
                let mut alpha = qq / dot(&hq, &hq);
                let mut found = None;
                while alpha.is_finite() && alpha > 1e-20 * (1.0 + qq.recip()) {
                    let trial: Vec<f64> = u.iter().zip(&q).map(|(a, d)| a - alpha * d).collect();
                    problem.residual_into(&trial, &mut lap, &mut trial_r);
                    if norm(&trial_r) < rnorm {
                        found = Some(trial);
                        break;
                    }
                    alpha *= 0.5;
                }
                found.ok_or_else(|| {
                    Error::RefinementFailure(format!(
                        "neither Newton nor residual descent reduced |r| = {rnorm:e}"
                    ))
                })?
            }
        };
        u = next;
        problem.residual_into(&u, &mut lap, &mut r);
        rnorm = norm(&r);
    }
    unreachable!()
}

fn certify(
    problem: &Problem,
    constraint: Constraint,
    u: Field,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let n = u.len();
    let (mut lap, mut r) = (vec![0.0; n], vec![0.0; n]);
    problem.residual_into(u.values(), &mut lap, &mut r);
    let residual_sup = sup(&r);
    let level = energy(&u, problem)?.total;
    let sc = problem.sign_scalars(&u)?;
    let (up, um) = split_signs(&u);
    let sign_norms = (norm(up.values()), norm(um.values()));
    let (nehari, nehari_scaled) = match constraint {
        Constraint::SignChanging => {
            let nr = nehari_residuals(&u, problem)?;
            (
                (nr.plus, nr.minus),
                (nr.plus.abs() / (1.0 + sc.norm_plus)).max(nr.minus.abs() / (1.0 + sc.norm_minus)),
            )
        }
        Constraint::Ground => {
            let h = sc.radial_residual(1.0);
            ((h, 0.0), h.abs() / (1.0 + sc.norm_sq()))
        }
    };
    let mut note = None;
    if residual_sup >= opts.certify_residual {
        note = Some(format!("residual {residual_sup:e} above {:e}", opts.certify_residual));
    } else if nehari_scaled >= opts.certify_nehari {
        note = Some(format!("Nehari residual {nehari_scaled:e} above {:e}", opts.certify_nehari));
    } else if constraint == Constraint::SignChanging && !(sign_norms.0 > 0.0 && sign_norms.1 > 0.0) {
        note = Some("minimizer lost a sign part".into());
    }
    Ok(SolveReport {
        constraint,
        minimizer: u,
        level,
        residual_sup,
        nehari_residuals: nehari,
        nehari_scaled,
        sign_norms,
        seed_id: 0,
        seed_name: String::new(),
        iterations: 0,
        newton_iterations: 0,
        stop: StopReason::GradientTolerance,
        history: Vec::new(),
        certified: note.is_none(),
        note,
        candidates: Vec::new(),
    })
}

/// Damped Newton on `r(u) = 0` with MINRES inner solves.
pub fn newton_refine(u: &Field, problem: &Problem, opts: &SolveOptions) -> Result<SolveReport> {
    problem.check_admissible(u)?;
    let constraint = if u.has_positive_part() && u.has_negative_part() {
        Constraint::SignChanging
    } else {
        Constraint::Ground
    };
    let out = newton_raw(problem, u.values().to_vec(), opts.newton_tol, opts.newton_max_iterations)?;
    let f = Field::from_values(problem.graph(), out.u)?;
    let mut rep = certify(problem, constraint, f, opts)?;
    rep.newton_iterations = out.iterations;
    rep.seed_name = "input".into();
    Ok(rep)
}

fn solve_seed(
    problem: &Problem,
    constraint: Constraint,
    seed: &SeedSpec,
    seed_id: usize,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let u0 = seed_field(seed, problem, constraint)?;
    let d = descend(problem, constraint, u0.values(), opts)?;
    let descended = Field::from_values(problem.graph(), d.w.clone())?;
    let refined = newton_raw(problem, d.w, opts.newton_tol, opts.newton_max_iterations);
    let (mut rep, newton_iterations) = match refined {
        Ok(out) => {
            let f = Field::from_values(problem.graph(), out.u)?;
            let rep = certify(problem, constraint, f, opts)?;
            // Newton must polish, not jump to another critical point.
            if (rep.level - d.energy).abs() <= 1e-6 * (1.0 + d.energy.abs())
                && (constraint == Constraint::Ground || rep.sign_norms.0 * rep.sign_norms.1 > 0.0)
            {
                (rep, out.iterations)
            } else {
                let mut rep = certify(problem, constraint, descended, opts)?;
                rep.certified = false;
                rep.note = Some(format!(
                    "Newton moved to another critical point (J {} -> {})",
                    d.energy, rep.level
                ));
                (rep, out.iterations)
            }
        }
        Err(e) => {
            let mut rep = certify(problem, constraint, descended, opts)?;
            rep.certified = false;
            rep.note = Some(e.to_string());
            (rep, 0)
        }
    };
    rep.seed_id = seed_id;
    rep.seed_name = seed.name.clone();
    rep.iterations = d.iterations;
    rep.newton_iterations = newton_iterations;
    rep.stop = d.stop;
    rep.history = d.history;
    debug_assert!(d.gradient.is_finite());
    Ok(rep)
}

fn better(a: &SolveReport, b: &SolveReport, tie: f64) -> bool {
    // Certified beats uncertified; then lower level; ties go to lower seed_id.
    if a.certified != b.certified {
        return a.certified;
    }
    let scale = 1.0 + a.level.abs().max(b.level.abs());
    if (a.level - b.level).abs() <= tie * scale {
        a.seed_id < b.seed_id
    } else {
        a.level < b.level
    }
}

fn minimize(
    problem: &Problem,
    constraint: Constraint,
    seeds: &[SeedSpec],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds given".into()));
    }
    let run = |(i, s): (usize, &SeedSpec)| solve_seed(problem, constraint, s, i, opts);
    let results: Vec<Result<SolveReport>> = if opts.parallel {
        seeds.par_iter().enumerate().map(run).collect()
    } else {
        seeds.iter().enumerate().map(run).collect()
    };
    let candidates: Vec<CandidateSummary> = results
        .iter()
        .zip(seeds)
        .enumerate()
        .map(|(i, (r, s))| match r {
            Ok(rep) => CandidateSummary {
                seed_id: i,
                seed_name: s.name.clone(),
                level: Some(rep.level),
                certified: rep.certified,
                error: rep.note.clone(),
            },
            Err(e) => CandidateSummary {
                seed_id: i,
                seed_name: s.name.clone(),
                level: None,
                certified: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut best: Option<SolveReport> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| better(&rep, b, opts.tie_tol)) {
                    best = Some(rep);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut rep) => {
            rep.candidates = candidates;
            Ok(rep)
        }
        None => {
            let e = first_err.expect("nonempty seed list");
            if matches!(e, Error::Stagnation(_)) {
                Err(e)
            } else {
                Err(Error::NoCandidate(format!("every seed failed; first error: {e}")))
            }
        }
    }
}

/// Least-energy sign-changing level `m` over the seeds.
pub fn minimize_sign_changing(
    problem: &Problem,
    seeds: &[SeedSpec],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    minimize(problem, Constraint::SignChanging, seeds, opts)
}

/// Ground level `c` over the seeds.
pub fn minimize_ground(problem: &Problem, seeds: &[SeedSpec], opts: &SolveOptions) -> Result<SolveReport> {
    minimize(problem, Constraint::Ground, seeds, opts)
}

/// Nodal and ground solutions of one problem.
#[derive(Debug, Clone)]
pub struct LevelPair {
    pub problem: Problem,
    pub nodal: SolveReport,
    pub ground: SolveReport,
}

impl LevelPair {
    /// `m − 2c`.
    pub fn gap(&self) -> f64 {
        self.nodal.level - 2.0 * self.ground.level
    }
}

/// Solves both levels of `problem`.
pub fn solve_levels(problem: Problem, seeds: &[SeedSpec], opts: &SolveOptions) -> Result<LevelPair> {
    let nodal = minimize_sign_changing(&problem, seeds, opts)?;
    let ground = minimize_ground(&problem, seeds, opts)?;
    Ok(LevelPair {
        problem,
        nodal,
        ground,
    })
}

/// The Dirichlet problem on `Ω`, on the smallest ℓ¹ ball holding `Ω ∪ ∂Ω`.
pub fn limit_problem(params: ModelParams, domain: DomainSpec) -> Result<Problem> {
    let g = std::sync::Arc::new(build_box(domain.reach() + 1));
    Problem::domain(g, params, domain)
}

/// `m_Ω` and `c_Ω`.
pub fn solve_limit_problem(
    params: ModelParams,
    domain: DomainSpec,
    seeds: &[SeedSpec],
    opts: &SolveOptions,
) -> Result<LevelPair> {
    solve_levels(limit_problem(params, domain)?, seeds, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::euler_lagrange_residual;
    use crate::lattice::build_box;
    use std::sync::Arc;

    fn small_domain() -> Problem {
        let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0).unwrap();
        limit_problem(params, DomainSpec::ball(1)).unwrap()
    }

    #[test]
    fn default_seed_list() {
        let s = default_seeds(7);
        assert_eq!(s.len(), 8);
        assert!(matches!(s[3].kind, SeedKind::Dipole { axis: 0, separation: 4 }));
        assert!(matches!(s[5].kind, SeedKind::RandomBumpPair { rng_seed: 8 }));
    }

    #[test]
    fn seeds_are_sign_changing_and_admissible() {
        let pb = small_domain();
        for s in default_seeds(1).iter().take(2).chain(default_seeds(1)[4..].iter()) {
            let u = seed_field(s, &pb, Constraint::SignChanging).unwrap();
            pb.check_admissible(&u).unwrap();
            let v = seed_field(s, &pb, Constraint::Ground).unwrap();
            assert!(!v.has_negative_part());
        }
        // Separation 4 leaves B_1 on both ends.
        assert!(seed_field(&default_seeds(1)[3], &pb, Constraint::SignChanging).is_err());
    }

    #[test]
    fn random_seed_is_reproducible() {
        let pb = small_domain();
        let s = SeedSpec::new("r", SeedKind::RandomBumpPair { rng_seed: 42 });
        let a = seed_field(&s, &pb, Constraint::SignChanging).unwrap();
        let b = seed_field(&s, &pb, Constraint::SignChanging).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hessian_matches_residual_differences() {
        let pb = small_domain();
        let g = pb.graph().clone();
        let u = pb.restrict(&Field::from_fn(&g, |x| 0.7 - 0.3 * x.0[0] as f64 + 0.2 * x.0[1] as f64));
        let v = pb.restrict(&Field::from_fn(&g, |x| 0.5 + 0.1 * x.0[2] as f64 - 0.4 * x.0[0] as f64));
        let hv = hessian_vector(&u, &v, &pb).unwrap();
        let h = 1e-6;
        let rp = euler_lagrange_residual(&u.axpy(h, &v).unwrap(), &pb).unwrap();
        let rm = euler_lagrange_residual(&u.axpy(-h, &v).unwrap(), &pb).unwrap();
        let scale = hv.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..u.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            assert!((fd - hv[i]).abs() < 1e-5 * scale, "{i}: {fd} vs {}", hv[i]);
        }
    }

    #[test]
    fn small_domain_levels() {
        let pb = small_domain();
        let opts = SolveOptions::default();
        let seeds = default_seeds(3);
        let m = minimize_sign_changing(&pb, &seeds, &opts).unwrap();
        let c = minimize_ground(&pb, &seeds, &opts).unwrap();
        assert!(m.certified && c.certified, "{:?} {:?}", m.note, c.note);
        assert!(c.level > 0.0 && m.level > 2.0 * c.level);
        assert!(m.history.windows(2).all(|w| w[1].energy <= w[0].energy));
        let r = euler_lagrange_residual(&m.minimizer, &pb).unwrap();
        assert!(r.values().iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn exact_solution_needs_no_newton_steps() {
        let pb = small_domain();
        let opts = SolveOptions::default();
        let m = minimize_sign_changing(&pb, &default_seeds(3), &opts).unwrap();
        let again = newton_refine(&m.minimizer, &pb, &opts).unwrap();
        assert_eq!(again.newton_iterations, 0);
        assert_eq!(again.minimizer, m.minimizer);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let params = ModelParams::new(1.0, 1.0, 7.0, 10.0, 8.0).unwrap();
        let g = Arc::new(build_box(5));
        let pot = crate::model::PotentialSpec::step_well(1.0, DomainSpec::ball(1)).unwrap();
        let pb = Problem::whole_lattice(g, params, pot).unwrap();
        let seeds = default_seeds(9);
        let par = minimize_sign_changing(&pb, &seeds, &SolveOptions::default()).unwrap();
        let ser = minimize_sign_changing(
            &pb,
            &seeds,
            &SolveOptions {
                parallel: false,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(par.minimizer, ser.minimizer);
        assert_eq!(par.seed_id, ser.seed_id);
    }
}
