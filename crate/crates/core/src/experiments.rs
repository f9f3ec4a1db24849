//! λ-sweeps toward the limit problem, convergence summaries and truncation
//! studies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{dirichlet_energy, Field, Region};
use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::lattice::{apply_symmetry, point_group, DomainSpec, LatticeGraph, Truncation, Vertex};
use crate::model::{ModelParams, PotentialKind, PotentialSpec};
use crate::solver::{
    minimize_ground, minimize_sign_changing, solve_limit_problem, LevelPair, SeedSpec, SolveOptions,
    SolveReport,
};

/// Smallest ℓ¹ radius whose halo is at graph distance ≥ 8 from `Ω`.
pub fn default_radius(domain: &DomainSpec) -> u64 {
    domain.omega().iter().map(Vertex::norm1).max().unwrap_or(0) + 7
}

/// Everything needed to pose the whole-lattice problem for any `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: ModelParams,
    pub potential: PotentialKind,
    pub domain: DomainSpec,
    pub shape: Truncation,
    pub radius: u64,
}

impl Instance {
    pub fn graph(&self) -> Arc<LatticeGraph> {
        Arc::new(LatticeGraph::new(self.shape, self.radius))
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        PotentialSpec {
            kind: self.potential,
            omega: self.domain.clone(),
        }
    }

    pub fn problem(&self, graph: &Arc<LatticeGraph>, lambda: f64) -> Result<Problem> {
        Problem::whole_lattice(graph.clone(), self.params.with_lambda(lambda)?, self.potential_spec())
    }

    pub fn with_radius(&self, radius: u64) -> Self {
        Instance {
            radius,
            ..self.clone()
        }
    }
}

/// `‖w‖²_{H¹} = Σ|∇w|² + Σw²` over every stored vertex.
pub fn h1_norm_sq(w: &Field) -> f64 {
    dirichlet_energy(w, Region::All) + w.values().iter().map(|x| x * x).sum::<f64>()
}

/// `min ‖u − σ·(g·v)‖_{H¹}` over signs `σ = ±1` and lattice symmetries `g`
/// that preserve `Ω` and the truncation of `u`. `v` may live on another graph.
pub fn aligned_h1_distance(u: &Field, v: &Field, domain: &DomainSpec) -> Result<f64> {
    let g = u.graph();
    let mut best = f64::INFINITY;
    for m in point_group() {
        if !domain.omega().iter().all(|x| domain.contains(apply_symmetry(&m, *x))) {
            continue;
        }
        // (g·v)(gx) = v(x).
        let mut moved = Field::zeros(g);
        let mut lost = false;
        for (i, x) in v.graph().vertices().iter().enumerate() {
            if v[i] == 0.0 {
                continue;
            }
            match g.index_of(apply_symmetry(&m, *x)) {
                Some(j) => moved[j] = v[i],
                None => lost = true,
            }
        }
        if lost {
            continue;
        }
        for sign in [1.0, -1.0] {
            let d = h1_norm_sq(&u.axpy(-sign, &moved)?);
            best = best.min(d);
        }
    }
    if best.is_finite() {
        Ok(best.sqrt())
    } else {
        Err(Error::Shape("no symmetry maps the limit field into the truncation".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub m_lambda: f64,
    pub c_lambda: f64,
    /// `m_λ − 2c_λ`.
    pub gap: f64,
    /// Sign- and symmetry-aligned `‖u_λ − u_0‖_{H¹}`.
    pub h1_dist: f64,
    /// `λ Σ h u_λ²`.
    pub pot_mass: f64,
    /// Larger of the two `‖r‖_∞`.
    pub residual_sup: f64,
    /// `sup_{x∉Ω} |u_λ(x)|`.
    pub outside_sup: f64,
    /// `‖u_λ‖²_{H_λ}`.
    pub h_norm_sq: f64,
    /// `min(‖u_λ⁺‖_{H¹}, ‖u_λ⁻‖_{H¹})`.
    pub sign_floor: f64,
    pub nodal_seed: String,
    pub certified: bool,
}

impl SweepRow {
    pub const CSV_HEADER: [&'static str; 7] =
        ["lambda", "m_lambda", "c_lambda", "gap", "h1_dist", "pot_mass", "residual_sup"];

    pub fn csv_values(&self) -> Vec<f64> {
        vec![
            self.lambda,
            self.m_lambda,
            self.c_lambda,
            self.gap,
            self.h1_dist,
            self.pot_mass,
            self.residual_sup,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub m_omega: f64,
    pub c_omega: f64,
    pub residual_sup: f64,
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub limit_row: LimitRow,
    pub instance: Instance,
    pub seeds: Vec<SeedSpec>,
    pub nodal: Vec<SolveReport>,
    pub ground: Vec<SolveReport>,
    pub limit: LevelPair,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self.rows.iter().map(SweepRow::csv_values).collect();
        crate::io::csv_table(&SweepRow::CSV_HEADER, &rows)
    }
}

fn sign_floor(u: &Field) -> f64 {
    let (up, um) = crate::calculus::split_signs(u);
    h1_norm_sq(&up).sqrt().min(h1_norm_sq(&um).sqrt())
}

/// Solves the problem at each `λ` (ascending), warm-starting from the
/// previous minimizer and from the limit minimizer extended by zero, and
/// compares against the limit problem on `Ω`.
pub fn lambda_sweep(
    instance: &Instance,
    lambdas: &[f64],
    seeds: &[SeedSpec],
    opts: &SolveOptions,
) -> Result<SweepReport> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParameter("λ values must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("λ values must be strictly ascending".into()));
    }
    let limit = solve_limit_problem(instance.params, instance.domain.clone(), seeds, opts)?;
    let graph = instance.graph();
    let u0 = limit.nodal.minimizer.transfer_to(&graph)?;
    let v0 = limit.ground.minimizer.transfer_to(&graph)?;
    let (mut rows, mut nodal, mut ground) = (Vec::new(), Vec::new(), Vec::new());
    let mut warm: Option<(Field, Field)> = None;
    for &lambda in lambdas {
        let pb = instance.problem(&graph, lambda)?;
        let mut ns = seeds.to_vec();
        let mut gs = seeds.to_vec();
        ns.push(SeedSpec::field("limit", u0.clone()));
        gs.push(SeedSpec::field("limit", v0.clone()));
        if let Some((wm, wc)) = &warm {
            ns.push(SeedSpec::field("warm", wm.clone()));
            gs.push(SeedSpec::field("warm", wc.clone()));
        }
        let m = minimize_sign_changing(&pb, &ns, opts)?;
        let c = minimize_ground(&pb, &gs, opts)?;
        let u = &m.minimizer;
        let outside_sup = graph
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, x)| !instance.domain.contains(**x))
            .fold(0.0f64, |acc, (i, _)| acc.max(u[i].abs()));
        rows.push(SweepRow {
            lambda,
            m_lambda: m.level,
            c_lambda: c.level,
            gap: m.level - 2.0 * c.level,
            h1_dist: aligned_h1_distance(u, &u0, &instance.domain)?,
            pot_mass: pb.potential_mass(u)?,
            residual_sup: m.residual_sup.max(c.residual_sup),
            outside_sup,
            h_norm_sq: pb.h_norm_sq(u)?,
            sign_floor: sign_floor(u),
            nodal_seed: m.seed_name.clone(),
            certified: m.certified && c.certified,
        });
        warm = Some((m.minimizer.clone(), c.minimizer.clone()));
        nodal.push(m);
        ground.push(c);
    }
    Ok(SweepReport {
        rows,
        limit_row: LimitRow {
            m_omega: limit.nodal.level,
            c_omega: limit.ground.level,
            residual_sup: limit.nodal.residual_sup.max(limit.ground.residual_sup),
            certified: limit.nodal.certified && limit.ground.certified,
        },
        instance: instance.clone(),
        seeds: seeds.to_vec(),
        nodal,
        ground,
        limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceThresholds {
    /// On `|m_λ − m_Ω| / |m_Ω|` at the largest `λ`.
    pub level_rel: f64,
    /// On the aligned `H¹` distance at the largest `λ`.
    pub h1: f64,
    /// On `λ Σ h u_λ²` at the largest `λ`.
    pub pot_mass: f64,
}

impl Default for ConvergenceThresholds {
    fn default() -> Self {
        ConvergenceThresholds {
            level_rel: 1e-4,
            h1: 1e-3,
            pot_mass: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub certified_rows: usize,
    /// Least-squares slope of `log |m_λ − m_Ω|` against `log λ`.
    pub level_rate: f64,
    pub h1_rate: f64,
    pub pot_mass_rate: f64,
    pub last_level_rel: f64,
    pub last_h1: f64,
    pub last_pot_mass: f64,
    pub level_monotone: bool,
    pub h1_monotone: bool,
    pub pot_mass_monotone: bool,
    pub outside_monotone: bool,
    pub gap_positive: bool,
    pub below_limit: bool,
    pub level_ok: bool,
    pub h1_ok: bool,
    pub pot_mass_ok: bool,
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Decay rates and last-row checks over the certified rows.
pub fn convergence_report(
    sweep: &SweepReport,
    thresholds: &ConvergenceThresholds,
) -> Result<ConvergenceSummary> {
    let rows: Vec<&SweepRow> = sweep.rows.iter().filter(|r| r.certified).collect();
    if rows.len() < 3 || !sweep.limit_row.certified {
        return Err(Error::ReportIncomplete(format!(
            "need 3 certified rows and a certified limit, have {} rows (limit certified: {})",
            rows.len(),
            sweep.limit_row.certified
        )));
    }
    let m_omega = sweep.limit_row.m_omega;
    let lam: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let level: Vec<f64> = rows.iter().map(|r| (r.m_lambda - m_omega).abs()).collect();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1_dist).collect();
    let pm: Vec<f64> = rows.iter().map(|r| r.pot_mass).collect();
    let outside: Vec<f64> = rows.iter().map(|r| r.outside_sup).collect();
    let last = rows[rows.len() - 1];
    let last_level_rel = (last.m_lambda - m_omega).abs() / m_omega.abs();
    Ok(ConvergenceSummary {
        certified_rows: rows.len(),
        level_rate: loglog_slope(&lam, &level),
        h1_rate: loglog_slope(&lam, &h1),
        pot_mass_rate: loglog_slope(&lam, &pm),
        last_level_rel,
        last_h1: last.h1_dist,
        last_pot_mass: last.pot_mass,
        level_monotone: nonincreasing(&level),
        h1_monotone: nonincreasing(&h1),
        pot_mass_monotone: nonincreasing(&pm),
        outside_monotone: nonincreasing(&outside),
        gap_positive: rows.iter().all(|r| r.gap > 0.0),
        below_limit: rows.iter().all(|r| r.m_lambda <= m_omega + 1e-9),
        level_ok: last_level_rel < thresholds.level_rel,
        h1_ok: last.h1_dist < thresholds.h1,
        pot_mass_ok: last.pot_mass < thresholds.pot_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub radius: u64,
    pub m_lambda: f64,
    pub c_lambda: f64,
    /// Relative change from the previous radius (NaN on the first row).
    pub m_change: f64,
    pub c_change: f64,
    pub certified: bool,
}

/// `m_λ`, `c_λ` per truncation radius (ascending), each radius seeded with
/// the previous minimizers and the limit minimizer.
pub fn radius_study(
    instance: &Instance,
    lambda: f64,
    radii: &[u64],
    seeds: &[SeedSpec],
    opts: &SolveOptions,
) -> Result<Vec<RadiusRow>> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("radii must be nonempty and ascending".into()));
    }
    let limit = solve_limit_problem(instance.params, instance.domain.clone(), seeds, opts)?;
    let mut rows: Vec<RadiusRow> = Vec::new();
    let mut prev: Option<(Field, Field)> = None;
    for &radius in radii {
        let inst = instance.with_radius(radius);
        let g = inst.graph();
        let pb = inst.problem(&g, lambda)?;
        let mut ns = seeds.to_vec();
        let mut gs = seeds.to_vec();
        ns.push(SeedSpec::field("limit", limit.nodal.minimizer.clone()));
        gs.push(SeedSpec::field("limit", limit.ground.minimizer.clone()));
        if let Some((m, c)) = &prev {
            ns.push(SeedSpec::field("previous-radius", m.clone()));
            gs.push(SeedSpec::field("previous-radius", c.clone()));
        }
        let m = minimize_sign_changing(&pb, &ns, opts)?;
        let c = minimize_ground(&pb, &gs, opts)?;
        let (m_change, c_change) = match rows.last() {
            Some(r) => (
                (m.level - r.m_lambda).abs() / r.m_lambda.abs(),
                (c.level - r.c_lambda).abs() / r.c_lambda.abs(),
            ),
            None => (f64::NAN, f64::NAN),
        };
        rows.push(RadiusRow {
            radius,
            m_lambda: m.level,
            c_lambda: c.level,
            m_change,
            c_change,
            certified: m.certified && c.certified,
        });
        prev = Some((m.minimizer, c.minimizer));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;

    #[test]
    fn aligned_distance_is_symmetry_invariant() {
        let g = Arc::new(build_box(4));
        let dom = DomainSpec::ball(1);
        let u = Field::from_fn(&g, |x| if x == Vertex::unit(0) { 1.0 } else if x == Vertex::ORIGIN { -0.5 } else { 0.0 });
        let v = Field::from_fn(&g, |x| {
            if x == Vertex::new(0, -1, 0) {
                -1.0
            } else if x == Vertex::ORIGIN {
                0.5
            } else {
                0.0
            }
        });
        assert_eq!(aligned_h1_distance(&u, &v, &dom).unwrap(), 0.0);
        let w = u.scaled(0.0);
        assert!((aligned_h1_distance(&u, &w, &dom).unwrap() - h1_norm_sq(&u).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn default_radius_gap() {
        let dom = DomainSpec::ball(2);
        let r = default_radius(&dom);
        assert_eq!(r + 1 - 2, 8);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys = [3.0, 0.3, 0.03];
        assert!((loglog_slope(&xs, &ys) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_sweep_orders_levels() {
        let inst = Instance {
            params: ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0).unwrap(),
            potential: PotentialKind::StepWell { h0: 1.0 },
            domain: DomainSpec::ball(1),
            shape: Truncation::L1Ball,
            radius: 5,
        };
        let seeds = crate::solver::default_seeds(11);
        let rep = lambda_sweep(&inst, &[10.0, 100.0, 1000.0], &seeds, &SolveOptions::default()).unwrap();
        for r in &rep.rows {
            assert!(r.certified);
            assert!(r.m_lambda <= rep.limit_row.m_omega + 1e-9);
            assert!(r.gap > 0.0);
        }
        let s = convergence_report(&rep, &ConvergenceThresholds::default()).unwrap();
        assert!(s.level_monotone && s.h1_monotone && s.outside_monotone && s.level_rate < 0.0);
    }
}
