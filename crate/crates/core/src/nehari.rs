//! Projections onto the Nehari manifold `N` and the sign-changing set `M`.
//!
//! Pair projection works entirely on [`SignScalars`]: the bracket square is
//! found by geometric search, shrunk by Miranda-certified halving, and the
//! root polished by damped Newton with the analytic Jacobian. Because
//! `K ≤ 0`, `g₁` is nondecreasing in `t` and `g₂` in `s`, so the Miranda edge
//! conditions on a box reduce to signs at two opposite corners.

use serde::Serialize;

use crate::calculus::Field;
use crate::energy::{nehari_residuals, Problem, SignScalars};
use crate::error::{Error, Result};

/// Default relative tolerance on the projection residuals.
pub const DEFAULT_TOL: f64 = 1e-10;

const SEARCH_LIMIT: i32 = 60;
const MAX_HALVINGS: usize = 200;
const MAX_NEWTON: usize = 100;
/// Relative width at which Miranda halving hands over to Newton.
const CELL: f64 = 1e-4;

/// Which stage produced the final pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionStage {
    Miranda,
    Newton,
    NestedBisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub stage: ProjectionStage,
    pub s: f64,
    pub t: f64,
    pub g1: f64,
    pub g2: f64,
}

/// Result of a pair projection `u ↦ s·u⁺ + t·u⁻ ∈ M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NehariProjection {
    pub s: f64,
    pub t: f64,
    pub residual_g1: f64,
    pub residual_g2: f64,
    /// Square `[r, R]²` on which the Miranda signs were certified.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
    pub stage: ProjectionStage,
    /// Residual scale `1 + s²‖u⁺‖² + t²‖u⁻‖²`.
    pub scale: f64,
    pub trace: Vec<TraceStep>,
}

impl NehariProjection {
    /// `s·u⁺ + t·u⁻`.
    pub fn apply(&self, u: &Field) -> Field {
        u.recombine(self.s, self.t)
    }
}

fn require_both_signs(sc: &SignScalars) -> Result<()> {
    if sc.both_signs() {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "pair projection needs a field with both sign parts nonzero".into(),
        ))
    }
}

/// `(g₁(s,t), g₂(s,t))` from the closed forms.
pub fn g_pair(u: &Field, s: f64, t: f64, problem: &Problem) -> Result<(f64, f64)> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scalings must be positive, got s={s}, t={t}"
        )));
    }
    let sc = problem.sign_scalars(u)?;
    require_both_signs(&sc)?;
    Ok((sc.g1(s, t), sc.g2(s, t)))
}

/// Whether the four corner signs certify a root in `[r, R]²`.
pub fn miranda_signs(sc: &SignScalars, r: f64, big_r: f64) -> bool {
    r < big_r
        && sc.g1(r, r) > 0.0
        && sc.g2(r, r) > 0.0
        && sc.g1(big_r, big_r) < 0.0
        && sc.g2(big_r, big_r) < 0.0
}

/// Geometric search by factors of 2 from `s = 1` for the tightest power-of-two
/// bracket. Signs at a trial point count only when they clear a small margin,
/// so a field already on `M` gets `r < 1 < R`.
pub fn find_bracket_scalars(sc: &SignScalars) -> Result<(f64, f64)> {
    require_both_signs(sc)?;
    let margin = |s: f64| 1e-8 * scale_at(sc, s, s);
    let pos = |k: i32| {
        let s = 2f64.powi(k);
        sc.g1(s, s) > margin(s) && sc.g2(s, s) > margin(s)
    };
    let neg = |k: i32| {
        let s = 2f64.powi(k);
        sc.g1(s, s) < -margin(s) && sc.g2(s, s) < -margin(s)
    };
    let fail = || {
        Error::NumericalFailure(format!(
            "no Miranda bracket within [2^-{SEARCH_LIMIT}, 2^{SEARCH_LIMIT}]"
        ))
    };
    let mut k = 0;
    if pos(0) {
        while pos(k + 1) {
            k += 1;
            if k >= SEARCH_LIMIT {
                return Err(fail());
            }
        }
    } else {
        k = -1;
        while !pos(k) {
            k -= 1;
            if k < -SEARCH_LIMIT {
                return Err(fail());
            }
        }
    }
    let mut big_k = k + 1;
    while !neg(big_k) {
        big_k += 1;
        if big_k > SEARCH_LIMIT {
            return Err(fail());
        }
    }
    Ok((2f64.powi(k), 2f64.powi(big_k)))
}

pub fn find_bracket(u: &Field, problem: &Problem) -> Result<(f64, f64)> {
    find_bracket_scalars(&problem.sign_scalars(u)?)
}

fn scale_at(sc: &SignScalars, s: f64, t: f64) -> f64 {
    1.0 + s * s * sc.norm_plus + t * t * sc.norm_minus
}

fn accept(sc: &SignScalars, s: f64, t: f64, tol: f64) -> bool {
    let sc_ = scale_at(sc, s, t);
    sc.g1(s, t).abs() < tol * sc_ && sc.g2(s, t).abs() < tol * sc_
}

/// Pair projection from a valid bracket `[r, R]²`.
pub fn project_pair_in(
    sc: &SignScalars,
    bracket: (f64, f64),
    tol: f64,
) -> Result<NehariProjection> {
    require_both_signs(sc)?;
    let (r, big_r) = bracket;
    if !miranda_signs(sc, r, big_r) {
        return Err(Error::InvalidInput(format!(
            "[{r}, {big_r}]² does not carry the Miranda sign pattern"
        )));
    }
    let mut trace = Vec::new();
    let mut record = |stage, s: f64, t: f64| {
        trace.push(TraceStep {
            stage,
            s,
            t,
            g1: sc.g1(s, t),
            g2: sc.g2(s, t),
        })
    };

    // Miranda halving on the box [s0,s1]×[t0,t1].
    let (mut s0, mut s1, mut t0, mut t1) = (r, big_r, r, big_r);
    let mut iterations = 0;
    while iterations < MAX_HALVINGS {
        let (sm, tm) = (0.5 * (s0 + s1), 0.5 * (t0 + t1));
        if accept(sc, sm, tm, tol) {
            break;
        }
        // Halving along s keeps the g₂ corner signs (g₂ is monotone in s),
        // so only the g₁ sign at the new edge needs checking; same for t.
        let s_cut = if sc.g1(sm, t1) < 0.0 {
            Some((s0, sm))
        } else if sc.g1(sm, t0) > 0.0 {
            Some((sm, s1))
        } else {
            None
        };
        let t_cut = if sc.g2(s1, tm) < 0.0 {
            Some((t0, tm))
        } else if sc.g2(s0, tm) > 0.0 {
            Some((tm, t1))
        } else {
            None
        };
        let moved = match (s1 - s0 >= t1 - t0, s_cut, t_cut) {
            (true, Some(c), _) | (false, Some(c), None) => {
                (s0, s1) = c;
                true
            }
            (_, _, Some(c)) => {
                (t0, t1) = c;
                true
            }
            _ => false,
        };
        if !moved || (s1 - s0 <= CELL * s1 && t1 - t0 <= CELL * t1) {
            break;
        }
        iterations += 1;
        record(ProjectionStage::Miranda, 0.5 * (s0 + s1), 0.5 * (t0 + t1));
    }

    let (mut s, mut t) = (0.5 * (s0 + s1), 0.5 * (t0 + t1));
    let mut stage = ProjectionStage::Miranda;
    if !accept(sc, s, t, tol) {
        stage = ProjectionStage::Newton;
        match newton_pair(sc, s, t, (r, big_r), tol, &mut record) {
            Some((sn, tn, k)) => {
                s = sn;
                t = tn;
                iterations += k;
            }
            None => {
                stage = ProjectionStage::NestedBisection;
                let (sn, tn, k) = nested_bisection(sc, r, big_r);
                s = sn;
                t = tn;
                iterations += k;
                record(stage, s, t);
            }
        }
    }
    let scale = scale_at(sc, s, t);
    let (g1, g2) = (sc.g1(s, t), sc.g2(s, t));
    let converged = g1.abs() < tol * scale && g2.abs() < tol * scale;
    if !converged && stage == ProjectionStage::NestedBisection {
        return Err(Error::NumericalFailure(format!(
            "pair projection did not converge: residuals ({g1:e}, {g2:e}) at s={s}, t={t}"
        )));
    }
    Ok(NehariProjection {
        s,
        t,
        residual_g1: g1,
        residual_g2: g2,
        bracket: (r, big_r),
        iterations,
        converged,
        stage,
        scale,
        trace,
    })
}

fn newton_pair(
    sc: &SignScalars,
    mut s: f64,
    mut t: f64,
    bracket: (f64, f64),
    tol: f64,
    record: &mut impl FnMut(ProjectionStage, f64, f64),
) -> Option<(f64, f64, usize)> {
    let merit = |s: f64, t: f64| {
        let (a, b) = (sc.g1(s, t), sc.g2(s, t));
        a * a + b * b
    };
    for k in 1..=MAX_NEWTON {
        let (f1, f2) = (sc.g1(s, t), sc.g2(s, t));
        let [[a, b], [c, d]] = sc.jacobian(s, t);
        let det = a * d - b * c;
        if !det.is_finite() || det == 0.0 {
            return None;
        }
        let ds = -(d * f1 - b * f2) / det;
        let dt = -(-c * f1 + a * f2) / det;
        let m0 = merit(s, t);
        let mut step = 1.0;
        loop {
            let (sn, tn) = (s + step * ds, t + step * dt);
            if sn > 0.0 && tn > 0.0 && merit(sn, tn) < m0 {
                s = sn;
                t = tn;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return None;
            }
        }
        record(ProjectionStage::Newton, s, t);
        if accept(sc, s, t, tol) {
            let (r, big_r) = bracket;
            return (s >= r && s <= big_r && t >= r && t <= big_r).then_some((s, t, k));
        }
    }
    None
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, usize) {
    // f(lo) > 0 > f(hi).
    let mut k = 0;
    while hi - lo > 2.0 * f64::EPSILON * hi && k < 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        k += 1;
    }
    (0.5 * (lo + hi), k)
}

/// For fixed `t`, `g₁(·,t)` changes sign on `[r,R]`; then `t ↦ g₂(s(t),t)`
/// changes sign on `[r,R]` as well.
fn nested_bisection(sc: &SignScalars, r: f64, big_r: f64) -> (f64, f64, usize) {
    let s_of = |t: f64| bisect(r, big_r, |s| sc.g1(s, t)).0;
    let (t, k) = bisect(r, big_r, |t| sc.g2(s_of(t), t));
    (s_of(t), t, k)
}

/// Pair projection of the scalars of a sign-changing field.
pub fn project_pair_scalars(sc: &SignScalars, tol: f64) -> Result<NehariProjection> {
    let bracket = find_bracket_scalars(sc)?;
    project_pair_in(sc, bracket, tol)
}

/// The unique `(s, t)` with `s·u⁺ + t·u⁻ ∈ M`.
pub fn project_pair(u: &Field, problem: &Problem, tol: f64) -> Result<NehariProjection> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    project_pair_scalars(&problem.sign_scalars(u)?, tol)
}

/// Result of a projection `u ↦ s·u ∈ N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarProjection {
    pub s: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// `s > 0` with `(J'(su), su) = 0`, by bracketed bisection then Newton.
pub fn project_scalar_scalars(sc: &SignScalars, tol: f64) -> Result<ScalarProjection> {
    if sc.pow_plus + sc.pow_minus == 0.0 {
        return Err(Error::InvalidInput("cannot project the zero field".into()));
    }
    let h = |s: f64| sc.radial_residual(s);
    let scale = |s: f64| 1.0 + s * s * sc.norm_sq();
    let mut lo = 1.0;
    let mut k = 0;
    while !(h(lo) > 0.0) {
        lo *= 0.5;
        k += 1;
        if k > SEARCH_LIMIT {
            return Err(Error::NumericalFailure("no lower bracket for the scalar projection".into()));
        }
    }
    let mut hi = lo * 2.0;
    k = 0;
    while !(h(hi) < 0.0) {
        hi *= 2.0;
        k += 1;
        if k > 2 * SEARCH_LIMIT {
            return Err(Error::NumericalFailure("no upper bracket for the scalar projection".into()));
        }
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    // Bisection to a 1e-3 relative cell, then safeguarded Newton.
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..MAX_NEWTON {
        let v = h(s);
        if v.abs() < tol * scale(s) {
            break;
        }
        if v > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let d = sc.radial_residual_derivative(s);
        let mut next = s - v / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == s {
            break;
        }
        s = next;
        iterations += 1;
    }
    let residual = h(s);
    if residual.abs() >= tol * scale(s) {
        return Err(Error::NumericalFailure(format!(
            "scalar projection stalled at s={s} with residual {residual:e}"
        )));
    }
    Ok(ScalarProjection {
        s,
        residual,
        bracket,
        iterations,
    })
}

pub fn project_scalar(u: &Field, problem: &Problem, tol: f64) -> Result<ScalarProjection> {
    project_scalar_scalars(&problem.sign_scalars(u)?, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkReport {
    pub s: f64,
    pub t: f64,
    pub residuals: (f64, f64),
    pub holds: bool,
}

/// Projects a field with nonpositive Nehari residuals and checks `s, t ≤ 1`.
pub fn shrink_property_check(u: &Field, problem: &Problem, tol: f64) -> Result<ShrinkReport> {
    let r = nehari_residuals(u, problem)?;
    if r.one_signed {
        return Err(Error::InvalidInput("field must change sign".into()));
    }
    if r.plus > 0.0 || r.minus > 0.0 {
        return Err(Error::InvalidInput(format!(
            "Nehari residuals ({:e}, {:e}) are not both nonpositive",
            r.plus, r.minus
        )));
    }
    let pr = project_pair(u, problem, DEFAULT_TOL)?;
    Ok(ShrinkReport {
        s: pr.s,
        t: pr.t,
        residuals: (r.plus, r.minus),
        holds: pr.s <= 1.0 + tol && pr.t <= 1.0 + tol,
    })
}
