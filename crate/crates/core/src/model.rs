//! Model parameters, potential wells and the logarithmic nonlinearity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{is_connected, DomainSpec, LatticeGraph, Vertex};

/// Coefficients `(a, b, p, λ, q)` of the equation
/// `−(a + b∫|∇u|²)Δu + (λh + 1)u = |u|^{p−2}u log u²`.
///
/// `q > p` is only used by the growth bound [`bound_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub lambda: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, p: f64, lambda: f64, q: f64) -> Result<Self> {
        let m = ModelParams { a, b, p, lambda, q };
        m.validate()?;
        Ok(m)
    }

    /// `q` defaults to `p + 1`.
    pub fn with_default_q(a: f64, b: f64, p: f64, lambda: f64) -> Result<Self> {
        Self::new(a, b, p, lambda, p + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.a > 0.0 && self.a.is_finite()) {
            return fail(format!("a must be positive, got {}", self.a));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return fail(format!("b must be positive, got {}", self.b));
        }
        if !(self.p > 6.0 && self.p.is_finite()) {
            return fail(format!("p must exceed 6, got {}", self.p));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.q > self.p && self.q.is_finite()) {
            return fail(format!("q must exceed p = {}, got {}", self.p, self.q));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.a, self.b, self.p, lambda, self.q)
    }
}

/// Concrete potential families with well `Ω = {h = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `h = h0` off the well.
    StepWell { h0: f64 },
    /// `h(x) = scale · d(x, Ω)^exponent`.
    DistancePower { scale: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub omega: DomainSpec,
}

impl PotentialSpec {
    pub fn step_well(h0: f64, omega: DomainSpec) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step height must be positive, got {h0}"
            )));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::StepWell { h0 },
            omega,
        })
    }

    pub fn distance_power(scale: f64, exponent: f64, omega: DomainSpec) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "distance-power potential needs scale, exponent > 0, got {scale}, {exponent}"
            )));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::DistancePower { scale, exponent },
            omega,
        })
    }
}

/// `h(x)`: exactly zero on the well and positive elsewhere.
pub fn potential_eval(spec: &PotentialSpec, x: Vertex) -> f64 {
    if spec.omega.contains(x) {
        return 0.0;
    }
    match spec.kind {
        PotentialKind::StepWell { h0 } => h0,
        PotentialKind::DistancePower { scale, exponent } => {
            scale * (spec.omega.distance_to(x) as f64).powf(exponent)
        }
    }
}

/// Result of checking the potential hypotheses on a truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub omega_size: usize,
    pub omega_nonempty: bool,
    pub omega_connected: bool,
    /// Always true for an explicitly listed finite well.
    pub omega_bounded: bool,
    /// `Ω ∪ ∂Ω` fits inside the stored vertices.
    pub omega_fits: bool,
    pub level: f64,
    /// `|{x interior : h(x) < M}|`.
    pub sublevel_size: usize,
    /// Whether the sublevel set reaches the halo ring.
    pub sublevel_touches_halo: bool,
    pub warnings: Vec<String>,
}

/// Check the well hypotheses and measure the sublevel set `{h < M}`.
pub fn validate_potential(
    spec: &PotentialSpec,
    graph: &LatticeGraph,
    level: f64,
) -> Result<PotentialReport> {
    if !(level > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sublevel M must be positive, got {level}"
        )));
    }
    let omega: &BTreeSet<Vertex> = spec.omega.omega();
    if omega.is_empty() {
        return Err(Error::HypothesisViolation("potential well is empty".into()));
    }
    let omega_fits = omega
        .iter()
        .chain(spec.omega.boundary())
        .all(|v| graph.contains(*v));
    let connected = if omega_fits {
        is_connected(omega, graph)?
    } else {
        // Connectivity is a property of ℤ³; fall back to a graph that holds Ω.
        let reach = spec.omega.reach();
        is_connected(omega, &crate::lattice::build_box(reach))?
    };
    if !connected {
        return Err(Error::HypothesisViolation(
            "potential well is not connected".into(),
        ));
    }
    let mut sublevel_size = 0;
    let mut touches = false;
    for (i, v) in graph.vertices().iter().enumerate() {
        if potential_eval(spec, *v) < level {
            if graph.is_interior(i) {
                sublevel_size += 1;
            } else {
                touches = true;
            }
        }
    }
    let mut warnings = Vec::new();
    if touches {
        warnings.push(format!(
            "sublevel set {{h < {level}}} reaches the truncation halo; the truncation is too small for this M"
        ));
    }
    if !omega_fits {
        warnings.push("well or its vertex boundary lies outside the truncation".into());
    }
    Ok(PotentialReport {
        omega_size: omega.len(),
        omega_nonempty: true,
        omega_connected: true,
        omega_bounded: true,
        omega_fits,
        level,
        sublevel_size,
        sublevel_touches_halo: touches,
        warnings,
    })
}

/// `|t|^p log t²`, continuously extended by 0 at `t = 0`.
#[inline]
pub fn log_term(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let a = t.abs();
    a.powf(p) * 2.0 * a.ln()
}

/// `|t|^{p−2} t log t²`, 0 at `t = 0`.
#[inline]
pub fn log_force(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let a = t.abs();
    a.powf(p - 2.0) * t * 2.0 * a.ln()
}

/// Derivative of [`log_force`]: `|t|^{p−2}((p−1) log t² + 2)`.
#[inline]
pub fn log_force_derivative(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let a = t.abs();
    a.powf(p - 2.0) * ((p - 1.0) * 2.0 * a.ln() + 2.0)
}

/// Constants of the growth bound `|t|^{p−1}|log t²| ≤ ε|t| + C_ε|t|^{q−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearityBounds {
    pub epsilon: f64,
    pub c_epsilon: f64,
    pub p: f64,
    pub q: f64,
    /// Where the ratio `(t^{p−1}|log t²| − εt)/t^{q−1}` peaks.
    pub argmax: f64,
}

impl NonlinearityBounds {
    /// Whether the bound holds at `t` (up to a few ulps of slack).
    pub fn holds_at(&self, t: f64) -> bool {
        if t == 0.0 {
            return true;
        }
        let a = t.abs();
        let lhs = a.powf(self.p - 1.0) * (2.0 * a.ln()).abs();
        let rhs = self.epsilon * a + self.c_epsilon * a.powf(self.q - 1.0);
        lhs <= rhs * (1.0 + 1e-13)
    }
}

/// Number of points in the verification grid of [`bound_constant`].
pub const BOUND_VERIFY_POINTS: usize = 1_000_000;

fn bound_ratio(x: f64, eps: f64, p: f64, q: f64) -> f64 {
    // x = log t
    (x * (p - q)).exp() * 2.0 * x.abs() - eps * (x * (2.0 - q)).exp()
}

/// Smallest `C_ε` for the growth bound, by maximizing the ratio on a log
/// grid and refining with golden-section search.
pub fn bound_constant(epsilon: f64, p: f64, q: f64) -> Result<NonlinearityBounds> {
    if !(epsilon > 0.0 && p > 6.0 && q > p) {
        return Err(Error::InvalidParameter(format!(
            "need epsilon > 0 and q > p > 6, got epsilon={epsilon}, p={p}, q={q}"
        )));
    }
    let lo = -60.0;
    let hi = (60.0 + 8.0 / (q - p)).min(700.0 / q);
    let n = 200_000;
    let step = (hi - lo) / n as f64;
    let (mut best_k, mut best) = (0usize, f64::NEG_INFINITY);
    for k in 0..=n {
        let r = bound_ratio(lo + k as f64 * step, epsilon, p, q);
        if r > best {
            best = r;
            best_k = k;
        }
    }
    if best_k == 0 || best_k == n || !best.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "growth-bound ratio peaks at the edge of the search range (log t = {})",
            lo + best_k as f64 * step
        )));
    }
    let f = |x: f64| bound_ratio(x, epsilon, p, q);
    let (x_star, r_star) = golden_max(
        f,
        lo + (best_k - 1) as f64 * step,
        lo + (best_k + 1) as f64 * step,
        1e-13,
    );
    let r_star = r_star.max(best);
    if r_star <= 0.0 {
        return Err(Error::NumericalFailure(
            "growth-bound ratio has no positive maximum".into(),
        ));
    }
    let bounds = NonlinearityBounds {
        epsilon,
        c_epsilon: r_star * (1.0 + 1e-12),
        p,
        q,
        argmax: x_star.exp(),
    };
    let (tlo, thi) = (1e-8f64.ln(), 1e8f64.ln());
    for k in 0..BOUND_VERIFY_POINTS {
        let t = (tlo + (thi - tlo) * k as f64 / (BOUND_VERIFY_POINTS - 1) as f64).exp();
        if !bounds.holds_at(t) {
            return Err(Error::NumericalFailure(format!(
                "computed C_eps = {} violated at t = {t}",
                bounds.c_epsilon
            )));
        }
    }
    Ok(bounds)
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;
    use std::f64::consts::E;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 7.0, 1.0, 8.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 6.0, 1.0, 8.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 7.0, 1.0, 7.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 7.0, -1.0, 8.0).is_err());
        assert_eq!(ModelParams::with_default_q(1.0, 1.0, 7.0, 1.0).unwrap().q, 8.0);
    }

    #[test]
    fn potential_examples() {
        let step = PotentialSpec::step_well(5.0, DomainSpec::ball(1)).unwrap();
        assert_eq!(potential_eval(&step, Vertex::ORIGIN), 0.0);
        assert_eq!(potential_eval(&step, Vertex::new(3, 0, 0)), 5.0);
        let pow = PotentialSpec::distance_power(1.0, 2.0, DomainSpec::ball(0)).unwrap();
        assert_eq!(potential_eval(&pow, Vertex::new(1, -1, 1)), 9.0);
        assert_eq!(potential_eval(&pow, Vertex::ORIGIN), 0.0);
    }

    #[test]
    fn potential_validation() {
        let g = build_box(4);
        let step = PotentialSpec::step_well(5.0, DomainSpec::ball(1)).unwrap();
        let r = validate_potential(&step, &g, 1.0).unwrap();
        assert_eq!(r.sublevel_size, 7);
        assert!(!r.sublevel_touches_halo);
        let r = validate_potential(&step, &g, 10.0).unwrap();
        assert_eq!(r.sublevel_size, g.interior_count());
        assert!(r.sublevel_touches_halo);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_term(0.0, 7.0), 0.0);
        assert_eq!(log_term(1.0, 7.0), 0.0);
        let v = log_term(E, 7.0);
        assert!((v - 2.0 * E.powi(7)).abs() < 1e-12 * v);
        assert!((v - 2193.266).abs() < 1e-3);
        assert_eq!(log_force(0.0, 7.0), 0.0);
        assert_eq!(log_force(1.0, 7.0), 0.0);
        assert_eq!(log_force(-1.0, 7.0), 0.0);
        let f = log_force(E.sqrt(), 7.0);
        assert!((f - E.powi(3)).abs() < 1e-12 * f);
    }

    #[test]
    fn log_parity() {
        for t in [0.1, 0.7, 1.3, 2.9] {
            assert_eq!(log_term(-t, 7.3), log_term(t, 7.3));
            assert_eq!(log_force(-t, 7.3), -log_force(t, 7.3));
        }
    }

    #[test]
    fn integrand_derivative_matches_force() {
        let p = 7.0;
        let prim = |t: f64| 2.0 / (p * p) * t.abs().powf(p) - log_term(t, p) / p;
        let h = 1e-6;
        for t in [-2.5, -1.1, -0.4, 0.3, 0.9, 1.7, 3.2] {
            let fd = (prim(t + h) - prim(t - h)) / (2.0 * h);
            let exact = -log_force(t, p);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "t={t}");
            let dfd = (log_force(t + h, p) - log_force(t - h, p)) / (2.0 * h);
            let d = log_force_derivative(t, p);
            assert!((dfd - d).abs() <= 1e-6 * d.abs().max(1.0), "t={t}");
        }
    }

    #[test]
    fn bound_constant_monotone_in_epsilon() {
        let c1 = bound_constant(0.25, 7.0, 8.0).unwrap().c_epsilon;
        let c2 = bound_constant(0.5, 7.0, 8.0).unwrap().c_epsilon;
        let c3 = bound_constant(2.0, 7.0, 8.0).unwrap().c_epsilon;
        assert!(c1 >= c2 && c2 >= c3);
    }

    #[test]
    fn bound_constant_rejects_bad_exponents() {
        assert!(bound_constant(0.5, 7.0, 7.0).is_err());
        assert!(bound_constant(0.0, 7.0, 8.0).is_err());
    }

    #[test]
    fn bound_constant_regression() {
        // Root of 2(1 - ln t) t^5 + 3 = 0 (stationary point of the ratio for
        // eps = 1/2, p = 7, q = 8), evaluated in extended precision.
        let b = bound_constant(0.5, 7.0, 8.0).unwrap();
        let c = 0.734_555_190_073_758_8;
        assert!((b.c_epsilon - c).abs() < 1e-9 * c, "{}", b.c_epsilon);
        assert!((b.argmax - 2.744_590_050_456_347).abs() < 1e-6);
    }
}
