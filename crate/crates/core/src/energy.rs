//! Energy functionals `J_λ` (whole lattice) and `J_Ω` (potential well with
//! Dirichlet data on `∂Ω`), their derivative pairings, residuals, and the
//! closed-form expansions of `J(su⁺ + tu⁻)` in the sign-part scalars.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{
    cross_term_at, gradient_pairing, laplacian_into, same_graph, Accumulator,
    Field, Region, Summation,
};
use crate::error::{Error, Result};
use crate::lattice::{DomainSpec, LatticeGraph};
use crate::model::{log_force, log_term, potential_eval, ModelParams, PotentialSpec};

/// Which functional a [`Problem`] evaluates.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    /// `J_λ` on the truncation, fields vanishing on the halo.
    WholeLattice { potential: PotentialSpec },
    /// `J_Ω`, fields vanishing outside `Ω`.
    Domain { domain: DomainSpec },
}

/// A fully specified energy: graph, coefficients and admissible set.
#[derive(Debug, Clone)]
pub struct Problem {
    graph: Arc<LatticeGraph>,
    params: ModelParams,
    kind: ProblemKind,
    summation: Summation,
    free: Vec<bool>,
    free_indices: Vec<usize>,
    grad_mask: Option<Vec<bool>>,
    /// `h_λ = λh + 1` on free vertices, 0 elsewhere.
    weight: Vec<f64>,
    /// Raw `h` on free vertices, 0 elsewhere.
    potential: Vec<f64>,
}

impl Problem {
    pub fn whole_lattice(
        graph: Arc<LatticeGraph>,
        params: ModelParams,
        potential: PotentialSpec,
    ) -> Result<Self> {
        params.validate()?;
        let free: Vec<bool> = graph.interior_mask().to_vec();
        let h: Vec<f64> = graph
            .vertices()
            .iter()
            .zip(&free)
            .map(|(v, f)| if *f { potential_eval(&potential, *v) } else { 0.0 })
            .collect();
        let weight = h
            .iter()
            .zip(&free)
            .map(|(h, f)| if *f { params.lambda * h + 1.0 } else { 0.0 })
            .collect();
        Ok(Self::assemble(
            graph,
            params,
            ProblemKind::WholeLattice { potential },
            free,
            None,
            weight,
            h,
        ))
    }

    /// The limit problem on `Ω`. The graph must store `Ω ∪ ∂Ω`.
    pub fn domain(graph: Arc<LatticeGraph>, params: ModelParams, domain: DomainSpec) -> Result<Self> {
        params.validate()?;
        let free = graph.mask_of(domain.omega())?;
        let boundary = graph.mask_of(domain.boundary()).map_err(|_| {
            Error::InvalidDomain("vertex boundary of the well falls outside the truncation".into())
        })?;
        if free.iter().zip(graph.interior_mask()).any(|(f, i)| *f && !*i) {
            return Err(Error::InvalidDomain(
                "well must lie in the interior of the truncation".into(),
            ));
        }
        let grad_mask: Vec<bool> = free.iter().zip(&boundary).map(|(a, b)| *a || *b).collect();
        let weight = free.iter().map(|f| if *f { 1.0 } else { 0.0 }).collect();
        let h = vec![0.0; graph.len()];
        Ok(Self::assemble(
            graph,
            params,
            ProblemKind::Domain { domain },
            free,
            Some(grad_mask),
            weight,
            h,
        ))
    }

    fn assemble(
        graph: Arc<LatticeGraph>,
        params: ModelParams,
        kind: ProblemKind,
        free: Vec<bool>,
        grad_mask: Option<Vec<bool>>,
        weight: Vec<f64>,
        potential: Vec<f64>,
    ) -> Self {
        let free_indices = free
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.then_some(i))
            .collect();
        Problem {
            graph,
            params,
            kind,
            summation: Summation::Plain,
            free,
            free_indices,
            grad_mask,
            weight,
            potential,
        }
    }

    pub fn with_summation(mut self, summation: Summation) -> Self {
        self.summation = summation;
        self
    }

    pub fn graph(&self) -> &Arc<LatticeGraph> {
        &self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn summation(&self) -> Summation {
        self.summation
    }

    pub fn is_domain(&self) -> bool {
        matches!(self.kind, ProblemKind::Domain { .. })
    }

    /// The potential well `Ω` (from the potential or the domain).
    pub fn well(&self) -> &DomainSpec {
        match &self.kind {
            ProblemKind::WholeLattice { potential } => &potential.omega,
            ProblemKind::Domain { domain } => domain,
        }
    }

    /// Vertices where admissible fields may be nonzero.
    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free_indices
    }

    /// `h_λ` on free vertices.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.potential
    }

    /// Region of the gradient sums: every stored vertex, or `Ω ∪ ∂Ω`.
    pub fn grad_region(&self) -> Region<'_> {
        match &self.grad_mask {
            Some(m) => Region::Mask(m),
            None => Region::All,
        }
    }

    pub fn mass_region(&self) -> Region<'_> {
        Region::Mask(&self.free)
    }

    pub fn zero_field(&self) -> Field {
        Field::zeros(&self.graph)
    }

    /// Errors if `u` lives on another graph or is nonzero off the free set.
    pub fn check_admissible(&self, u: &Field) -> Result<()> {
        if !(Arc::ptr_eq(u.graph(), &self.graph) || **u.graph() == *self.graph) {
            return Err(Error::Shape("field lives on a different graph".into()));
        }
        let mut bad = (0..u.len()).filter(|&i| !self.free[i] && u[i] != 0.0);
        if let Some(first) = bad.next() {
            return Err(Error::ConstraintViolation {
                count: 1 + bad.count(),
                first: self.graph.vertex(first).to_string(),
            });
        }
        if !u.is_all_finite() {
            return Err(Error::InvalidInput("field has non-finite values".into()));
        }
        Ok(())
    }

    /// Zero `u` off the free set.
    pub fn restrict(&self, u: &Field) -> Field {
        let mut out = u.clone();
        for (i, x) in out.values_mut().iter_mut().enumerate() {
            if !self.free[i] {
                *x = 0.0;
            }
        }
        out
    }

    // ---- slice kernels --------------------------------------------------

    pub(crate) fn gradient_energy_raw(&self, u: &[f64]) -> f64 {
        gradient_pairing(&self.graph, u, u, self.grad_region(), self.summation)
    }

    pub(crate) fn breakdown_raw(&self, u: &[f64]) -> EnergyBreakdown {
        let p = self.params.p;
        let e = self.gradient_energy_raw(u);
        let mut mass = Accumulator::new(self.summation);
        let mut pm = Accumulator::new(self.summation);
        let mut lg = Accumulator::new(self.summation);
        for &i in &self.free_indices {
            let x = u[i];
            mass.add(self.weight[i] * x * x);
            pm.add(x.abs().powf(p));
            lg.add(log_term(x, p));
        }
        EnergyBreakdown::new(
            0.5 * (self.params.a * e + mass.value()),
            0.25 * self.params.b * e * e,
            2.0 / (p * p) * pm.value(),
            -lg.value() / p,
        )
    }

    /// Euler–Lagrange residual on free vertices; returns `∫|∇u|²`.
    pub(crate) fn residual_into(&self, u: &[f64], lap: &mut [f64], out: &mut [f64]) -> f64 {
        let e = self.gradient_energy_raw(u);
        laplacian_into(&self.graph, u, lap);
        let coef = self.params.a + self.params.b * e;
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in &self.free_indices {
            out[i] = -coef * lap[i] + self.weight[i] * u[i] - log_force(u[i], self.params.p);
        }
        e
    }

    pub(crate) fn sign_scalars_raw(&self, u: &[f64]) -> SignScalars {
        let g = &*self.graph;
        let region = self.grad_region();
        let p = self.params.p;
        let mode = self.summation;
        let (mut ga, mut gb, mut k) = (
            Accumulator::new(mode),
            Accumulator::new(mode),
            Accumulator::new(mode),
        );
        for i in 0..g.len() {
            if !region.contains(i) {
                continue;
            }
            let ui = u[i];
            let (pi, mi) = (ui.max(0.0), ui.min(0.0));
            let (mut sa, mut sb) = (0.0, 0.0);
            for &j in g.neighbors(i) {
                let uj = u[j];
                let dp = uj.max(0.0) - pi;
                let dm = uj.min(0.0) - mi;
                sa += dp * dp;
                sb += dm * dm;
            }
            ga.add(0.5 * sa);
            gb.add(0.5 * sb);
            k.add(cross_term_at(g, u, i));
        }
        let mut mass = [Accumulator::new(mode), Accumulator::new(mode)];
        let mut pw = [Accumulator::new(mode), Accumulator::new(mode)];
        let mut lg = [Accumulator::new(mode), Accumulator::new(mode)];
        for &i in &self.free_indices {
            let x = u[i];
            if x == 0.0 {
                continue;
            }
            let side = usize::from(x < 0.0);
            mass[side].add(self.weight[i] * x * x);
            pw[side].add(x.abs().powf(p));
            lg[side].add(log_term(x, p));
        }
        let a = self.params.a;
        let (ga, gb) = (ga.value(), gb.value());
        SignScalars {
            params: self.params,
            grad_plus: ga,
            grad_minus: gb,
            cross: k.value(),
            norm_plus: a * ga + mass[0].value(),
            norm_minus: a * gb + mass[1].value(),
            pow_plus: pw[0].value(),
            pow_minus: pw[1].value(),
            log_plus: lg[0].value(),
            log_minus: lg[1].value(),
        }
    }

    // ---- checked public API --------------------------------------------

    /// `‖u‖²_{H_λ}` (resp. the `H¹₀(Ω)` norm for the domain problem).
    pub fn h_norm_sq(&self, u: &Field) -> Result<f64> {
        self.check_admissible(u)?;
        let e = self.gradient_energy_raw(u.values());
        let mass: f64 = self
            .free_indices
            .iter()
            .map(|&i| self.weight[i] * u[i] * u[i])
            .sum();
        Ok(self.params.a * e + mass)
    }

    /// `∫|∇u|²` over the problem's gradient region.
    pub fn gradient_energy(&self, u: &Field) -> Result<f64> {
        self.check_admissible(u)?;
        Ok(self.gradient_energy_raw(u.values()))
    }

    /// `λ Σ h(x) u(x)²`.
    pub fn potential_mass(&self, u: &Field) -> Result<f64> {
        self.check_admissible(u)?;
        Ok(self.params.lambda
            * self
                .free_indices
                .iter()
                .map(|&i| self.potential[i] * u[i] * u[i])
                .sum::<f64>())
    }

    pub fn sign_scalars(&self, u: &Field) -> Result<SignScalars> {
        self.check_admissible(u)?;
        Ok(self.sign_scalars_raw(u.values()))
    }
}

/// `‖u‖²_{H_λ} = a Σ|∇u|² + Σ h_λ u²` for the problem's coefficients.
pub fn h_lambda_norm_sq(u: &Field, problem: &Problem) -> Result<f64> {
    problem.h_norm_sq(u)
}

/// The four terms of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `½‖u‖²`.
    pub quadratic: f64,
    /// `(b/4)(∫|∇u|²)²`.
    pub kirchhoff: f64,
    /// `(2/p²)∫|u|^p`.
    pub p_mass: f64,
    /// `−(1/p)∫|u|^p log u²`.
    pub log_part: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(quadratic: f64, kirchhoff: f64, p_mass: f64, log_part: f64) -> Self {
        EnergyBreakdown {
            quadratic,
            kirchhoff,
            p_mass,
            log_part,
            total: quadratic + kirchhoff + p_mass + log_part,
        }
    }
}

pub fn energy(u: &Field, problem: &Problem) -> Result<EnergyBreakdown> {
    problem.check_admissible(u)?;
    Ok(problem.breakdown_raw(u.values()))
}

/// `(J'(u), φ)`.
pub fn pairing(u: &Field, phi: &Field, problem: &Problem) -> Result<f64> {
    problem.check_admissible(u)?;
    problem.check_admissible(phi)?;
    same_graph(u, phi)?;
    let g = &**problem.graph();
    let (uv, pv) = (u.values(), phi.values());
    let region = problem.grad_region();
    let e = problem.gradient_energy_raw(uv);
    let cross = gradient_pairing(g, uv, pv, region, problem.summation());
    let mut rest = Accumulator::new(problem.summation());
    for &i in problem.free_indices() {
        rest.add(problem.weight()[i] * uv[i] * pv[i] - log_force(uv[i], problem.params().p) * pv[i]);
    }
    let ModelParams { a, b, .. } = *problem.params();
    Ok((a + b * e) * cross + rest.value())
}

/// `r(x) = −(a + b∫|∇u|²)Δu(x) + h_λ(x)u(x) − |u|^{p−2}u log u²` on free
/// vertices, zero elsewhere. `r ≡ 0` exactly at solutions.
pub fn euler_lagrange_residual(u: &Field, problem: &Problem) -> Result<Field> {
    problem.check_admissible(u)?;
    let n = u.len();
    let (mut lap, mut out) = (vec![0.0; n], vec![0.0; n]);
    problem.residual_into(u.values(), &mut lap, &mut out);
    Field::from_values(problem.graph(), out)
}

/// `((J'(u), u⁺), (J'(u), u⁻))` computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NehariResiduals {
    /// From the closed form in the sign-part scalars.
    pub plus: f64,
    pub minus: f64,
    /// From the direct pairing against the assembled sign parts.
    pub plus_direct: f64,
    pub minus_direct: f64,
    /// `u⁺ ≡ 0` or `u⁻ ≡ 0`.
    pub one_signed: bool,
}

impl NehariResiduals {
    pub fn max_abs(&self) -> f64 {
        self.plus.abs().max(self.minus.abs())
    }
}

pub fn nehari_residuals(u: &Field, problem: &Problem) -> Result<NehariResiduals> {
    let sc = problem.sign_scalars(u)?;
    let (plus, minus) = sc.nehari_pair();
    let (up, um) = crate::calculus::split_signs(u);
    Ok(NehariResiduals {
        plus,
        minus,
        plus_direct: pairing(u, &up, problem)?,
        minus_direct: pairing(u, &um, problem)?,
        one_signed: !(u.has_positive_part() && u.has_negative_part()),
    })
}

/// Values at `w = su⁺ + tu⁻` obtained from the closed-form expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitValues {
    /// `J(w)`.
    pub energy: f64,
    /// `(J'(w), su⁺)`.
    pub g1: f64,
    /// `(J'(w), tu⁻)`.
    pub g2: f64,
}

pub fn split_expansion(u: &Field, s: f64, t: f64, problem: &Problem) -> Result<SplitValues> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scalings must be positive, got s={s}, t={t}"
        )));
    }
    let sc = problem.sign_scalars(u)?;
    Ok(SplitValues {
        energy: sc.energy(s, t),
        g1: sc.g1(s, t),
        g2: sc.g2(s, t),
    })
}

/// `(½ − 1/p)‖u‖² + (¼ − 1/p) b (∫|∇u|²)² + (2/p²)∫|u|^p`, which equals
/// `J(u) − (1/p)(J'(u), u)`.
pub fn level_identity(u: &Field, problem: &Problem) -> Result<f64> {
    let sc = problem.sign_scalars(u)?;
    Ok(sc.level_identity())
}

/// `f(x) = 2(1 − x^p) + p x^p log x²`, positive on `(0,1) ∪ (1,∞)`.
pub fn power_log_gap(x: f64, p: f64) -> f64 {
    let xp = x.powf(p);
    2.0 * (1.0 - xp) + p * xp * 2.0 * x.ln()
}

/// Scalars of `u⁺`, `u⁻` that determine `J(su⁺ + tu⁻)` and its derivatives
/// in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignScalars {
    pub params: ModelParams,
    /// `‖∇u⁺‖²₂`.
    pub grad_plus: f64,
    /// `‖∇u⁻‖²₂`.
    pub grad_minus: f64,
    /// `K(u)`.
    pub cross: f64,
    /// `‖u⁺‖²_{H}`.
    pub norm_plus: f64,
    pub norm_minus: f64,
    /// `∫|u^±|^p`.
    pub pow_plus: f64,
    pub pow_minus: f64,
    /// `∫|u^±|^p log (u^±)²`.
    pub log_plus: f64,
    pub log_minus: f64,
}

impl SignScalars {
    pub fn both_signs(&self) -> bool {
        self.pow_plus > 0.0 && self.pow_minus > 0.0
    }

    /// `∫|∇u|² = ‖∇u⁺‖² + ‖∇u⁻‖² − K`.
    pub fn gradient_energy(&self) -> f64 {
        self.grad_plus + self.grad_minus - self.cross
    }

    /// `‖u‖²_H = ‖u⁺‖² + ‖u⁻‖² − aK`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_plus + self.norm_minus - self.params.a * self.cross
    }

    fn single(&self, s: f64, norm: f64, grad: f64, pow: f64, log: f64) -> f64 {
        let ModelParams { b, p, .. } = self.params;
        let sp = s.powf(p);
        0.5 * s * s * norm + 0.25 * b * s.powi(4) * grad * grad + 2.0 / (p * p) * sp * pow
            - sp * (log + 2.0 * s.ln() * pow) / p
    }

    /// `J(su⁺ + tu⁻)`.
    pub fn energy(&self, s: f64, t: f64) -> f64 {
        let ModelParams { a, b, .. } = self.params;
        let (ga, gb, k) = (self.grad_plus, self.grad_minus, self.cross);
        let (s2a, t2b) = (s * s * ga, t * t * gb);
        let st = s * t;
        self.single(s, self.norm_plus, ga, self.pow_plus, self.log_plus)
            + self.single(t, self.norm_minus, gb, self.pow_minus, self.log_minus)
            - 0.5 * a * st * k
            + 0.25 * b * st * st * k * k
            + 0.5 * b * s2a * t2b
            - 0.5 * b * st * k * (s2a + t2b)
    }

    fn coupling(&self, s: f64, t: f64) -> f64 {
        let ModelParams { a, b, .. } = self.params;
        let (ga, gb, k) = (self.grad_plus, self.grad_minus, self.cross);
        let st = s * t;
        -0.5 * a * st * k + 0.5 * b * st * st * k * k + b * st * st * ga * gb
            - 0.5 * b * st * k * (s * s * ga + t * t * gb)
    }

    fn own(&self, s: f64, norm: f64, grad: f64, pow: f64, log: f64) -> f64 {
        let ModelParams { b, p, .. } = self.params;
        s * s * norm + b * s.powi(4) * grad * grad - s.powf(p) * (log + 2.0 * s.ln() * pow)
    }

    /// `g₁(s,t) = (J'(su⁺ + tu⁻), su⁺)`.
    pub fn g1(&self, s: f64, t: f64) -> f64 {
        let b = self.params.b;
        self.own(s, self.norm_plus, self.grad_plus, self.pow_plus, self.log_plus)
            + self.coupling(s, t)
            - b * s.powi(3) * t * self.cross * self.grad_plus
    }

    /// `g₂(s,t) = (J'(su⁺ + tu⁻), tu⁻)`.
    pub fn g2(&self, s: f64, t: f64) -> f64 {
        let b = self.params.b;
        self.own(t, self.norm_minus, self.grad_minus, self.pow_minus, self.log_minus)
            + self.coupling(s, t)
            - b * s * t.powi(3) * self.cross * self.grad_minus
    }

    fn own_derivative(&self, s: f64, norm: f64, grad: f64, pow: f64, log: f64) -> f64 {
        let ModelParams { b, p, .. } = self.params;
        let sp1 = s.powf(p - 1.0);
        2.0 * s * norm + 4.0 * b * s.powi(3) * grad * grad
            - p * sp1 * (log + 2.0 * s.ln() * pow)
            - 2.0 * sp1 * pow
    }

    /// `[[∂g₁/∂s, ∂g₁/∂t], [∂g₂/∂s, ∂g₂/∂t]]`.
    pub fn jacobian(&self, s: f64, t: f64) -> [[f64; 2]; 2] {
        let ModelParams { a, b, .. } = self.params;
        let (ga, gb, k) = (self.grad_plus, self.grad_minus, self.cross);
        let (s2, t2) = (s * s, t * t);
        // Derivatives of the shared coupling term.
        let cs = -0.5 * a * t * k + b * s * t2 * k * k + 2.0 * b * s * t2 * ga * gb
            - 0.5 * b * k * (3.0 * s2 * t * ga + t2 * t * gb);
        let ct = -0.5 * a * s * k + b * s2 * t * k * k + 2.0 * b * s2 * t * ga * gb
            - 0.5 * b * k * (s2 * s * ga + 3.0 * s * t2 * gb);
        let d11 = self.own_derivative(s, self.norm_plus, ga, self.pow_plus, self.log_plus) + cs
            - 3.0 * b * s2 * t * k * ga;
        let d12 = ct - b * s2 * s * k * ga;
        let d21 = cs - b * t2 * t * k * gb;
        let d22 = self.own_derivative(t, self.norm_minus, gb, self.pow_minus, self.log_minus) + ct
            - 3.0 * b * s * t2 * k * gb;
        [[d11, d12], [d21, d22]]
    }

    /// `((J'(u), u⁺), (J'(u), u⁻))` from the closed form
    /// `‖u^±‖² + b‖∇u‖²(‖∇u^±‖² − K/2) − (a/2)K − ∫|u^±|^p log (u^±)²`.
    pub fn nehari_pair(&self) -> (f64, f64) {
        let ModelParams { a, b, .. } = self.params;
        let e = self.gradient_energy();
        let k = self.cross;
        (
            self.norm_plus + b * e * (self.grad_plus - 0.5 * k) - 0.5 * a * k - self.log_plus,
            self.norm_minus + b * e * (self.grad_minus - 0.5 * k) - 0.5 * a * k - self.log_minus,
        )
    }

    fn whole(&self) -> (f64, f64, f64, f64) {
        (
            self.norm_sq(),
            self.gradient_energy(),
            self.pow_plus + self.pow_minus,
            self.log_plus + self.log_minus,
        )
    }

    /// `J(su)`.
    pub fn radial_energy(&self, s: f64) -> f64 {
        let (h, e, pw, lg) = self.whole();
        self.single(s, h, e, pw, lg)
    }

    /// `(J'(su), su)`.
    pub fn radial_residual(&self, s: f64) -> f64 {
        let (h, e, pw, lg) = self.whole();
        self.own(s, h, e, pw, lg)
    }

    /// `d/ds (J'(su), su)`.
    pub fn radial_residual_derivative(&self, s: f64) -> f64 {
        let (h, e, pw, lg) = self.whole();
        self.own_derivative(s, h, e, pw, lg)
    }

    pub fn level_identity(&self) -> f64 {
        let ModelParams { b, p, .. } = self.params;
        let e = self.gradient_energy();
        (0.5 - 1.0 / p) * self.norm_sq()
            + (0.25 - 1.0 / p) * b * e * e
            + 2.0 / (p * p) * (self.pow_plus + self.pow_minus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_box, Vertex};

    fn dipole_problem() -> (Problem, Field) {
        let g = Arc::new(build_box(3));
        let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0).unwrap();
        let pb = Problem::domain(g.clone(), params, DomainSpec::ball(1)).unwrap();
        let mut u = Field::zeros(&g);
        u[g.index_of(Vertex::ORIGIN).unwrap()] = 1.0;
        u[g.index_of(Vertex::unit(0)).unwrap()] = -1.0;
        (pb, u)
    }

    #[test]
    fn zero_field() {
        let (pb, _) = dipole_problem();
        let z = pb.zero_field();
        let e = energy(&z, &pb).unwrap();
        assert_eq!((e.quadratic, e.kirchhoff, e.p_mass, e.log_part, e.total), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(level_identity(&z, &pb).unwrap(), 0.0);
        assert!(euler_lagrange_residual(&z, &pb).unwrap().values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn dipole_energy_terms() {
        let (pb, u) = dipole_problem();
        let e = energy(&u, &pb).unwrap();
        assert_eq!(e.quadratic, 8.0);
        assert_eq!(e.kirchhoff, 49.0);
        assert!((e.p_mass - 4.0 / 49.0).abs() < 1e-15);
        assert_eq!(e.log_part, 0.0);
        assert!((e.total - (57.0 + 4.0 / 49.0)).abs() < 1e-12);
    }

    #[test]
    fn dipole_nehari_residuals() {
        let (pb, u) = dipole_problem();
        let r = nehari_residuals(&u, &pb).unwrap();
        assert_eq!((r.plus, r.minus), (106.0, 106.0));
        assert_eq!((r.plus_direct, r.minus_direct), (106.0, 106.0));
        assert!(!r.one_signed);
    }

    #[test]
    fn one_signed_flag() {
        let (pb, u) = dipole_problem();
        let (up, _) = crate::calculus::split_signs(&u);
        let r = nehari_residuals(&up, &pb).unwrap();
        assert!(r.one_signed);
        assert_eq!(r.minus, 0.0);
    }

    #[test]
    fn forbidden_support_rejected() {
        let (pb, u) = dipole_problem();
        let mut v = u.clone();
        let i = pb.graph().index_of(Vertex::new(2, 0, 0)).unwrap();
        v[i] = 0.5;
        assert!(matches!(energy(&v, &pb), Err(Error::ConstraintViolation { count: 1, .. })));
    }

    #[test]
    fn scaled_spike_terms() {
        let g = Arc::new(build_box(3));
        let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0).unwrap();
        let pb = Problem::domain(g.clone(), params, DomainSpec::ball(1)).unwrap();
        let u = Field::delta(&g, Vertex::ORIGIN).unwrap().scaled(2.0);
        let e = energy(&u, &pb).unwrap();
        let p = 7.0f64;
        assert_eq!(e.quadratic, 0.5 * (24.0 + 4.0));
        assert_eq!(e.kirchhoff, 0.25 * 24.0 * 24.0);
        assert!((e.p_mass - 2.0 / (p * p) * 2f64.powf(p)).abs() < 1e-12);
        assert!((e.log_part + 2f64.powf(p) * 4f64.ln() / p).abs() < 1e-12);
    }

    #[test]
    fn power_log_gap_values() {
        assert!(power_log_gap(1.0, 7.0).abs() < 1e-12);
        assert!(power_log_gap(0.5, 7.0) > 0.0);
        assert!(power_log_gap(2.0, 7.0) > 0.0);
    }

    #[test]
    fn split_at_unit_recombines() {
        let (pb, u) = dipole_problem();
        let sv = split_expansion(&u, 1.0, 1.0, &pb).unwrap();
        assert!((sv.energy - energy(&u, &pb).unwrap().total).abs() < 1e-12);
        assert!((sv.g1 - 106.0).abs() < 1e-12);
    }
}
