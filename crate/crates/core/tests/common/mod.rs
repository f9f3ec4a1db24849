//! Shared fixtures and independent reference evaluations for the
//! integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use logkirchhoff::calculus::Field;
use logkirchhoff::energy::Problem;
use logkirchhoff::lattice::{build_box, DomainSpec};
use logkirchhoff::model::{ModelParams, PotentialSpec};
use rand::Rng;

pub fn params(lambda: f64) -> ModelParams {
    ModelParams::new(1.0, 1.0, 7.0, lambda, 8.0).unwrap()
}

/// Whole-lattice problem on the ℓ¹ ball of radius `r` with a step well on
/// `B_1`.
pub fn lattice_problem(r: u64, lambda: f64) -> Problem {
    let g = Arc::new(build_box(r));
    let pot = PotentialSpec::step_well(1.0, DomainSpec::ball(1)).unwrap();
    Problem::whole_lattice(g, params(lambda), pot).unwrap()
}

/// Dirichlet problem on `B_{r-2}` inside the ball of radius `r`.
pub fn domain_problem(r: u64) -> Problem {
    let g = Arc::new(build_box(r));
    Problem::domain(g, params(1.0), DomainSpec::ball(r - 2)).unwrap()
}

/// Admissible field with entries uniform in `[-amp, amp]` that changes sign.
pub fn random_field(pb: &Problem, rng: &mut impl Rng, amp: f64) -> Field {
    loop {
        let mut v = vec![0.0; pb.graph().len()];
        for &i in pb.free_indices() {
            v[i] = rng.gen_range(-amp..amp);
        }
        let f = Field::from_values(pb.graph(), v).unwrap();
        if f.has_positive_part() && f.has_negative_part() {
            return f;
        }
    }
}

/// `|a − b| / max(|a|, |b|, scale)`.
pub fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(scale).max(f64::MIN_POSITIVE)
}

fn in_grad_region(pb: &Problem, i: usize) -> bool {
    pb.grad_region().contains(i)
}

/// `Σ_{x∈region} ½Σ_{y~x}(u(y)−u(x))(v(y)−v(x))` assembled edge by edge.
pub fn oracle_gradient_inner(pb: &Problem, u: &[f64], v: &[f64]) -> f64 {
    let g = pb.graph();
    let mut acc = 0.0;
    for (i, j) in g.edges() {
        let w = 0.5 * (in_grad_region(pb, i) as u8 as f64 + in_grad_region(pb, j) as u8 as f64);
        acc += w * (u[j] - u[i]) * (v[j] - v[i]);
    }
    acc
}

fn plog(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p) * (x * x).ln()
    }
}

/// `J(u)` from the edge list and the pointwise definitions.
pub fn oracle_energy(pb: &Problem, u: &[f64]) -> f64 {
    let prm = pb.params();
    let grad = oracle_gradient_inner(pb, u, u);
    let mass: f64 = pb.free_indices().iter().map(|&i| pb.weight()[i] * u[i] * u[i]).sum();
    let pm: f64 = u.iter().map(|x| x.abs().powf(prm.p)).sum();
    let lg: f64 = u.iter().map(|x| plog(*x, prm.p)).sum();
    0.5 * (prm.a * grad + mass) + 0.25 * prm.b * grad * grad + 2.0 / (prm.p * prm.p) * pm - lg / prm.p
}

/// `(J'(u), φ)` from the same ingredients.
pub fn oracle_pairing(pb: &Problem, u: &[f64], phi: &[f64]) -> f64 {
    let prm = pb.params();
    let grad = oracle_gradient_inner(pb, u, u);
    let cross = oracle_gradient_inner(pb, u, phi);
    let mass: f64 = pb.free_indices().iter().map(|&i| pb.weight()[i] * u[i] * phi[i]).sum();
    let nl: f64 = u
        .iter()
        .zip(phi)
        .map(|(x, f)| if *x == 0.0 { 0.0 } else { x.abs().powf(prm.p - 2.0) * x * f * (x * x).ln() })
        .sum();
    prm.a * cross + mass + prm.b * grad * cross - nl
}
