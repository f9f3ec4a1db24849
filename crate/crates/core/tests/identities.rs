//! Algebraic identities of the discrete calculus and the energy, checked on
//! random fields.

mod common;

use common::{domain_problem, lattice_problem, oracle_energy, oracle_gradient_inner, oracle_pairing, rel};
use logkirchhoff::calculus::{
    cross_term, dirichlet_energy, gradient_form, lp_norm, split_signs, Exponent, Field, Region,
};
use logkirchhoff::energy::{energy, level_identity, nehari_residuals, pairing, split_expansion, Problem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(kind: u8, r: u64) -> Problem {
    if kind == 0 {
        lattice_problem(r, 10.0)
    } else {
        domain_problem(r)
    }
}

fn field(pb: &Problem, seed: u64, amp: f64) -> Field {
    common::random_field(pb, &mut ChaCha8Rng::seed_from_u64(seed), amp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sign_part_gradient_expansion(seed in any::<u64>(), r in 2u64..5, s in 0.01f64..3.0, t in 0.01f64..3.0) {
        let pb = lattice_problem(r, 1.0);
        let u = field(&pb, seed, 1.0);
        let (up, um) = split_signs(&u);
        let dp = dirichlet_energy(&up, Region::All);
        let dm = dirichlet_energy(&um, Region::All);
        let k = cross_term(&u, Region::All);
        prop_assert!(k <= 0.0);
        let w = u.recombine(s, t);
        let lhs = dirichlet_energy(&w, Region::All);
        let rhs = s * s * dp + t * t * dm - s * t * k;
        prop_assert!(rel(lhs, rhs, s * s * dp + t * t * dm + s * t * k.abs()) < 1e-12);

        let sum = |f: Field| f.values().iter().sum::<f64>();
        let gp = sum(gradient_form(&w, &up.scaled(s)).unwrap());
        let gm = sum(gradient_form(&w, &um.scaled(t)).unwrap());
        prop_assert!(rel(gp, s * s * dp - 0.5 * s * t * k, s * s * dp + s * t * k.abs()) < 1e-12);
        prop_assert!(rel(gm, t * t * dm - 0.5 * s * t * k, t * t * dm + s * t * k.abs()) < 1e-12);
    }

    #[test]
    fn split_signs_reconstructs_exactly(seed in any::<u64>()) {
        let pb = lattice_problem(3, 1.0);
        let u = field(&pb, seed, 5.0);
        let (up, um) = split_signs(&u);
        for i in 0..u.len() {
            prop_assert_eq!((up[i] + um[i]).to_bits(), u[i].to_bits());
            prop_assert!(up[i] >= 0.0 && um[i] <= 0.0);
        }
    }

    #[test]
    fn norm_chain(seed in any::<u64>(), p in 2.0f64..6.0, dq in 0.0f64..6.0) {
        let pb = lattice_problem(3, 1.0);
        let u = field(&pb, seed, 3.0);
        let q = p + dq;
        let inf = lp_norm(&u, Exponent::Infinity, Region::All).unwrap();
        let nq = lp_norm(&u, Exponent::Finite(q), Region::All).unwrap();
        let np = lp_norm(&u, Exponent::Finite(p), Region::All).unwrap();
        let n2 = lp_norm(&u, Exponent::Finite(2.0), Region::All).unwrap();
        let slack = 1.0 + 1e-14;
        prop_assert!(inf <= nq * slack && nq <= np * slack && np <= n2 * slack);
    }

    #[test]
    fn energy_matches_edge_oracle(seed in any::<u64>(), kind in 0u8..2, r in 3u64..5, amp in 0.05f64..2.0) {
        let pb = problem(kind, r);
        let u = field(&pb, seed, amp);
        let e = energy(&u, &pb).unwrap();
        let o = oracle_energy(&pb, u.values());
        let terms = e.quadratic.abs() + e.kirchhoff.abs() + e.p_mass.abs() + e.log_part.abs();
        prop_assert!(rel(e.total, o, terms) < 1e-12);
        prop_assert!(rel(e.total, e.quadratic + e.kirchhoff + e.p_mass + e.log_part, terms) < 1e-15);
        let g = oracle_gradient_inner(&pb, u.values(), u.values());
        prop_assert!(rel(pb.gradient_energy(&u).unwrap(), g, g) < 1e-12);
    }

    #[test]
    fn pairing_splits_over_sign_parts(seed in any::<u64>(), kind in 0u8..2, amp in 0.05f64..2.0) {
        let pb = problem(kind, 4);
        let u = field(&pb, seed, amp);
        let (up, um) = split_signs(&u);
        let a = pairing(&u, &up, &pb).unwrap();
        let b = pairing(&u, &um, &pb).unwrap();
        let whole = pairing(&u, &u, &pb).unwrap();
        prop_assert!(rel(whole, a + b, a.abs() + b.abs()) < 1e-12);
        let o = oracle_pairing(&pb, u.values(), up.values());
        prop_assert!(rel(a, o, a.abs()) < 1e-11);
        let nr = nehari_residuals(&u, &pb).unwrap();
        prop_assert!(rel(nr.plus, nr.plus_direct, nr.plus.abs()) < 1e-11);
        prop_assert!(rel(nr.minus, nr.minus_direct, nr.minus.abs()) < 1e-11);
    }

    #[test]
    fn split_expansion_matches_assembled_field(seed in any::<u64>(), kind in 0u8..2, s in 0.01f64..3.0, t in 0.01f64..3.0) {
        let pb = problem(kind, 3);
        let u = field(&pb, seed, 1.0);
        let sv = split_expansion(&u, s, t, &pb).unwrap();
        let w = u.recombine(s, t);
        let (wp, wm) = split_signs(&w);
        let e = energy(&w, &pb).unwrap();
        let scale = e.quadratic.abs() + e.kirchhoff.abs() + e.p_mass.abs() + e.log_part.abs();
        prop_assert!(rel(sv.energy, e.total, scale) < 1e-12);
        let g1 = pairing(&w, &wp, &pb).unwrap();
        let g2 = pairing(&w, &wm, &pb).unwrap();
        prop_assert!(rel(sv.g1, g1, scale) < 1e-12);
        prop_assert!(rel(sv.g2, g2, scale) < 1e-12);
    }

    #[test]
    fn level_identity_two_routes(seed in any::<u64>(), kind in 0u8..2, amp in 0.05f64..2.0) {
        let pb = problem(kind, 3);
        let u = field(&pb, seed, amp);
        let p = pb.params().p;
        let e = energy(&u, &pb).unwrap();
        let direct = e.total - pairing(&u, &u, &pb).unwrap() / p;
        let li = level_identity(&u, &pb).unwrap();
        let scale = e.quadratic.abs() + e.kirchhoff.abs() + e.p_mass.abs() + e.log_part.abs();
        prop_assert!(rel(li, direct, scale) < 1e-12);
    }

    #[test]
    fn residual_is_pairing_with_delta(seed in any::<u64>(), kind in 0u8..2) {
        let pb = problem(kind, 3);
        let u = field(&pb, seed, 1.0);
        let r = logkirchhoff::energy::euler_lagrange_residual(&u, &pb).unwrap();
        let scale = r.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for &i in pb.free_indices() {
            let d = Field::delta(pb.graph(), pb.graph().vertex(i)).unwrap();
            let pv = pairing(&u, &d, &pb).unwrap();
            prop_assert!(rel(r[i], pv, scale) < 1e-12);
        }
    }

    #[test]
    fn one_signed_expansion_has_no_cross_term(seed in any::<u64>(), s in 0.1f64..3.0, t in 0.1f64..3.0) {
        let pb = lattice_problem(3, 1.0);
        let u = field(&pb, seed, 1.0).map(f64::abs);
        prop_assert_eq!(cross_term(&u, Region::All), 0.0);
        let sv = split_expansion(&u, s, t, &pb).unwrap();
        let e = energy(&u.scaled(s), &pb).unwrap().total;
        prop_assert!(rel(sv.energy, e, e.abs()) < 1e-12);
    }
}

#[test]
fn cross_term_nonpositive_many_fields() {
    let pb = lattice_problem(2, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let u = common::random_field(&pb, &mut rng, 1.0);
        assert!(cross_term(&u, Region::All) <= 0.0);
    }
}

#[test]
fn hand_values_for_scaled_spike() {
    let pb = lattice_problem(3, 1.0);
    let u = Field::delta(pb.graph(), logkirchhoff::lattice::Vertex::new(0, 0, 0)).unwrap().scaled(2.0);
    let e = energy(&u, &pb).unwrap();
    let p: f64 = 7.0;
    assert_eq!(dirichlet_energy(&u, Region::All), 24.0);
    assert!(rel(e.quadratic, 0.5 * (24.0 + 4.0), 1.0) < 1e-15);
    assert!(rel(e.kirchhoff, 0.25 * 24.0 * 24.0, 1.0) < 1e-15);
    assert!(rel(e.p_mass, 2.0 / (p * p) * 2f64.powf(p), 1.0) < 1e-15);
    assert!(rel(e.log_part, -2f64.powf(p) * 4f64.ln() / p, 1.0) < 1e-15);
}

#[test]
fn h_norm_spike_values() {
    let pb = lattice_problem(3, 10.0);
    let d0 = Field::delta(pb.graph(), logkirchhoff::lattice::Vertex::new(0, 0, 0)).unwrap();
    assert_eq!(pb.h_norm_sq(&d0).unwrap(), 7.0);
    let dx = Field::delta(pb.graph(), logkirchhoff::lattice::Vertex::new(2, 0, 0)).unwrap();
    assert_eq!(pb.h_norm_sq(&dx).unwrap(), 17.0);
}
