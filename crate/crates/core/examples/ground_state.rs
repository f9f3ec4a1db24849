//! Ground state on the Nehari manifold for a single λ.

use std::sync::Arc;

use logkirchhoff::energy::Problem;
use logkirchhoff::lattice::{build_box, DomainSpec};
use logkirchhoff::model::{ModelParams, PotentialSpec};
use logkirchhoff::solver::{default_seeds, minimize_ground, SolveOptions};

fn main() -> logkirchhoff::Result<()> {
    let lambda: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let g = Arc::new(build_box(8));
    let params = ModelParams::new(1.0, 1.0, 7.0, lambda, 8.0)?;
    let pb = Problem::whole_lattice(g, params, PotentialSpec::step_well(1.0, DomainSpec::ball(2))?)?;
    let rep = minimize_ground(&pb, &default_seeds(2024), &SolveOptions::default())?;
    println!("c_λ = {:?} at λ = {lambda}", rep.level);
    println!(
        "seed {}, {} descent + {} Newton iterations, stop {:?}",
        rep.seed_name, rep.iterations, rep.newton_iterations, rep.stop
    );
    println!("‖r‖_∞ = {:e}, certified {}", rep.residual_sup, rep.certified);
    let negative = rep.minimizer.values().iter().filter(|x| **x < 0.0).count();
    println!("negative entries: {negative}");
    Ok(())
}
