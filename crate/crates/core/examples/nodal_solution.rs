//! Least-energy sign-changing solution and the gap `m_λ − 2c_λ`; writes the
//! nodal field to a solution file and reads it back.

use std::sync::Arc;

use logkirchhoff::energy::Problem;
use logkirchhoff::io::{read_solution, write_solution};
use logkirchhoff::lattice::{build_box, DomainSpec};
use logkirchhoff::model::{ModelParams, PotentialSpec};
use logkirchhoff::solver::{default_seeds, solve_levels, SolveOptions};

fn main() -> logkirchhoff::Result<()> {
    let g = Arc::new(build_box(8));
    let params = ModelParams::new(1.0, 1.0, 7.0, 100.0, 8.0)?;
    let pb = Problem::whole_lattice(g, params, PotentialSpec::step_well(1.0, DomainSpec::ball(2))?)?;
    let pair = solve_levels(pb, &default_seeds(2024), &SolveOptions::default())?;
    let (m, c) = (&pair.nodal, &pair.ground);
    println!("m_λ = {:?} ({}), c_λ = {:?} ({})", m.level, m.seed_name, c.level, c.seed_name);
    println!("m_λ − 2c_λ = {:?}", pair.gap());
    println!("‖u⁺‖₂ = {:.6}, ‖u⁻‖₂ = {:.6}", m.sign_norms.0, m.sign_norms.1);
    for cand in &m.candidates {
        println!("  {:<10} {:?} certified {}", cand.seed_name, cand.level, cand.certified);
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("nodal.json");
    write_solution(m, &pair.problem, &path)?;
    let back = read_solution(&path)?;
    println!("round trip bit-exact: {}", back.field == m.minimizer);
    Ok(())
}
