//! Dirichlet problem on the well: `m_Ω` and `c_Ω` with zero data on `∂Ω`.

use logkirchhoff::lattice::DomainSpec;
use logkirchhoff::model::ModelParams;
use logkirchhoff::solver::{default_seeds, solve_limit_problem, SolveOptions};

fn main() -> logkirchhoff::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0)?;
    for r in [1, 2] {
        let pair = solve_limit_problem(params, DomainSpec::ball(r), &default_seeds(2024), &SolveOptions::default())?;
        println!(
            "Ω = B_{r}: m_Ω = {:?}, c_Ω = {:?}, gap {:?}, certified {}",
            pair.nodal.level,
            pair.ground.level,
            pair.gap(),
            pair.nodal.certified && pair.ground.certified
        );
    }
    Ok(())
}
