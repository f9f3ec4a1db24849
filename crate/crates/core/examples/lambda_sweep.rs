//! Sweep λ upward and watch the whole-lattice levels approach the levels of
//! the Dirichlet problem on the well. Pass `reference` for the full-size
//! instance (ball of radius 12, Ω = B_2).

use logkirchhoff::experiments::{convergence_report, lambda_sweep, ConvergenceThresholds, Instance};
use logkirchhoff::lattice::{DomainSpec, Truncation};
use logkirchhoff::model::{ModelParams, PotentialKind};
use logkirchhoff::solver::{default_seeds, SolveOptions};

fn main() -> logkirchhoff::Result<()> {
    let reference = std::env::args().any(|a| a == "reference");
    let (omega, radius) = if reference { (2, 12) } else { (1, 7) };
    let inst = Instance {
        params: ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0)?,
        potential: PotentialKind::StepWell { h0: 1.0 },
        domain: DomainSpec::ball(omega),
        shape: Truncation::L1Ball,
        radius,
    };
    let lambdas = [1.0, 10.0, 100.0, 1e3, 1e4];
    let sweep = lambda_sweep(&inst, &lambdas, &default_seeds(2024), &SolveOptions::default())?;
    println!("m_Ω = {:?}, c_Ω = {:?}", sweep.limit_row.m_omega, sweep.limit_row.c_omega);
    print!("{}", sweep.csv());
    let s = convergence_report(&sweep, &ConvergenceThresholds::default())?;
    println!("|m_λ − m_Ω| ~ λ^{:.3}, H¹ distance ~ λ^{:.3}", s.level_rate, s.h1_rate);
    println!("gap positive {}, m_λ ≤ m_Ω {}", s.gap_positive, s.below_limit);
    Ok(())
}
