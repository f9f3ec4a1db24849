//! Sensitivity of `m_λ` and `c_λ` to the truncation radius.

use logkirchhoff::experiments::{radius_study, Instance};
use logkirchhoff::lattice::{DomainSpec, Truncation};
use logkirchhoff::model::{ModelParams, PotentialKind};
use logkirchhoff::solver::{default_seeds, SolveOptions};

fn main() -> logkirchhoff::Result<()> {
    let inst = Instance {
        params: ModelParams::new(1.0, 1.0, 7.0, 100.0, 8.0)?,
        potential: PotentialKind::StepWell { h0: 1.0 },
        domain: DomainSpec::ball(1),
        shape: Truncation::L1Ball,
        radius: 4,
    };
    let rows = radius_study(&inst, 100.0, &[4, 6, 8, 12], &default_seeds(2024), &SolveOptions::default())?;
    println!("radius,m_lambda,c_lambda,m_change,c_change");
    for r in rows {
        println!("{},{:?},{:?},{:e},{:e}", r.radius, r.m_lambda, r.c_lambda, r.m_change, r.c_change);
    }
    Ok(())
}
