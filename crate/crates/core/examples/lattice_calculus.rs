//! Truncated lattice, discrete Laplacian, gradient form and the sign
//! splitting on a dipole `δ₀ − δ_{e₁}`.

use std::sync::Arc;

use logkirchhoff::calculus::{cross_term, dirichlet_energy, laplacian, split_signs, Field, Region};
use logkirchhoff::lattice::{build_box, l1_ball_count, DomainSpec, Vertex};

fn main() -> logkirchhoff::Result<()> {
    let g = Arc::new(build_box(3));
    println!(
        "l1 ball of radius 3: {} vertices ({} interior, {} halo), formula {}",
        g.len(),
        g.interior_count(),
        g.halo_count(),
        l1_ball_count(4)
    );

    let e1 = Vertex::new(1, 0, 0);
    let u = Field::delta(&g, Vertex::new(0, 0, 0))?.axpy(-1.0, &Field::delta(&g, e1)?)?;
    let lap = laplacian(&u);
    println!("Δu(0) = {}, Δu(e1) = {}", lap.at(Vertex::new(0, 0, 0)).unwrap(), lap.at(e1).unwrap());
    println!("∫|∇u|² = {}", dirichlet_energy(&u, Region::All));
    println!("K(u) = {}", cross_term(&u, Region::All));

    let (plus, minus) = split_signs(&u);
    println!(
        "∫|∇u⁺|² = {}, ∫|∇u⁻|² = {}",
        dirichlet_energy(&plus, Region::All),
        dirichlet_energy(&minus, Region::All)
    );

    let omega = DomainSpec::ball(1);
    println!("Ω = B_1: |Ω| = {}, |∂Ω| = {}", omega.len(), omega.boundary().len());
    Ok(())
}
