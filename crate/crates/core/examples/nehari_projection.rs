//! Projection onto the sign-changing Nehari set: Miranda bracket, the
//! halving and Newton trace, and the shrink property on a scaled member.

use std::sync::Arc;

use logkirchhoff::calculus::Field;
use logkirchhoff::energy::Problem;
use logkirchhoff::lattice::{build_box, DomainSpec, Vertex};
use logkirchhoff::model::{ModelParams, PotentialSpec};
use logkirchhoff::nehari::{find_bracket, project_pair, project_scalar, shrink_property_check, DEFAULT_TOL};

fn main() -> logkirchhoff::Result<()> {
    let g = Arc::new(build_box(4));
    let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0)?;
    let pb = Problem::whole_lattice(g.clone(), params, PotentialSpec::step_well(1.0, DomainSpec::ball(2))?)?;
    let u = Field::from_fn(&g, |v| {
        let a = (-0.5 * (v.offset([-1, 0, 0]).norm1() as f64).powi(2)).exp();
        let b = (-0.7 * (v.offset([1, 1, 0]).norm1() as f64).powi(2)).exp();
        0.3 * a - 0.1 * b
    });
    let u = pb.restrict(&u);

    let (r, big_r) = find_bracket(&u, &pb)?;
    println!("Miranda square [{r}, {big_r}]²");
    let pr = project_pair(&u, &pb, DEFAULT_TOL)?;
    for step in &pr.trace {
        println!("{:?}: s = {:.12}, t = {:.12}, g = ({:+.3e}, {:+.3e})", step.stage, step.s, step.t, step.g1, step.g2);
    }
    println!(
        "s = {:?}, t = {:?}, residuals ({:e}, {:e}) after {} iterations",
        pr.s, pr.t, pr.residual_g1, pr.residual_g2, pr.iterations
    );

    let w = pr.apply(&u);
    let sh = shrink_property_check(&w.scaled(1.5), &pb, DEFAULT_TOL)?;
    println!("shrink from 1.5·w: s = {:.6}, t = {:.6}, holds {}", sh.s, sh.t, sh.holds);

    let spike = Field::delta(&g, Vertex::new(0, 0, 0))?;
    let sp = project_scalar(&spike, &pb, DEFAULT_TOL)?;
    println!("ground projection of δ₀: s = {:?} (residual {:e})", sp.s, sp.residual);
    Ok(())
}
