//! Energy decomposition of a random sign-changing field, the scaling
//! expansions `J(su⁺ + tu⁻)` and the level identity on `M`.

use std::sync::Arc;

use logkirchhoff::calculus::Field;
use logkirchhoff::energy::{energy, level_identity, nehari_residuals, split_expansion, Problem};
use logkirchhoff::lattice::{build_box, DomainSpec};
use logkirchhoff::model::{ModelParams, PotentialSpec};
use logkirchhoff::nehari::{project_pair, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> logkirchhoff::Result<()> {
    let g = Arc::new(build_box(3));
    let params = ModelParams::new(1.0, 1.0, 7.0, 10.0, 8.0)?;
    let pb = Problem::whole_lattice(g.clone(), params, PotentialSpec::step_well(1.0, DomainSpec::ball(1))?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = (0..g.len()).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let u = pb.restrict(&Field::from_values(&g, values)?);
    let e = energy(&u, &pb)?;
    println!("{e:#?}");

    let (s, t) = (1.3, 0.7);
    let direct = energy(&u.recombine(s, t), &pb)?.total;
    let split = split_expansion(&u, s, t, &pb)?;
    println!("J(su⁺+tu⁻) direct {direct:?}, expansion {:?}", split.energy);

    let nr = nehari_residuals(&u, &pb)?;
    println!("raw field: (J'(u),u±) = ({:e}, {:e})", nr.plus, nr.minus);
    let w = project_pair(&u, &pb, DEFAULT_TOL)?.apply(&u);
    let nr = nehari_residuals(&w, &pb)?;
    println!("projected: (J'(w),w±) = ({:e}, {:e})", nr.plus, nr.minus);
    println!("J(w) = {:?}, level identity {:?}", energy(&w, &pb)?.total, level_identity(&w, &pb)?);
    Ok(())
}
