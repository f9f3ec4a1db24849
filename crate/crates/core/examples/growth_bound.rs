//! Constants of the growth bound `|t|^{p−1}|log t²| ≤ ε|t| + C_ε|t|^{q−1}`
//! and the sign of `f(x) = 2/p − 2/p·x^p + x^p log x²` used for the
//! energy comparison of sign parts.

use logkirchhoff::energy::power_log_gap;
use logkirchhoff::model::bound_constant;

fn main() -> logkirchhoff::Result<()> {
    for (eps, p, q) in [(1.0, 7.0, 8.0), (0.1, 7.0, 8.0), (1.0, 6.5, 7.0), (1.0, 9.0, 12.0)] {
        let b = bound_constant(eps, p, q)?;
        println!("ε = {eps:<4} p = {p:<4} q = {q:<4} C_ε = {:.12} (peak at t = {:.6})", b.c_epsilon, b.argmax);
    }
    for p in [6.5, 7.0, 9.0] {
        let min = (1..=800)
            .map(|k| k as f64 * 0.01)
            .filter(|x| (x - 1.0).abs() > 1e-9)
            .map(|x| power_log_gap(x, p))
            .fold(f64::INFINITY, f64::min);
        println!("p = {p}: f(1) = {:e}, min over grid = {min:e}", power_log_gap(1.0, p));
    }
    Ok(())
}
