//! Discrete calculus on a [`LatticeGraph`]: Laplacian, gradient form,
//! Dirichlet energy, sign parts, the sign cross term and ℓᵖ norms.
//!
//! Operators are applied matrix-free. Reductions walk vertices in the graph's
//! lexicographic order so results are bit-reproducible; the compensated
//! [`Summation`] mode trades a little speed for order-insensitive sums.

use std::ops::{Index, IndexMut};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGraph, Vertex};

/// A real function on the vertices of a graph.
#[derive(Debug, Clone)]
pub struct Field {
    graph: Arc<LatticeGraph>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        *self.graph == *other.graph && self.values == other.values
    }
}

impl Field {
    pub fn zeros(graph: &Arc<LatticeGraph>) -> Self {
        Field {
            graph: Arc::clone(graph),
            values: vec![0.0; graph.len()],
        }
    }

    pub fn from_values(graph: &Arc<LatticeGraph>, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.len() {
            return Err(Error::Shape(format!(
                "{} values for {} vertices",
                values.len(),
                graph.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at vertex {}",
                graph.vertex(i)
            )));
        }
        Ok(Field {
            graph: Arc::clone(graph),
            values,
        })
    }

    pub fn from_fn(graph: &Arc<LatticeGraph>, f: impl Fn(Vertex) -> f64) -> Self {
        Field {
            graph: Arc::clone(graph),
            values: graph.vertices().iter().map(|v| f(*v)).collect(),
        }
    }

    /// Unit mass at `at`.
    pub fn delta(graph: &Arc<LatticeGraph>, at: Vertex) -> Result<Self> {
        let i = graph
            .index_of(at)
            .ok_or_else(|| Error::InvalidInput(format!("vertex {at} is not in the graph")))?;
        let mut f = Field::zeros(graph);
        f.values[i] = 1.0;
        Ok(f)
    }

    pub fn graph(&self) -> &Arc<LatticeGraph> {
        &self.graph
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, v: Vertex) -> Option<f64> {
        self.graph.index_of(v).map(|i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|x| f(*x)).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> Field {
        self.map(|x| k * x)
    }

    /// `self + k·other`.
    pub fn axpy(&self, k: f64, other: &Field) -> Result<Field> {
        same_graph(self, other)?;
        Ok(Field {
            graph: Arc::clone(&self.graph),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + k * b)
                .collect(),
        })
    }

    /// `s·u⁺ + t·u⁻`.
    pub fn recombine(&self, s: f64, t: f64) -> Field {
        self.map(|x| if x > 0.0 { s * x } else { t * x })
    }

    pub fn is_all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn has_positive_part(&self) -> bool {
        self.values.iter().any(|v| *v > 0.0)
    }

    pub fn has_negative_part(&self) -> bool {
        self.values.iter().any(|v| *v < 0.0)
    }

    /// Copy onto another truncation by vertex coordinates. Values at vertices
    /// missing from `target` must be zero.
    pub fn transfer_to(&self, target: &Arc<LatticeGraph>) -> Result<Field> {
        let mut out = Field::zeros(target);
        for (i, v) in self.graph.vertices().iter().enumerate() {
            let x = self.values[i];
            match target.index_of(*v) {
                Some(j) => out.values[j] = x,
                None if x != 0.0 => {
                    return Err(Error::Shape(format!(
                        "value {x} at {v} has no counterpart in the target graph"
                    )))
                }
                None => {}
            }
        }
        Ok(out)
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

pub(crate) fn same_graph(u: &Field, v: &Field) -> Result<()> {
    if Arc::ptr_eq(&u.graph, &v.graph) || *u.graph == *v.graph {
        Ok(())
    } else {
        Err(Error::Shape("fields live on different graphs".into()))
    }
}

/// Which vertices a reduction runs over.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    All,
    Mask(&'a [bool]),
}

impl Region<'_> {
    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        match self {
            Region::All => true,
            Region::Mask(m) => m[i],
        }
    }
}

/// Accumulation mode for reductions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Summation {
    #[default]
    Plain,
    /// Neumaier-compensated summation.
    Compensated,
}

#[derive(Debug, Clone, Copy)]
pub struct Accumulator {
    mode: Summation,
    sum: f64,
    carry: f64,
}

impl Accumulator {
    pub fn new(mode: Summation) -> Self {
        Accumulator {
            mode,
            sum: 0.0,
            carry: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        match self.mode {
            Summation::Plain => self.sum += x,
            Summation::Compensated => {
                let t = self.sum + x;
                if self.sum.abs() >= x.abs() {
                    self.carry += (self.sum - t) + x;
                } else {
                    self.carry += (x - t) + self.sum;
                }
                self.sum = t;
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn sum_with(mode: Summation, it: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Accumulator::new(mode);
    for x in it {
        acc.add(x);
    }
    acc.value()
}

// Slice kernels shared with the energy and solver modules.

/// `(Δu)(x)` at every stored vertex, against stored neighbours only.
pub(crate) fn laplacian_into(g: &LatticeGraph, u: &[f64], out: &mut [f64]) {
    for i in 0..g.len() {
        let ui = u[i];
        out[i] = g.neighbors(i).iter().map(|&j| u[j] - ui).sum();
    }
}

#[inline]
pub(crate) fn gradient_form_at(g: &LatticeGraph, u: &[f64], v: &[f64], i: usize) -> f64 {
    let (ui, vi) = (u[i], v[i]);
    0.5 * g
        .neighbors(i)
        .iter()
        .map(|&j| (u[j] - ui) * (v[j] - vi))
        .sum::<f64>()
}

pub(crate) fn gradient_pairing(
    g: &LatticeGraph,
    u: &[f64],
    v: &[f64],
    region: Region<'_>,
    mode: Summation,
) -> f64 {
    let mut acc = Accumulator::new(mode);
    for i in 0..g.len() {
        if region.contains(i) {
            acc.add(gradient_form_at(g, u, v, i));
        }
    }
    acc.value()
}

#[inline]
pub(crate) fn cross_term_at(g: &LatticeGraph, u: &[f64], i: usize) -> f64 {
    let ui = u[i];
    if ui == 0.0 {
        return 0.0;
    }
    // u⁺(x)u⁻(y) + u⁻(x)u⁺(y) is nonzero only when the signs differ.
    g.neighbors(i)
        .iter()
        .map(|&j| {
            let uj = u[j];
            if (ui > 0.0 && uj < 0.0) || (ui < 0.0 && uj > 0.0) {
                ui * uj
            } else {
                0.0
            }
        })
        .sum()
}

pub(crate) fn cross_term_raw(g: &LatticeGraph, u: &[f64], region: Region<'_>, mode: Summation) -> f64 {
    let mut acc = Accumulator::new(mode);
    for i in 0..g.len() {
        if region.contains(i) {
            acc.add(cross_term_at(g, u, i));
        }
    }
    acc.value()
}

/// Discrete Laplacian, zero-filled on the halo.
pub fn laplacian(u: &Field) -> Field {
    let g = &u.graph;
    let mut out = vec![0.0; g.len()];
    laplacian_into(g, &u.values, &mut out);
    for (i, o) in out.iter_mut().enumerate() {
        if !g.is_interior(i) {
            *o = 0.0;
        }
    }
    Field {
        graph: Arc::clone(g),
        values: out,
    }
}

/// Pointwise gradient form `Γ(u, v)`.
///
/// On halo vertices only stored neighbours are summed; for fields vanishing on
/// the halo this is exact.
pub fn gradient_form(u: &Field, v: &Field) -> Result<Field> {
    same_graph(u, v)?;
    let g = &u.graph;
    Ok(Field {
        graph: Arc::clone(g),
        values: (0..g.len())
            .map(|i| gradient_form_at(g, &u.values, &v.values, i))
            .collect(),
    })
}

/// `Σ_{x ∈ region} |∇u|²(x)`.
pub fn dirichlet_energy(u: &Field, region: Region<'_>) -> f64 {
    gradient_pairing(&u.graph, &u.values, &u.values, region, Summation::Plain)
}

/// `Σ_{x ∈ region} Γ(u, v)(x)`.
pub fn gradient_inner(u: &Field, v: &Field, region: Region<'_>) -> Result<f64> {
    same_graph(u, v)?;
    Ok(gradient_pairing(&u.graph, &u.values, &v.values, region, Summation::Plain))
}

/// Positive and negative parts. `u⁺ + u⁻` reproduces `u` bit for bit,
/// signed zeros included.
pub fn split_signs(u: &Field) -> (Field, Field) {
    let (plus, minus): (Vec<f64>, Vec<f64>) = u
        .values
        .iter()
        .map(|&x| {
            if x > 0.0 {
                (x, 0.0)
            } else if x < 0.0 {
                (0.0, x)
            } else {
                (x, x)
            }
        })
        .unzip();
    (
        Field {
            graph: Arc::clone(&u.graph),
            values: plus,
        },
        Field {
            graph: Arc::clone(&u.graph),
            values: minus,
        },
    )
}

/// `K(u) = Σ_{x ∈ region} Σ_{y∼x} [u⁺(x)u⁻(y) + u⁻(x)u⁺(y)]`, always ≤ 0.
pub fn cross_term(u: &Field, region: Region<'_>) -> f64 {
    cross_term_raw(&u.graph, &u.values, region, Summation::Plain)
}

/// Exponent of an ℓᵖ norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

/// Counting-measure ℓᵖ norm over `region`.
pub fn lp_norm(u: &Field, p: Exponent, region: Region<'_>) -> Result<f64> {
    let vals = u
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| region.contains(*i))
        .map(|(_, x)| x.abs());
    match p {
        Exponent::Infinity => Ok(vals.fold(0.0, f64::max)),
        Exponent::Finite(p) if p >= 1.0 => {
            // Scale by the sup norm so large exponents do not overflow.
            let vals: Vec<f64> = vals.collect();
            let m = vals.iter().copied().fold(0.0, f64::max);
            if m == 0.0 {
                return Ok(0.0);
            }
            let s: f64 = vals.iter().map(|x| (x / m).powf(p)).sum();
            Ok(m * s.powf(1.0 / p))
        }
        Exponent::Finite(p) => Err(Error::InvalidParameter(format!(
            "lp norm needs p >= 1, got {p}"
        ))),
    }
}

/// `a·Σ_{grad_region}|∇u|² + Σ_{mass_region} weight(x)·u(x)²`.
pub fn weighted_norm_sq(
    u: &Field,
    a: f64,
    weight: &[f64],
    grad_region: Region<'_>,
    mass_region: Region<'_>,
) -> f64 {
    let grad = dirichlet_energy(u, grad_region);
    let mass: f64 = u
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| mass_region.contains(*i))
        .map(|(i, x)| weight[i] * x * x)
        .sum();
    a * grad + mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;

    fn graph(r: u64) -> Arc<LatticeGraph> {
        Arc::new(build_box(r))
    }

    fn dipole(g: &Arc<LatticeGraph>) -> Field {
        let mut u = Field::zeros(g);
        u[g.index_of(Vertex::ORIGIN).unwrap()] = 1.0;
        u[g.index_of(Vertex::unit(0)).unwrap()] = -1.0;
        u
    }

    #[test]
    fn laplacian_examples() {
        let g = graph(3);
        let c = Field::from_fn(&g, |_| 2.5);
        let lc = laplacian(&c);
        for i in 0..g.len() {
            if g.is_interior(i) {
                assert_eq!(lc[i], 0.0);
            }
        }
        let d = Field::delta(&g, Vertex::ORIGIN).unwrap();
        let ld = laplacian(&d);
        assert_eq!(ld.at(Vertex::ORIGIN), Some(-6.0));
        assert_eq!(ld.at(Vertex::unit(0)), Some(1.0));
        let lin = Field::from_fn(&g, |v| v.0[0] as f64);
        let ll = laplacian(&lin);
        for i in 0..g.len() {
            if g.is_interior(i) {
                assert_eq!(ll[i], 0.0);
            }
        }
    }

    #[test]
    fn gradient_form_examples() {
        let g = graph(3);
        let d = Field::delta(&g, Vertex::ORIGIN).unwrap();
        let gd = gradient_form(&d, &d).unwrap();
        assert_eq!(gd.at(Vertex::ORIGIN), Some(3.0));
        for v in Vertex::ORIGIN.neighbors() {
            assert_eq!(gd.at(v), Some(0.5));
        }
        let c = Field::from_fn(&g, |_| 1.0);
        let gc = gradient_form(&c, &d).unwrap();
        assert!(gc.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn dirichlet_energy_examples() {
        let g = graph(3);
        let d = Field::delta(&g, Vertex::ORIGIN).unwrap();
        assert_eq!(dirichlet_energy(&d, Region::All), 6.0);
        assert_eq!(dirichlet_energy(&dipole(&g), Region::All), 14.0);
        assert_eq!(dirichlet_energy(&Field::zeros(&g), Region::All), 0.0);
    }

    #[test]
    fn cross_term_examples() {
        let g = graph(3);
        assert_eq!(cross_term(&dipole(&g), Region::All), -2.0);
        let d = Field::delta(&g, Vertex::ORIGIN).unwrap();
        assert_eq!(cross_term(&d, Region::All), 0.0);
    }

    #[test]
    fn split_signs_dipole() {
        let g = graph(2);
        let (p, m) = split_signs(&dipole(&g));
        assert_eq!(p, Field::delta(&g, Vertex::ORIGIN).unwrap());
        assert_eq!(m, Field::delta(&g, Vertex::unit(0)).unwrap().scaled(-1.0));
    }

    #[test]
    fn signed_zero_reconstruction() {
        let g = graph(0);
        let mut u = Field::zeros(&g);
        u[0] = -0.0;
        u[1] = 0.0;
        let (p, m) = split_signs(&u);
        for i in 0..u.len() {
            assert_eq!((p[i] + m[i]).to_bits(), u[i].to_bits());
        }
    }

    #[test]
    fn lp_norm_examples() {
        let g = graph(2);
        let d = Field::delta(&g, Vertex::ORIGIN).unwrap();
        for p in [1.0, 2.0, 7.5] {
            assert!((lp_norm(&d, Exponent::Finite(p), Region::All).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(lp_norm(&d, Exponent::Infinity, Region::All).unwrap(), 1.0);
        let n2 = lp_norm(&dipole(&g), Exponent::Finite(2.0), Region::All).unwrap();
        assert!((n2 - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            lp_norm(&d, Exponent::Finite(0.5), Region::All),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn weighted_norm_examples() {
        let g = graph(3);
        let d = Field::delta(&g, Vertex::ORIGIN).unwrap();
        let ones = vec![1.0; g.len()];
        assert_eq!(weighted_norm_sq(&d, 1.0, &ones, Region::All, Region::All), 7.0);
        let elevens = vec![11.0; g.len()];
        assert_eq!(weighted_norm_sq(&d, 1.0, &elevens, Region::All, Region::All), 17.0);
    }

    #[test]
    fn compensated_sum_is_exact_on_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum_with(Summation::Compensated, xs), 2.0);
    }

    #[test]
    fn mismatched_graphs_are_rejected() {
        let a = Field::zeros(&graph(1));
        let b = Field::zeros(&graph(2));
        assert!(matches!(gradient_form(&a, &b), Err(Error::Shape(_))));
    }
}
