//! Finite truncations of the integer lattice graph ℤ³.
//!
//! A [`LatticeGraph`] stores an interior set (the ℓ¹ ball of radius `R` by
//! default) together with the one-step halo ring around it. Fields used for
//! whole-lattice computations vanish on the halo, so every gradient term that
//! crosses the truncation boundary is evaluated against an explicit zero.
//!
//! Vertices are ordered lexicographically by `(x1, x2, x3)`. That ordering is
//! part of the solution-file contract and every reduction in the crate walks
//! vertices in it.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℤ³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex(pub [i64; 3]);

/// The six unit steps of the lattice, in a fixed order.
pub const UNIT_STEPS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

impl Vertex {
    pub const ORIGIN: Vertex = Vertex([0, 0, 0]);

    pub fn new(x1: i64, x2: i64, x3: i64) -> Self {
        Vertex([x1, x2, x3])
    }

    /// Unit vector along axis `i` (0-based).
    pub fn unit(i: usize) -> Self {
        let mut c = [0; 3];
        c[i] = 1;
        Vertex(c)
    }

    pub fn coords(&self) -> [i64; 3] {
        self.0
    }

    /// ℓ¹ norm, i.e. graph distance to the origin.
    pub fn norm1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn norm_inf(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn offset(&self, step: [i64; 3]) -> Vertex {
        Vertex([self.0[0] + step[0], self.0[1] + step[1], self.0[2] + step[2]])
    }

    pub fn scaled(&self, k: i64) -> Vertex {
        Vertex([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }

    /// The six lattice neighbours in [`UNIT_STEPS`] order.
    pub fn neighbors(&self) -> impl Iterator<Item = Vertex> + '_ {
        UNIT_STEPS.iter().map(move |s| self.offset(*s))
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

impl From<[i64; 3]> for Vertex {
    fn from(c: [i64; 3]) -> Self {
        Vertex(c)
    }
}

/// Graph distance on ℤ³: Σ|x_i − y_i|.
pub fn graph_distance(x: Vertex, y: Vertex) -> u64 {
    (0..3).map(|i| (x.0[i] - y.0[i]).unsigned_abs()).sum()
}

/// Shape of the interior of a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// Closed ℓ¹ ball `{|x|₁ ≤ R}`.
    L1Ball,
    /// Cube `{|x|_∞ ≤ R}`.
    Cube,
}

impl Truncation {
    fn contains(self, v: Vertex, radius: u64) -> bool {
        match self {
            Truncation::L1Ball => v.norm1() <= radius,
            Truncation::Cube => v.norm_inf() <= radius,
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::L1Ball => f.write_str("l1-ball"),
            Truncation::Cube => f.write_str("cube"),
        }
    }
}

/// Finite piece of ℤ³: interior vertices plus their halo ring.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct LatticeGraph {
    shape: Truncation,
    radius: u64,
    vertices: Vec<Vertex>,
    interior: Vec<bool>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
    index: HashMap<Vertex, usize>,
}

impl PartialEq for LatticeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.radius == other.radius
    }
}

/// Build the ℓ¹-ball truncation of radius `radius` with its halo.
pub fn build_box(radius: u64) -> LatticeGraph {
    LatticeGraph::new(Truncation::L1Ball, radius)
}

/// Build the cube truncation `|x|_∞ ≤ half_width` with its halo.
pub fn build_cube(half_width: u64) -> LatticeGraph {
    LatticeGraph::new(Truncation::Cube, half_width)
}

impl LatticeGraph {
    pub fn new(shape: Truncation, radius: u64) -> Self {
        let r = radius as i64 + 1;
        let mut vertices = Vec::new();
        // Lexicographic enumeration of the bounding cube; keep interior
        // vertices and the ones adjacent to the interior.
        for x1 in -r..=r {
            for x2 in -r..=r {
                for x3 in -r..=r {
                    let v = Vertex([x1, x2, x3]);
                    if shape.contains(v, radius) || v.neighbors().any(|w| shape.contains(w, radius))
                    {
                        vertices.push(v);
                    }
                }
            }
        }
        let index: HashMap<Vertex, usize> =
            vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let interior = vertices.iter().map(|v| shape.contains(*v, radius)).collect();
        let mut offsets = Vec::with_capacity(vertices.len() + 1);
        let mut adjacency = Vec::with_capacity(vertices.len() * 6);
        offsets.push(0);
        for v in &vertices {
            adjacency.extend(v.neighbors().filter_map(|w| index.get(&w).copied()));
            offsets.push(adjacency.len());
        }
        LatticeGraph {
            shape,
            radius,
            vertices,
            interior,
            offsets,
            adjacency,
            index,
        }
    }

    pub fn shape(&self) -> Truncation {
        self.shape
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vertex {
        self.vertices[i]
    }

    pub fn index_of(&self, v: Vertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.index.contains_key(&v)
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|b| **b).count()
    }

    pub fn halo_count(&self) -> usize {
        self.len() - self.interior_count()
    }

    /// Indices of the stored neighbours of vertex `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Undirected edges `(i, j)` with `i < j`, in vertex order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }

    /// Mask with `true` on the given vertices. Errors if one is not stored.
    pub fn mask_of(&self, set: &BTreeSet<Vertex>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.len()];
        for v in set {
            let i = self
                .index_of(*v)
                .ok_or_else(|| Error::InvalidDomain(format!("vertex {v} is not in the graph")))?;
            mask[i] = true;
        }
        Ok(mask)
    }
}

/// A potential well `Ω` and its vertex boundary `∂Ω`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    omega: BTreeSet<Vertex>,
    boundary: BTreeSet<Vertex>,
}

impl DomainSpec {
    /// Validates that `omega` is nonempty and connected.
    pub fn new(omega: impl IntoIterator<Item = Vertex>) -> Result<Self> {
        let omega: BTreeSet<Vertex> = omega.into_iter().collect();
        if !lattice_connected(&omega)? {
            return Err(Error::HypothesisViolation(
                "potential well is not connected".into(),
            ));
        }
        let boundary = lattice_boundary(&omega);
        Ok(DomainSpec { omega, boundary })
    }

    /// The closed ℓ¹ ball `B_r(0)`.
    pub fn ball(r: u64) -> Self {
        let r_i = r as i64;
        let mut omega = BTreeSet::new();
        for x1 in -r_i..=r_i {
            for x2 in -r_i..=r_i {
                for x3 in -r_i..=r_i {
                    let v = Vertex([x1, x2, x3]);
                    if v.norm1() <= r {
                        omega.insert(v);
                    }
                }
            }
        }
        let boundary = lattice_boundary(&omega);
        DomainSpec { omega, boundary }
    }

    pub fn omega(&self) -> &BTreeSet<Vertex> {
        &self.omega
    }

    pub fn boundary(&self) -> &BTreeSet<Vertex> {
        &self.boundary
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.omega.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Largest ℓ¹ norm over `Ω ∪ ∂Ω`.
    pub fn reach(&self) -> u64 {
        self.omega
            .iter()
            .chain(self.boundary.iter())
            .map(|v| v.norm1())
            .max()
            .unwrap_or(0)
    }

    /// ℓ¹ distance from `x` to the nearest vertex of `Ω`.
    pub fn distance_to(&self, x: Vertex) -> u64 {
        self.omega
            .iter()
            .map(|w| graph_distance(x, *w))
            .min()
            .unwrap_or(u64::MAX)
    }
}

fn lattice_boundary(omega: &BTreeSet<Vertex>) -> BTreeSet<Vertex> {
    omega
        .iter()
        .flat_map(|x| x.neighbors().collect::<Vec<_>>())
        .filter(|y| !omega.contains(y))
        .collect()
}

fn lattice_connected(omega: &BTreeSet<Vertex>) -> Result<bool> {
    let Some(&start) = omega.iter().next() else {
        return Err(Error::InvalidDomain("empty vertex set".into()));
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for y in x.neighbors() {
            if omega.contains(&y) && seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    Ok(seen.len() == omega.len())
}

/// Vertices outside `omega` adjacent to some vertex of `omega`.
///
/// Every member of `omega` and of the returned boundary must be stored in
/// `graph`; otherwise the domain does not fit the truncation.
pub fn vertex_boundary(omega: &BTreeSet<Vertex>, graph: &LatticeGraph) -> Result<BTreeSet<Vertex>> {
    if let Some(v) = omega.iter().find(|v| !graph.contains(**v)) {
        return Err(Error::InvalidDomain(format!("vertex {v} is not in the graph")));
    }
    let boundary = lattice_boundary(omega);
    if let Some(v) = boundary.iter().find(|v| !graph.contains(**v)) {
        return Err(Error::InvalidDomain(format!(
            "boundary vertex {v} falls outside the truncation"
        )));
    }
    Ok(boundary)
}

/// Whether `omega` induces a connected subgraph.
pub fn is_connected(omega: &BTreeSet<Vertex>, graph: &LatticeGraph) -> Result<bool> {
    if let Some(v) = omega.iter().find(|v| !graph.contains(**v)) {
        return Err(Error::InvalidDomain(format!("vertex {v} is not in the graph")));
    }
    lattice_connected(omega)
}

/// Number of lattice points with `|x|₁ ≤ r` in ℤ³.
pub fn l1_ball_count(r: u64) -> u64 {
    (2 * r + 1) * (2 * r * r + 2 * r + 3) / 3
}

/// The 48 signed coordinate permutations (the point group of ℤ³).
pub fn point_group() -> Vec<[[i64; 3]; 3]> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for perm in PERMS {
        for signs in 0..8u8 {
            let mut m = [[0i64; 3]; 3];
            for (row, &col) in perm.iter().enumerate() {
                m[row][col] = if signs & (1 << row) != 0 { -1 } else { 1 };
            }
            out.push(m);
        }
    }
    out
}

pub fn apply_symmetry(m: &[[i64; 3]; 3], v: Vertex) -> Vertex {
    let c = v.0;
    Vertex([
        m[0][0] * c[0] + m[0][1] * c[1] + m[0][2] * c[2],
        m[1][0] * c[0] + m[1][1] * c[1] + m[1][2] * c[2],
        m[2][0] * c[0] + m[2][1] * c[1] + m[2][2] * c[2],
    ])
}
