//! Least-energy sign-changing and ground-state solutions of the discrete
//! Kirchhoff equation with logarithmic nonlinearity
//!
//! ```text
//! −(a + b Σ|∇u|²) Δu + (λh(x) + 1) u = |u|^{p−2} u log u²   on ℤ³
//! ```
//!
//! on finite truncations of the lattice, together with the Dirichlet problem
//! on the potential well `Ω = {h = 0}` that the solutions approach as λ grows.
//!
//! The pieces, from the bottom up:
//!
//! - [`lattice`]: vertices, truncations (an ℓ¹ ball or a cube with a zero halo),
//!   wells and their vertex boundaries.
//! - [`calculus`]: fields, the Laplacian, the gradient form, sign parts and
//!   the cross term `K(u)`.
//! - [`model`]: parameters, potentials and the growth-bound constants.
//! - [`energy`]: the functional `J`, its derivative, the residual of the
//!   equation and the closed forms in `(s, t)` for `J(su⁺ + tu⁻)`.
//! - [`nehari`]: projections onto the Nehari manifold and the sign-changing
//!   Nehari set.
//! - [`solver`]: multi-start projected L-BFGS descent with Newton polishing.
//! - [`experiments`]: λ-sweeps, convergence summaries and truncation studies.
//! - [`io`] and [`cli`]: solution files, run configurations and the
//!   `logkirchhoff` command.
//!
//! Each major capability has a runnable example under `examples/`:
//! `lattice_calculus`, `growth_bound`, `energy_identities`,
//! `nehari_projection`, `ground_state`, `nodal_solution`, `limit_problem`,
//! `lambda_sweep`, `radius_study` and `command_line`.
//!
//! ```
//! use logkirchhoff::lattice::DomainSpec;
//! use logkirchhoff::model::ModelParams;
//! use logkirchhoff::solver::{default_seeds, solve_limit_problem, SolveOptions};
//!
//! let params = ModelParams::new(1.0, 1.0, 7.0, 1.0, 8.0)?;
//! let pair = solve_limit_problem(params, DomainSpec::ball(1), &default_seeds(2024), &SolveOptions::default())?;
//! assert!(pair.nodal.certified && pair.nodal.level > 2.0 * pair.ground.level);
//! # Ok::<(), logkirchhoff::Error>(())
//! ```

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod cli;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lattice;
pub mod model;
pub mod nehari;
pub mod solver;

pub use error::{Error, Result};
