//! Direct and inverse solvers for a 2D parabolic problem whose zeroth-order
//! reaction coefficient depends on time only.
//!
//! The direct problem `du/dt - div(k grad u) + p(t) u = f` with a Robin
//! boundary condition is discretized by P1 finite elements on a triangulated
//! convex polygon and marched implicitly or by Crank-Nicolson. The inverse
//! problem recovers `p(t)` from a point or integral observation of the
//! solution: each step of a linearized scheme reduces to two elliptic solves
//! plus one scalar recovery ([`inverse`]).
//!
//! Crate layout mirrors the pipeline: [`mesh`] generation, [`fem`] assembly,
//! [`sparse`] linear algebra, [`direct`] marching, [`inverse`] identification
//! and the [`experiment`] runner behind the `coefid` CLI.

pub mod direct;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod inverse;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
