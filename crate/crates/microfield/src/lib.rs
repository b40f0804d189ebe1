//! Piecewise-affine, divergence-free vector fields whose gradients sit in (or
//! converge to) the non-convex energy wells of nematic elastomers.
//!
//! The crate is layered bottom-up:
//!
//! * [`kernel`]: trace-free matrix coordinates, spectra, energy densities.
//! * [`wells`] and [`inapprox`]: well sets and the staged in-approximations.
//! * [`laminate`]: constructive rank-one splits and sampled lamination hulls.
//! * [`geometry`]: domains, cells, the reference triangle field, packings.
//! * [`construct`]: disk solution, triangle oscillation tiles, refinement.
//! * [`verify`]: payload-independent audits and SVG rendering.

pub mod construct;
pub mod geometry;
pub mod inapprox;
pub mod kernel;
pub mod laminate;
pub mod tol;
pub mod verify;
pub mod wells;

pub use kernel::{Mat2, Mat3, TracelessMat2, TracelessMat3, Vec2, Vec3};
pub use tol::Tol;
