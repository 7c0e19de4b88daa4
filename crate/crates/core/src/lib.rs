//! Galerkin discretization of generalized convection-diffusion problems for
//! differential forms (degrees 0, 1, 2) on 2D simplicial meshes.
//!
//! The crate provides lowest-order discrete differential forms (Whitney
//! basis) on triangulations, semi-Lagrangian transport of cochains through
//! interpolated flow maps, Eulerian discretizations of the Lie derivative
//! (a central bilinear form with face jumps and one-sided interpolated
//! variants), fully discrete timestepping schemes, an eddy-current style
//! application, and a harness reproducing the convergence and stability
//! studies the design is validated against.

pub mod error;
pub mod flow;
pub mod geom;
pub mod harness;
pub mod lie_operators;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod schemes;
pub mod sl_transport;
pub mod whitney;

pub use error::{Error, Result};
pub use geom::{Mat2, Vec2};
pub use mesh::{Degree, SimplicialMesh};
