//! Transferable neural PDE inference on rectilinear domains.
//!
//! The toolkit trains a small boundary-to-solution network (a genomic solver)
//! on a unit square for the 2D Laplace equation under arbitrary Dirichlet
//! boundary conditions, then assembles its genome-wise predictions over
//! large, unseen rectilinear domains via an overlapping-genome iterative
//! predictor. A classical finite-difference solver doubles as training-data
//! generator and ground-truth oracle.

pub mod analysis;
pub mod domain_spec;
pub mod error;
pub mod fd;
pub mod field;
pub mod gfnet;
pub mod gp;
pub mod mosaic;
pub mod robin;
pub mod sobol;

pub use error::{Error, Result};
