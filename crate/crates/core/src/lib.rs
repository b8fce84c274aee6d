//! Numerical laboratory for sharp upper bounds on the harmonic mean of low
//! Neumann and Steklov eigenvalues.
//!
//! The crate discretizes model surfaces (`mesh`), assembles first-order FEM
//! matrices and solves the generalized eigenproblems (`spectral`), computes
//! discrete extrinsic geometry (`extrinsic`) and sphere Mobius machinery
//! (`conformal`), and evaluates both sides of each inequality with
//! resolution-aware verdicts (`bounds`).

pub mod bounds;
pub mod conformal;
pub mod error;
pub mod extrinsic;
pub mod geom;
pub mod mesh;
pub mod optim;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
