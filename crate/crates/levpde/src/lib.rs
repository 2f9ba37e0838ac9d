//! Spectral Galerkin laboratory for nonlinear stochastic parabolic equations
//! with monotone principal part and Levy forcing.
//!
//! The crate is organised around a small number of concrete objects:
//!
//! * [`spaces::SpectralBasis`] — Dirichlet Laplacian eigenbasis on an
//!   interval or rectangle, with quadrature, norms and projections;
//! * [`operators::MonotoneOperatorSpec`] — nonlinear operators defined
//!   through convex integrands of the derivative tuples, together with
//!   their radial truncation;
//! * [`convection::assemble_b_cutoff`] — a skew-symmetric advection
//!   surrogate with an H-norm cutoff;
//! * [`noise::NoiseDescriptor`] — Q-Wiener plus compensated-jump forcing
//!   with reproducible named streams;
//! * [`solver::simulate`] — the semi-implicit Euler scheme with a per-step
//!   energy ledger;
//! * [`analysis`] — trajectory diagnostics and parameter studies;
//! * [`cli`] — the command-line front end (`levpde <subcommand>`).
//!
//! The guide in `book/` walks through each of these; its code snippets are
//! compiled as doc-tests via the [`book`] module.

pub mod analysis;
pub mod book;
pub mod cli;
pub mod config;
pub mod convection;
pub mod noise;
pub mod operators;
pub mod output;
pub mod properties;
pub mod solver;
pub mod spaces;
pub mod streams;
