//! germlab: a numerical laboratory for generic one-parameter unfoldings of
//! antiholomorphic parabolic fixed points of codimension 1.
//!
//! The crate computes and cross-checks the objects classifying such
//! unfoldings: the canonical parameter and formal invariant, prepared normal
//! forms, closed-form time charts of the model vector field, Fatou
//! coordinates on translation domains, transition (horn) maps with their
//! Fourier data, and the weak/strong classification moduli together with the
//! derived applications (conjugacy construction, antiholomorphic square
//! roots, invariant-curve and compatibility tests).

pub mod chart;
pub mod classify;
pub mod config;
pub mod dd;
pub mod error;
pub mod fatou;
pub mod germ;
pub mod io;
pub mod modulus;
pub mod portrait;
pub mod prepare;
pub mod series;
pub mod series1;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use germ::{FixedPointData, GermFamily};
pub use series::{weierstrass_prepare, SeriesFamily};
