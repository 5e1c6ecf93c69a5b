//! Binomial thinning of power series families and the Cauchy–Gołąb–Schinzel
//! functional equations, with exact oracles, residual grids and seeded Monte
//! Carlo cross-checks.

pub mod cgs;
pub mod config;
pub mod magma;
pub mod plot;
pub mod psf;
pub mod roots;
pub mod run;
pub mod suite;
pub mod thinning;
