//! # difgeo
//!
//! Diffusion-operator geometry for labeled feature clouds.
//!
//! A snapshot Z = {z_i} ⊂ R^d induces the Gaussian-kernel Markov operator
//! P = D⁻¹W with W_ij = exp(−‖z_i−z_j‖²/4ε). Everything else is derived
//! from that one object:
//!
//! - [`operator`] — kernel/operator construction, generator, symmetric
//!   conjugate, self-loop-removed transport, median bandwidth heuristic
//! - [`observables`] — carré du champ, label-boundary energy, leakage,
//!   coarse class chain and its gap, separation matrices, soft radii
//! - [`bridge`] — closed-form population values for balanced Gaussian
//!   class-conditionals with shared (or per-class) covariance
//! - [`synth`] — simplex-mean Gaussian sampling and the bridge-validation
//!   grid experiment
//! - [`hardgraph`] — mutual k-NN baseline observables and the neighbor-tie
//!   discontinuity witness
//! - [`stability`] — perturbation harness and numeric Lipschitz-bound checks
//! - [`data`] — snapshot CSV and report JSON formats

pub mod bridge;
pub mod data;
pub mod error;
pub mod hardgraph;
pub mod jsonfmt;
pub mod linalg;
pub mod observables;
pub mod operator;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};

// re-export the matrix types used across the public API
pub use nalgebra;
