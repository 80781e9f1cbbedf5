//! Simulate perovskite solar-cell EQE spectra and invert layer thicknesses.
//!
//! The crate is an end-to-end desk-scale pipeline:
//!
//! 1. [`materials`] loads tabulated complex refractive indices.
//! 2. [`tmm`] solves stack optics and produces EQE spectra.
//! 3. [`sampling`] draws thickness vectors from constraint boxes with
//!    random, Halton, Sobol, or Latin-hypercube generators.
//! 4. [`dataset`] turns samples into rasterized EQE images plus normalized
//!    thickness targets, split and checksummed on disk.
//! 5. [`nn`] trains a small from-scratch convolutional network to regress
//!    thicknesses from the images.
//! 6. [`hyperopt`] tunes the trainer with a Gaussian-process surrogate and
//!    expected improvement.
//! 7. [`eval`] reports per-layer and overall RMSE in nm against baselines.
//!
//! The `eqeinv` binary exposes the same pipeline as `generate`, `train`,
//! `tune`, `eval`, and `predict` subcommands; see the book under `book/` for
//! a guided tour. Code snippets in the book mirror this crate's doc-tests.
//!
//! ```
//! use eqeinv::materials::synthetic;
//! use eqeinv::tmm::{self, Layer, LayerStack};
//! use std::sync::Arc;
//!
//! let absorber = Arc::new(synthetic::lorentz_absorber("abs", 4.0, 1.3, 2.6, 0.35));
//! let air = Arc::new(synthetic::constant("air", 1.0, 0.0));
//! let stack = LayerStack::new(
//!     vec![Layer::new(absorber, 400.0)],
//!     air.clone(),
//!     air,
//!     0,
//!     false,
//! )?;
//! let eqe = tmm::compute_default_eqe(&stack)?;
//! assert_eq!(eqe.wavelengths_nm().len(), 101);
//! assert!(eqe.forward().iter().all(|&v| (0.0..=1.0).contains(&v)));
//! # Ok::<(), eqeinv::tmm::TmmError>(())
//! ```

pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod hyperopt;
pub mod materials;
pub mod nn;
pub mod sampling;
pub mod tmm;
