//! Phase-space simulation of molecular dissociation into correlated atom pairs in one
//! dimension: positive-P and truncated Wigner stochastic fields, and a pairing mean-field
//! theory, together with the observables computed from them.
//!
//! Works without `std` (with `alloc`); enable the `std` feature for faster math routines.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod fft;
pub mod grid;
pub mod hfb;
pub mod observables;
pub mod positive_p;
pub mod system;
pub mod twa;

pub type C64 = num_complex::Complex<f64>;

pub use config::{validate, GridSpec, Method, PhysicalParams, RunConfig, ValidatedConfig, ValidationError};
pub use system::System;
