#![no_std]
//! Magic angles, exact trace certificates and flat-band topology for the chiral
//! model of twisted bilayer graphene.

extern crate alloc;

pub mod algebra;
pub mod error;
pub mod potential;

pub use error::{Error, Result};
pub mod fourier_ops;
pub mod linalg;
pub mod spectral;
pub mod traces;
pub mod bands;
pub mod theta;
pub mod chern;
