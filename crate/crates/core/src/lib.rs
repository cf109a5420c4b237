//! Scalar wave optics and two-photon coincidence imaging.
//!
//! Fields are sampled on square grids ([`field`]) and carried through
//! free space, lenses and masks ([`propagation`]). Coincidence rates follow
//! from the pump field seen through the unfolded two-photon path
//! ([`biphoton`]); [`paraxial`] designs the collimating relays and
//! [`counting`] adds photon-counting noise. [`scenario`] and [`run`] tie
//! these together behind JSON scenario files.

// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod compare;
pub mod counting;
pub mod error;
pub mod field;
pub mod focus;
pub mod paraxial;
pub mod propagation;
pub mod run;
pub mod scenario;

pub use error::{Error, Result};
