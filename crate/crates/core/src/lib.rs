//! Statistical parameter privacy by model randomization.
//!
//! A private parameter `theta` selects the law of a measurement sequence. The
//! privacy filter has two parts:
//!
//! * a **randomizer** ([`randomizer`]) that draws a pseudo parameter from a
//!   column-stochastic kernel chosen to minimize expected distortion subject
//!   to a mutual-information budget between the parameter and its pseudo
//!   value, and
//! * a **transform** ([`transform`]) that maps every measurement through the
//!   conditional CDF of the true model and the inverse conditional CDF of the
//!   pseudo model, so the disguised sequence is distributed exactly as data
//!   from the pseudo model.
//!
//! [`gauss_markov`] specializes the conditional laws to linear-Gaussian
//! state-space models via one-step Kalman prediction; [`infotheory`] holds the
//! leakage bounds and [`adversary`] the occupancy-style estimators used to
//! evaluate the filter empirically.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

mod error;

pub mod adversary;
pub mod gauss_markov;
pub mod infotheory;
pub mod model;
pub mod normal;
pub mod randomizer;
pub mod seed;
pub mod tail;
pub mod transform;

pub use error::{Error, Result};
pub use model::{ModelDescriptor, ModelHandle, ModelRegistry, ParameterPrior};
