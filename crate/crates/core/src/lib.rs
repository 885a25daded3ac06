//! Link-level BER simulation and closed-form evaluation for time-hopped BPSK
//! impulse-radio UWB over the IEEE 802.15.4a indoor-office LOS channel.
//!
//! The crate has two engines sharing one Eb/N0 axis:
//!
//! * [`montecarlo`] draws channels, hop codes, bits and noise, forms the
//!   correlator output in the tap domain ([`modem`]) and counts errors;
//! * [`analysis`] evaluates the Gaussian-approximation SINR from the
//!   interference variances by adaptive quadrature.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod error;
pub mod modem;
pub mod montecarlo;
pub mod pulse;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod validation;

pub use error::{Error, Result};
