//! Clock calibration for crystal-free IEEE 802.15.4 radios.
//!
//! A mote without a crystal must find the beacon channel from an arbitrary
//! cold-start frequency, calibrate its 2 MHz chipping clock against beacon
//! timing, and then keep its RF local oscillator on frequency as temperature
//! moves. This crate provides the oscillator and environment models, the
//! calibration state machines, and a deterministic discrete-event simulator
//! that ties them together.
//!
//! - [`clock`]: tunable oscillators, ppm arithmetic, frequency noise
//! - [`environment`]: temperature profiles and chamber imperfections
//! - [`airlink`]: beacon source, reception model, chipping tick counter
//! - [`calibration`]: channel sweep, fast/fine chipping calibration, IF tracking
//! - [`sim`]: scenario files, event loop, CSV traces, summaries

// `!(x > 0.0)` style checks are kept so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airlink;
pub mod calibration;
pub mod clock;
pub mod environment;
pub mod error;
pub mod sim;

pub use error::{Error, Result};
