//! Design and evaluation of digital coupling-wave cancelers for full-duplex
//! amplify-and-forward relays.
//!
//! The pipeline is: [`plant`] builds the continuous relay loop, [`lift`]
//! turns it into a single-rate discrete plant, [`synth`] designs the
//! canceler, and [`sim`] plus [`ber`] evaluate it in the time domain.

pub mod ber;
pub mod config;
mod error;
pub mod export;
pub mod lift;
pub mod plant;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
