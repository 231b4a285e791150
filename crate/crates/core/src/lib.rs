//! Simulation, certification and extraction for source-device-independent
//! quantum random number generators with an arbitrary generation splitter.
//!
//! The crate is organised along the signal chain:
//!
//! * [`optics`] samples photon numbers, splitters, detectors and the ADC;
//! * [`certification`] evaluates the min-entropy bound and failure budget;
//! * [`models`] holds the device-dependent and ASE comparison models;
//! * [`extractor`] implements Toeplitz hashing and ε accounting;
//! * [`pipeline`] runs whole protocol instances, power sweeps and the
//!   light-injection experiment;
//! * [`stats`] is a small statistical battery for output smoke tests.

pub mod certification;
pub mod error;
pub mod extractor;
pub mod models;
pub mod optics;
pub mod pipeline;
pub mod presets;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
