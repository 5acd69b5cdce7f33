//! Numerical twin of an audio-driven Hopf oscillator reservoir computer.
//!
//! The crate is `no_std` (with `alloc`) and holds every pure algorithm of the
//! pipeline:
//!
//! * [`reservoir`]: the forced Hopf oscillator, fixed-step RK4 integration and
//!   virtual-node sampling of its `x` state.
//! * [`audio`]: clip normalization, resampling, calibrated noise injection,
//!   signal synthesis and stratified dataset splits.
//! * [`features`]: inverse-hyperbolic-tangent activation, feature-map
//!   assembly, the Mel-spectrogram baseline and map distances.
//! * [`readout`]: a small convolutional network trained with Adam, layer
//!   freezing for reconfiguration, and a closed-form ridge readout.
//!
//! File formats, configuration and the experiment CLI live in the companion
//! `hopfrc` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audio;
pub mod error;
pub mod features;
pub mod fft;
pub mod readout;
pub mod reservoir;
pub mod rng;

pub use error::{Error, Result};
