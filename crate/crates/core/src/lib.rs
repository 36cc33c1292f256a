//! Modulation-classification workbench.
//!
//! The crate covers the whole pipeline: clean baseband synthesis for 26
//! modulation types ([`modulation`], [`shaping`], [`synth`]), tapped-delay-line
//! fading with calibrated AWGN ([`channel`]), dataset generation, splitting and
//! the `HisarIQ` container ([`dataset`]), the CNN family classifier
//! ([`model`]) and accuracy/confusion reporting ([`eval`]).

pub mod channel;
pub mod dataset;
mod error;
pub mod eval;
pub mod model;
pub mod modulation;
pub mod seed;
pub mod shaping;
pub mod synth;
pub mod waveform;

pub use error::{Error, Result};
pub use modulation::{Family, ModulationSpec, Variant};
pub use waveform::Waveform;

/// Complex sample type used throughout synthesis.
pub type C64 = num_complex::Complex<f64>;
