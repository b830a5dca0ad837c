//! Pain-state classification from multichannel intracranial recordings:
//! IIR preprocessing, band power and coherence features, mutual-information
//! electrode selection, three classifiers, a balanced repeated-holdout
//! protocol and importance-weighted electrode networks.
//!
//! Signal and feature containers are generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix the common choices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod classifiers;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod network;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod signal;
pub mod spectral;

pub use bands::{BandName, BandSpec};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Recording = signal::Recording<f64>;
pub type Recording32 = signal::Recording<f32>;
pub type FeatureMatrix = spectral::FeatureMatrix<f64>;
pub type FeatureMatrix32 = spectral::FeatureMatrix<f32>;
pub type Prepared = pipeline::Prepared<f64>;
pub type Prepared32 = pipeline::Prepared<f32>;
pub type SynthOutput = datagen::SynthOutput<f64>;
pub type SynthOutput32 = datagen::SynthOutput<f32>;
