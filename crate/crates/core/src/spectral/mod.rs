//! Band power and coherence features.

mod hilbert;
mod matrix;
mod msc;
mod pib;
mod welch;

pub use hilbert::{analytic_signal, AnalyticTransform};
pub use matrix::{FeatureColumn, FeatureMatrix, RowKey, RowMeta};
pub use msc::{
    canonical_pairs, extract_msc_matrix, msc, msc_columns, MscAggregate, MscExtractor, MscFeature, MscParams, MscValue,
};
pub use pib::{extract_pib_matrix, pib, pib_columns, PibExtractor, PibFeature, PibOptions};
pub use welch::{hann_periodic, welch_spectra, Csd, Psd, SegmentSpectra, WelchEngine};
