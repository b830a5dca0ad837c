//! Power-in-band: total squared Hilbert envelope of a band-passed signal.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{BandName, BandSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{FilterMode, SosFilter, Window};
use crate::spectral::{AnalyticTransform, FeatureColumn, FeatureMatrix, RowKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PibOptions {
    /// Prototype order of the band-pass (poles = 2 x order).
    pub filter_order: usize,
    /// Leading seconds of each filtered window left out of the sum.
    pub discard_s: f64,
    pub mode: FilterMode,
}

impl Default for PibOptions {
    fn default() -> Self {
        PibOptions {
            filter_order: 2,
            discard_s: 0.5,
            mode: FilterMode::Causal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PibFeature<T> {
    pub channel: String,
    pub band: BandName,
    pub value: T,
}

/// Cached band-pass filters and FFT plans for repeated PIB evaluation.
pub struct PibExtractor<T: Scalar> {
    sample_rate_hz: f64,
    bands: Vec<BandSpec>,
    filters: Vec<SosFilter>,
    opts: PibOptions,
    transforms: HashMap<usize, AnalyticTransform<T>>,
    buf: Vec<T>,
}

impl<T: Scalar> PibExtractor<T> {
    pub fn new(bands: &[BandSpec], sample_rate_hz: f64, opts: PibOptions) -> Result<Self> {
        if !(opts.discard_s >= 0.0) {
            return Err(Error::invalid(format!(
                "discard must be >= 0 s, got {}",
                opts.discard_s
            )));
        }
        let filters = bands
            .iter()
            .map(|b| {
                b.validate(sample_rate_hz)?;
                SosFilter::butter_bandpass(opts.filter_order, b.low_hz, b.high_hz, sample_rate_hz)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PibExtractor {
            sample_rate_hz,
            bands: bands.to_vec(),
            filters,
            opts,
            transforms: HashMap::new(),
            buf: Vec::new(),
        })
    }

    pub fn bands(&self) -> &[BandSpec] {
        &self.bands
    }

    fn discard_samples(&self) -> usize {
        (self.opts.discard_s * self.sample_rate_hz).round() as usize
    }

    /// PIB of `x` for band index `b`.
    pub fn band_power(&mut self, x: &[T], b: usize) -> Result<T> {
        let min_len = self.sample_rate_hz.round() as usize;
        if x.len() < min_len {
            return Err(Error::invalid(format!(
                "PIB needs at least 1 s of samples ({min_len}), got {}",
                x.len()
            )));
        }
        let skip = self.discard_samples();
        if skip >= x.len() {
            return Err(Error::invalid(format!(
                "discarding {skip} samples leaves nothing of a {}-sample window",
                x.len()
            )));
        }
        self.buf.clear();
        self.buf.extend_from_slice(x);
        self.filters[b].apply_in_place(&mut self.buf, self.opts.mode);
        let n = x.len();
        let transform = self.transforms.entry(n).or_insert_with(|| AnalyticTransform::new(n));
        let z = transform.transform(&self.buf);
        let total: f64 = z[skip..].iter().map(|c| c.norm_sqr().as_f64()).sum();
        Ok(T::lit(total))
    }

    /// Features of one window in channel-major, band-minor order.
    pub fn window_features(&mut self, window: ArrayView2<'_, T>) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(window.nrows() * self.bands.len());
        let mut row_buf = Vec::new();
        for row in window.rows() {
            let x: &[T] = match row.as_slice() {
                Some(s) => s,
                None => {
                    row_buf.clear();
                    row_buf.extend(row.iter().copied());
                    &row_buf
                }
            };
            for b in 0..self.bands.len() {
                out.push(self.band_power(x, b)?);
            }
        }
        Ok(out)
    }
}

/// PIB of a single channel segment.
pub fn pib<T: Scalar>(x: &[T], band: &BandSpec, sample_rate_hz: f64, opts: &PibOptions) -> Result<T> {
    PibExtractor::new(std::slice::from_ref(band), sample_rate_hz, *opts)?.band_power(x, 0)
}

pub fn pib_columns(channel_names: &[String], bands: &[BandSpec]) -> Vec<FeatureColumn> {
    channel_names
        .iter()
        .flat_map(|c| {
            bands.iter().map(move |b| FeatureColumn::Pib {
                channel: c.clone(),
                band: b.name,
            })
        })
        .collect()
}

/// One row per window, one column per (channel, band).
pub fn extract_pib_matrix<T: Scalar>(
    windows: &[Window<T>],
    channel_names: &[String],
    bands: &[BandSpec],
    sample_rate_hz: f64,
    opts: &PibOptions,
) -> Result<FeatureMatrix<T>> {
    for w in windows {
        if w.samples.nrows() != channel_names.len() {
            return Err(Error::invalid(format!(
                "window ({}, {}) has {} channels, expected {}",
                w.trial_id,
                w.window_index,
                w.samples.nrows(),
                channel_names.len()
            )));
        }
    }
    // Validate once up front so the parallel section only sees data errors.
    PibExtractor::<T>::new(bands, sample_rate_hz, *opts)?;
    let rows: Vec<Vec<T>> = windows
        .par_iter()
        .map_init(
            || PibExtractor::new(bands, sample_rate_hz, *opts).expect("validated above"),
            |ex, w| ex.window_features(w.samples.view()),
        )
        .collect::<Result<_>>()?;
    let n_cols = channel_names.len() * bands.len();
    let mut values = Array2::zeros((windows.len(), n_cols));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }
    let keys = windows
        .iter()
        .map(|w| RowKey {
            trial_id: w.trial_id,
            window_index: w.window_index,
        })
        .collect();
    FeatureMatrix::new(values, pib_columns(channel_names, bands), keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine(freq: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).cos()).collect()
    }

    #[test]
    fn zero_signal_has_zero_power() {
        for band in BandSpec::canonical() {
            let v = pib(&[0.0f64; 5000], &band, 500.0, &PibOptions::default()).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn homogeneity() {
        let x: Vec<f64> = (0..5000)
            .map(|i| (i as f64 * 0.13).sin() + ((i * 17) % 7) as f64 * 0.1)
            .collect();
        let opts = PibOptions::default();
        let base = pib(&x, &BandSpec::BETA, 500.0, &opts).unwrap();
        for c in [0.5, -3.0, 1e3] {
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let v = pib(&scaled, &BandSpec::BETA, 500.0, &opts).unwrap();
            assert!((v - c * c * base).abs() <= 1e-9 * c * c * base);
        }
    }

    #[test]
    fn short_input_rejected() {
        assert!(pib(&[1.0f64; 499], &BandSpec::ALPHA, 500.0, &PibOptions::default()).is_err());
        assert!(pib(&[1.0f64; 5000], &BandSpec::HIGH_GAMMA, 400.0, &PibOptions::default()).is_err());
    }

    #[test]
    fn matrix_layout() {
        let x = cosine(10.0, 5000, 500.0);
        let samples = Array2::from_shape_fn((2, 5000), |(c, t)| x[t] * (c + 1) as f64);
        let windows = vec![Window {
            trial_id: 4,
            window_index: 2,
            samples,
        }];
        let names = vec!["A".to_string(), "B".to_string()];
        let m = extract_pib_matrix(&windows, &names, &BandSpec::canonical(), 500.0, &PibOptions::default()).unwrap();
        assert_eq!(m.values().dim(), (1, 12));
        assert_eq!(m.column_names()[0], "PIB:A:delta");
        assert_eq!(m.column_names()[8], "PIB:B:alpha");
        assert!((m.values()[[0, 8]] - 4.0 * m.values()[[0, 2]]).abs() < 1e-9 * m.values()[[0, 8]]);
        assert_eq!(
            m.rows()[0],
            RowKey {
                trial_id: 4,
                window_index: 2
            }
        );
        let bad = extract_pib_matrix(
            &windows,
            &names[..1],
            &BandSpec::canonical(),
            500.0,
            &PibOptions::default(),
        );
        assert!(bad.is_err());
    }
}
