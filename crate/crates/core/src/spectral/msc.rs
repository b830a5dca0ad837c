//! Band-level magnitude-squared coherence from Welch estimates.

use std::collections::{BTreeMap, HashSet};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::{BandName, BandSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::Window;
use crate::spectral::{FeatureColumn, FeatureMatrix, RowKey, SegmentSpectra, WelchEngine};

/// How per-bin coherence is reduced to one value per band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MscAggregate {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MscParams {
    pub segment_s: f64,
    pub overlap_fraction: f64,
    pub aggregate: MscAggregate,
}

impl Default for MscParams {
    fn default() -> Self {
        MscParams {
            segment_s: 1.0,
            overlap_fraction: 0.5,
            aggregate: MscAggregate::Mean,
        }
    }
}

impl MscParams {
    pub fn segment_len(&self, sample_rate_hz: f64) -> usize {
        (self.segment_s * sample_rate_hz).round() as usize
    }
}

/// Band coherence. `degenerate` is set when some bin had zero power on a side
/// and was counted as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MscValue<T> {
    pub value: T,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MscFeature<T> {
    pub channel_a: String,
    pub channel_b: String,
    pub band: BandName,
    pub value: T,
    pub degenerate: bool,
}

/// Per-window coherence for arbitrary channel pairs, reusing each channel's
/// segment spectra across all pairs that involve it.
pub struct MscExtractor<T: Scalar> {
    engine: WelchEngine<T>,
    band_bins: Vec<Vec<usize>>,
    aggregate: MscAggregate,
}

impl<T: Scalar> MscExtractor<T> {
    pub fn new(bands: &[BandSpec], sample_rate_hz: f64, params: &MscParams) -> Result<Self> {
        let engine = WelchEngine::new(
            params.segment_len(sample_rate_hz),
            params.overlap_fraction,
            sample_rate_hz,
        )?;
        let freqs = engine.frequencies_hz();
        let band_bins = bands
            .iter()
            .map(|b| {
                b.validate(sample_rate_hz)?;
                let bins: Vec<usize> = (0..freqs.len()).filter(|&k| b.contains(freqs[k])).collect();
                if bins.is_empty() {
                    return Err(Error::invalid(format!(
                        "band {} contains no Welch bins at {:.3} Hz resolution",
                        b.name, freqs[1]
                    )));
                }
                Ok(bins)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MscExtractor {
            engine,
            band_bins,
            aggregate: params.aggregate,
        })
    }

    pub fn n_bands(&self) -> usize {
        self.band_bins.len()
    }

    pub fn spectra(&mut self, x: &[T]) -> Result<SegmentSpectra<T>> {
        let s = self.engine.spectra(x)?;
        if s.segments < 2 {
            return Err(Error::invalid(format!(
                "coherence needs at least 2 Welch segments, got {}",
                s.segments
            )));
        }
        Ok(s)
    }

    /// Band coherence of two precomputed spectra, one value per band.
    pub fn band_coherence(&self, a: &SegmentSpectra<T>, b: &SegmentSpectra<T>) -> Vec<MscValue<T>> {
        self.band_bins
            .iter()
            .map(|bins| {
                let mut degenerate = false;
                let per_bin = bins.iter().map(|&k| {
                    let mut sxx = 0.0f64;
                    let mut syy = 0.0f64;
                    let mut re = 0.0f64;
                    let mut im = 0.0f64;
                    for s in 0..a.segments {
                        let xa = a.segment(s)[k];
                        let xb = b.segment(s)[k];
                        let (ar, ai, br, bi) = (xa.re.as_f64(), xa.im.as_f64(), xb.re.as_f64(), xb.im.as_f64());
                        sxx += ar * ar + ai * ai;
                        syy += br * br + bi * bi;
                        // conj(a) * b
                        re += ar * br + ai * bi;
                        im += ar * bi - ai * br;
                    }
                    let den = sxx * syy;
                    if !(den > 0.0) || !den.is_finite() {
                        degenerate = true;
                        0.0
                    } else {
                        ((re * re + im * im) / den).clamp(0.0, 1.0)
                    }
                });
                let value = match self.aggregate {
                    MscAggregate::Mean => per_bin.sum::<f64>() / bins.len() as f64,
                    MscAggregate::Max => per_bin.fold(0.0, f64::max),
                };
                MscValue {
                    value: T::lit(value),
                    degenerate,
                }
            })
            .collect()
    }

    /// Pair-major, band-minor coherence values for the given channel index
    /// pairs of one window.
    pub fn window_features(&mut self, window: ArrayView2<'_, T>, pairs: &[(usize, usize)]) -> Result<Vec<MscValue<T>>> {
        let mut needed: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        needed.sort_unstable();
        needed.dedup();
        let mut spectra = BTreeMap::new();
        let mut row_buf = Vec::new();
        for c in needed {
            let row = window.row(c);
            let x: &[T] = match row.as_slice() {
                Some(s) => s,
                None => {
                    row_buf.clear();
                    row_buf.extend(row.iter().copied());
                    &row_buf
                }
            };
            spectra.insert(c, self.spectra(x)?);
        }
        let mut out = Vec::with_capacity(pairs.len() * self.n_bands());
        for (a, b) in pairs {
            out.extend(self.band_coherence(&spectra[a], &spectra[b]));
        }
        Ok(out)
    }
}

/// Band coherence of two equal-length signals.
pub fn msc<T: Scalar>(
    x: &[T],
    y: &[T],
    band: &BandSpec,
    sample_rate_hz: f64,
    params: &MscParams,
) -> Result<MscValue<T>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "signal lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut ex = MscExtractor::new(std::slice::from_ref(band), sample_rate_hz, params)?;
    let sx = ex.spectra(x)?;
    let sy = ex.spectra(y)?;
    Ok(ex.band_coherence(&sx, &sy)[0])
}

/// Unordered pairs of `selected`, each with the lexicographically smaller
/// name first, sorted.
pub fn canonical_pairs(selected: &[String]) -> Result<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    for s in selected {
        if !seen.insert(s.as_str()) {
            return Err(Error::invalid(format!("channel `{s}` selected twice")));
        }
    }
    let mut names: Vec<&String> = selected.iter().collect();
    names.sort();
    let mut pairs = Vec::with_capacity(names.len() * names.len().saturating_sub(1) / 2);
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            pairs.push((names[i].clone(), names[j].clone()));
        }
    }
    Ok(pairs)
}

pub fn msc_columns(pairs: &[(String, String)], bands: &[BandSpec]) -> Vec<FeatureColumn> {
    pairs
        .iter()
        .flat_map(|(a, b)| {
            bands.iter().map(move |band| FeatureColumn::Msc {
                a: a.clone(),
                b: b.clone(),
                band: band.name,
            })
        })
        .collect()
}

/// One row per window, one column per (selected pair, band).
pub fn extract_msc_matrix<T: Scalar>(
    windows: &[Window<T>],
    channel_names: &[String],
    bands: &[BandSpec],
    selected: &[String],
    sample_rate_hz: f64,
    params: &MscParams,
) -> Result<FeatureMatrix<T>> {
    if selected.len() < 2 {
        return Err(Error::invalid(format!(
            "coherence needs at least 2 selected channels, got {}",
            selected.len()
        )));
    }
    let pairs = canonical_pairs(selected)?;
    let index = |name: &str| {
        channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("selected channel `{name}` not among window channels")))
    };
    let idx_pairs = pairs
        .iter()
        .map(|(a, b)| Ok((index(a)?, index(b)?)))
        .collect::<Result<Vec<_>>>()?;
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
    MscExtractor::<T>::new(bands, sample_rate_hz, params)?;
    let rows: Vec<Vec<MscValue<T>>> = windows
        .par_iter()
        .map_init(
            || MscExtractor::new(bands, sample_rate_hz, params).expect("validated above"),
            |ex, w| ex.window_features(w.samples.view(), &idx_pairs),
        )
        .collect::<Result<_>>()?;
    let n_cols = pairs.len() * bands.len();
    let mut values = Array2::zeros((windows.len(), n_cols));
    let mut degenerate = 0;
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            values[[i, j]] = v.value;
            degenerate += v.degenerate as usize;
        }
    }
    let keys = windows
        .iter()
        .map(|w| RowKey {
            trial_id: w.trial_id,
            window_index: w.window_index,
        })
        .collect();
    let mut m = FeatureMatrix::new(values, msc_columns(&pairs, bands), keys)?;
    m.set_degenerate_count(degenerate);
    Ok(m)
}
