//! End-to-end stages shared by the command line and the tests:
//! preprocessing, segmentation with band-power extraction, and per-dataset
//! feature sources.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::BandSpec;
use crate::error::{Error, Result};
use crate::evaluation::{
    ConcatSource, ElectrodeChoice, FeatureSet, FeatureSource, MatrixSource, MscSource, SelectionConfig, SelectionMode,
    WindowProvider,
};
use crate::labeling::{label_dataset, LabelStrategy, LabeledDataset, TrialInfo};
use crate::scalar::Scalar;
use crate::selection::{score_electrodes, select_top_k, ElectrodeSelection};
use crate::signal::{
    hann_symmetric, plan_trials, window_len, FilterMode, PainReport, Recording, SegmentWarning, SosFilter, TrialSpan,
    Window, WINDOWS_PER_TRIAL,
};
use crate::spectral::{extract_msc_matrix, pib_columns, FeatureMatrix, MscParams, PibExtractor, PibOptions, RowKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub notch_hz: Vec<f64>,
    pub notch_q: f64,
    pub lowpass_hz: f64,
    pub lowpass_order: usize,
    pub filter_mode: FilterMode,
    pub drop_zero_channels: bool,
    /// Channels rejected on inspection.
    pub flagged_channels: Vec<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            notch_hz: vec![60.0, 120.0, 180.0],
            notch_q: crate::signal::filter::DEFAULT_NOTCH_Q,
            lowpass_hz: 200.0,
            lowpass_order: 5,
            filter_mode: FilterMode::Causal,
            drop_zero_channels: true,
            flagged_channels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
}

/// Drops unusable channels, then applies the notch cascade and the low-pass
/// filter in place.
pub fn preprocess<T: Scalar>(
    mut rec: Recording<T>,
    cfg: &PreprocessConfig,
) -> Result<(Recording<T>, PreprocessSummary)> {
    let fs = rec.sample_rate_hz();
    let notch = if cfg.notch_hz.is_empty() {
        None
    } else {
        Some(SosFilter::notches(&cfg.notch_hz, cfg.notch_q, fs)?)
    };
    let lowpass = SosFilter::butter_lowpass(cfg.lowpass_order, cfg.lowpass_hz, fs)?;
    if cfg.drop_zero_channels {
        rec.mark_zero_channels();
    }
    rec.flag_channels(&cfg.flagged_channels)?;
    let all = rec.channel_names().to_vec();
    let mut rec = rec.into_usable();
    if rec.n_channels() == 0 {
        return Err(Error::EmptyDataset("no usable channels left".into()));
    }
    let dropped = all.into_iter().filter(|c| rec.channel_index(c).is_none()).collect();
    if let Some(n) = &notch {
        n.apply_recording_in_place(&mut rec, cfg.filter_mode);
    }
    lowpass.apply_recording_in_place(&mut rec, cfg.filter_mode);
    let kept = rec.channel_names().to_vec();
    Ok((rec, PreprocessSummary { kept, dropped }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub bands: Vec<BandSpec>,
    pub pib: PibOptions,
    pub msc: MscParams,
    /// Multiply each analysis window by a Hann taper before band power.
    pub window_taper: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bands: BandSpec::canonical().to_vec(),
            pib: PibOptions::default(),
            msc: MscParams::default(),
            window_taper: false,
        }
    }
}

/// A preprocessed recording cut into trials, with band power for every
/// window of every trial.
pub struct Prepared<T: Scalar> {
    pub provider: Arc<WindowProvider<T>>,
    pub spans: Vec<TrialSpan>,
    pub warnings: Vec<SegmentWarning>,
    pub trials: Vec<TrialInfo>,
    /// Rows in trial order, thirty windows each.
    pub pib: FeatureMatrix<T>,
    pub features: FeatureConfig,
}

pub fn prepare<T: Scalar>(rec: Recording<T>, reports: &[PainReport], features: &FeatureConfig) -> Result<Prepared<T>> {
    let fs = rec.sample_rate_hz();
    for b in &features.bands {
        b.validate(fs)?;
    }
    let (spans, warnings) = plan_trials(rec.n_samples(), fs, reports)?;
    if spans.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "none of {} reports has a full trial in the recording",
            reports.len()
        )));
    }
    let wlen = window_len(fs);
    let provider = WindowProvider::new(rec, &spans, wlen, WINDOWS_PER_TRIAL)?;
    let keys: Vec<RowKey> = spans
        .iter()
        .flat_map(|s| {
            (0..WINDOWS_PER_TRIAL).map(move |w| RowKey {
                trial_id: s.trial_id,
                window_index: w,
            })
        })
        .collect();
    PibExtractor::<T>::new(&features.bands, fs, features.pib)?;
    let taper: Option<Vec<f64>> = features.window_taper.then(|| hann_symmetric(wlen));
    let rows: Vec<Vec<T>> = keys
        .par_iter()
        .map_init(
            || PibExtractor::new(&features.bands, fs, features.pib).expect("validated above"),
            |ex, &key| {
                let w = provider.window(key)?;
                match &taper {
                    None => ex.window_features(w),
                    Some(h) => {
                        let mut owned = w.to_owned();
                        for mut row in owned.rows_mut() {
                            row.iter_mut().zip(h).for_each(|(v, &t)| *v = T::lit(v.as_f64() * t));
                        }
                        ex.window_features(owned.view())
                    }
                }
            },
        )
        .collect::<Result<_>>()?;
    let n_cols = provider.channel_names().len() * features.bands.len();
    let mut values = Array2::zeros((keys.len(), n_cols));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            values[[i, j]] = *v;
        }
    }
    let pib = FeatureMatrix::new(values, pib_columns(provider.channel_names(), &features.bands), keys)?;
    let trials = spans
        .iter()
        .map(|s| TrialInfo {
            trial_id: s.trial_id,
            vas: s.vas,
        })
        .collect();
    Ok(Prepared {
        provider: Arc::new(provider),
        spans,
        warnings,
        trials,
        pib,
        features: features.clone(),
    })
}

impl<T: Scalar> Prepared<T> {
    pub fn channel_names(&self) -> &[String] {
        self.provider.channel_names()
    }

    pub fn dataset(&self, strategy: LabelStrategy) -> Result<LabeledDataset> {
        label_dataset(&self.trials, WINDOWS_PER_TRIAL, strategy)
    }

    /// Same trial windows with VAS scores permuted across trials.
    pub fn with_shuffled_scores(&self, seed: u64) -> Vec<TrialInfo> {
        use rand::seq::SliceRandom;
        let mut vas: Vec<u8> = self.trials.iter().map(|t| t.vas).collect();
        vas.shuffle(&mut crate::rng::rng_for(seed, &[]));
        self.trials
            .iter()
            .zip(vas)
            .map(|(t, vas)| TrialInfo {
                trial_id: t.trial_id,
                vas,
            })
            .collect()
    }

    /// Band-power rows matching the dataset's rows.
    pub fn pib_for(&self, ds: &LabeledDataset) -> Result<FeatureMatrix<T>> {
        let index: std::collections::BTreeMap<RowKey, usize> =
            self.pib.rows().iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let idx = ds
            .rows
            .iter()
            .map(|r| {
                index
                    .get(&RowKey {
                        trial_id: r.trial_id,
                        window_index: r.window_index,
                    })
                    .copied()
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "no band power for trial {} window {}",
                            r.trial_id, r.window_index
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.pib.select_rows(&idx))
    }

    /// Top-k electrodes scored on every row of `ds`.
    pub fn select_electrodes(&self, ds: &LabeledDataset, selection: &SelectionConfig) -> Result<ElectrodeSelection> {
        let pib = self.pib_for(ds)?;
        select_top_k(&score_electrodes(&pib, &ds.labels(), selection.bins)?, selection.k)
    }

    /// Coherence matrix for a fixed selection over the dataset's rows.
    pub fn msc_matrix(&self, ds: &LabeledDataset, selected: &[String]) -> Result<FeatureMatrix<T>> {
        let windows = ds
            .rows
            .iter()
            .map(|r| {
                let key = RowKey {
                    trial_id: r.trial_id,
                    window_index: r.window_index,
                };
                Ok(Window {
                    trial_id: r.trial_id,
                    window_index: r.window_index,
                    samples: self.provider.window(key)?.to_owned(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        extract_msc_matrix(
            &windows,
            self.channel_names(),
            &self.features.bands,
            selected,
            self.provider.sample_rate_hz(),
            &self.features.msc,
        )
    }

    pub fn feature_source(
        &self,
        ds: &LabeledDataset,
        set: FeatureSet,
        selection: &SelectionConfig,
    ) -> Result<Box<dyn FeatureSource<T>>> {
        let pib = self.pib_for(ds)?;
        let msc = || -> Result<MscSource<T>> {
            let choice = match selection.mode {
                SelectionMode::InFold => ElectrodeChoice::PerFold {
                    k: selection.k,
                    bins: selection.bins,
                },
                SelectionMode::WholeDataset => ElectrodeChoice::Fixed(self.select_electrodes(ds, selection)?),
            };
            MscSource::new(
                Arc::clone(&self.provider),
                pib.rows().to_vec(),
                Arc::new(pib.clone()),
                self.features.bands.clone(),
                self.features.msc,
                choice,
            )
        };
        Ok(match set {
            FeatureSet::Pib => Box::new(MatrixSource::new(pib.clone())),
            FeatureSet::Msc => Box::new(msc()?),
            FeatureSet::Both => Box::new(ConcatSource::new(vec![
                Box::new(MatrixSource::new(pib.clone())),
                Box::new(msc()?),
            ])?),
        })
    }
}
