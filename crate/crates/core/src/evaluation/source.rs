//! Per-fold feature construction. Sources that fit anything on data (the
//! electrode selection feeding coherence features) only see the rows they
//! are handed.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use crate::bands::BandSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::{score_electrodes, select_top_k, ElectrodeSelection};
use crate::signal::{Recording, TrialSpan};
use crate::spectral::{canonical_pairs, msc_columns, FeatureColumn, FeatureMatrix, MscExtractor, MscParams, RowKey};

#[derive(Debug, Clone)]
pub struct FoldFeatures<T> {
    pub train: Array2<T>,
    pub test: Array2<T>,
    pub columns: Vec<FeatureColumn>,
    /// Rows whose labels shaped the features, if any were used.
    pub fitted_rows: Option<Vec<usize>>,
    pub selection: Option<ElectrodeSelection>,
    pub degenerate: usize,
}

pub trait FeatureSource<T: Scalar>: Send + Sync {
    /// Number of dataset rows this source covers.
    fn n_rows(&self) -> usize;

    /// Builds train and test matrices. `fit_rows` are the rows any
    /// label-dependent stage may look at; `labels` covers every dataset row.
    fn fold_features(
        &self,
        fit_rows: &[usize],
        train_rows: &[usize],
        test_rows: &[usize],
        labels: &[usize],
    ) -> Result<FoldFeatures<T>>;
}

/// A precomputed matrix whose rows line up with the dataset rows.
#[derive(Debug, Clone)]
pub struct MatrixSource<T> {
    matrix: FeatureMatrix<T>,
}

impl<T: Scalar> MatrixSource<T> {
    pub fn new(matrix: FeatureMatrix<T>) -> Self {
        MatrixSource { matrix }
    }

    pub fn matrix(&self) -> &FeatureMatrix<T> {
        &self.matrix
    }
}

impl<T: Scalar> FeatureSource<T> for MatrixSource<T> {
    fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    fn fold_features(
        &self,
        _fit: &[usize],
        train_rows: &[usize],
        test_rows: &[usize],
        _labels: &[usize],
    ) -> Result<FoldFeatures<T>> {
        check_rows(self.n_rows(), train_rows.iter().chain(test_rows))?;
        let v = self.matrix.values();
        Ok(FoldFeatures {
            train: v.select(ndarray::Axis(0), train_rows),
            test: v.select(ndarray::Axis(0), test_rows),
            columns: self.matrix.columns().to_vec(),
            fitted_rows: None,
            selection: None,
            degenerate: self.matrix.degenerate_count(),
        })
    }
}

fn check_rows<'a>(n: usize, mut rows: impl Iterator<Item = &'a usize>) -> Result<()> {
    match rows.find(|&&r| r >= n) {
        Some(r) => Err(Error::invalid(format!("row {r} outside feature source of {n} rows"))),
        None => Ok(()),
    }
}

/// Window access into a preprocessed recording without copying the windows.
#[derive(Debug, Clone)]
pub struct WindowProvider<T> {
    recording: Recording<T>,
    trial_starts: BTreeMap<usize, usize>,
    window_len: usize,
    windows_per_trial: usize,
}

impl<T: Scalar> WindowProvider<T> {
    pub fn new(
        recording: Recording<T>,
        spans: &[TrialSpan],
        window_len: usize,
        windows_per_trial: usize,
    ) -> Result<Self> {
        let mut trial_starts = BTreeMap::new();
        for span in spans {
            if span.len < window_len * windows_per_trial || span.start + span.len > recording.n_samples() {
                return Err(Error::invalid(format!(
                    "trial {} does not fit the recording",
                    span.trial_id
                )));
            }
            trial_starts.insert(span.trial_id, span.start);
        }
        Ok(WindowProvider {
            recording,
            trial_starts,
            window_len,
            windows_per_trial,
        })
    }

    pub fn recording(&self) -> &Recording<T> {
        &self.recording
    }

    pub fn channel_names(&self) -> &[String] {
        self.recording.channel_names()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.recording.sample_rate_hz()
    }

    pub fn window(&self, key: RowKey) -> Result<ArrayView2<'_, T>> {
        let start = self
            .trial_starts
            .get(&key.trial_id)
            .ok_or_else(|| Error::invalid(format!("unknown trial {}", key.trial_id)))?;
        if key.window_index >= self.windows_per_trial {
            return Err(Error::invalid(format!(
                "window index {} out of range",
                key.window_index
            )));
        }
        let a = start + key.window_index * self.window_len;
        Ok(self.recording.samples().slice(s![.., a..a + self.window_len]))
    }
}

/// How the electrodes feeding the coherence features are chosen.
#[derive(Debug, Clone)]
pub enum ElectrodeChoice {
    /// Mutual-information top-k fitted on each fold's rows.
    PerFold { k: usize, bins: usize },
    /// A selection fixed in advance.
    Fixed(ElectrodeSelection),
}

type PairColumn<T> = Arc<(Vec<T>, usize)>;

/// Coherence features for the top-k electrodes, computed lazily per pair
/// over all dataset rows and cached.
pub struct MscSource<T: Scalar> {
    provider: Arc<WindowProvider<T>>,
    rows: Vec<RowKey>,
    pib: Arc<FeatureMatrix<T>>,
    bands: Vec<BandSpec>,
    params: MscParams,
    choice: ElectrodeChoice,
    cache: Mutex<BTreeMap<(usize, usize), PairColumn<T>>>,
}

impl<T: Scalar> MscSource<T> {
    /// `pib` must have one row per entry of `rows`; it is only used to score
    /// electrodes.
    pub fn new(
        provider: Arc<WindowProvider<T>>,
        rows: Vec<RowKey>,
        pib: Arc<FeatureMatrix<T>>,
        bands: Vec<BandSpec>,
        params: MscParams,
        choice: ElectrodeChoice,
    ) -> Result<Self> {
        if pib.n_rows() != rows.len() {
            return Err(Error::invalid("band-power matrix rows do not match dataset rows"));
        }
        MscExtractor::<T>::new(&bands, provider.sample_rate_hz(), &params)?;
        Ok(MscSource {
            provider,
            rows,
            pib,
            bands,
            params,
            choice,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn select(&self, fit_rows: &[usize], labels: &[usize]) -> Result<ElectrodeSelection> {
        match &self.choice {
            ElectrodeChoice::Fixed(sel) => Ok(sel.clone()),
            ElectrodeChoice::PerFold { k, bins } => {
                let sub = self.pib.select_rows(fit_rows);
                let y: Vec<usize> = fit_rows.iter().map(|&r| labels[r]).collect();
                select_top_k(&score_electrodes(&sub, &y, *bins)?, *k)
            }
        }
    }

    fn pair_columns(&self, pairs: &[(usize, usize)]) -> Result<Vec<PairColumn<T>>> {
        let missing: Vec<(usize, usize)> = {
            let cache = self.cache.lock().expect("cache lock");
            pairs.iter().copied().filter(|p| !cache.contains_key(p)).collect()
        };
        if !missing.is_empty() {
            let nb = self.bands.len();
            let fs = self.provider.sample_rate_hz();
            let per_row: Vec<Vec<_>> = self
                .rows
                .par_iter()
                .map_init(
                    || MscExtractor::new(&self.bands, fs, &self.params).expect("validated in constructor"),
                    |ex, &key| ex.window_features(self.provider.window(key)?, &missing),
                )
                .collect::<Result<_>>()?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (p, pair) in missing.iter().enumerate() {
                let mut values = Vec::with_capacity(self.rows.len() * nb);
                let mut degenerate = 0;
                for row in &per_row {
                    for v in &row[p * nb..(p + 1) * nb] {
                        values.push(v.value);
                        degenerate += v.degenerate as usize;
                    }
                }
                cache.insert(*pair, Arc::new((values, degenerate)));
            }
        }
        let cache = self.cache.lock().expect("cache lock");
        Ok(pairs.iter().map(|p| Arc::clone(&cache[p])).collect())
    }

    fn assemble(&self, cols: &[PairColumn<T>], rows: &[usize]) -> Array2<T> {
        let nb = self.bands.len();
        let mut out = Array2::zeros((rows.len(), cols.len() * nb));
        for (i, &r) in rows.iter().enumerate() {
            for (p, col) in cols.iter().enumerate() {
                for b in 0..nb {
                    out[[i, p * nb + b]] = col.0[r * nb + b];
                }
            }
        }
        out
    }
}

impl<T: Scalar> FeatureSource<T> for MscSource<T> {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn fold_features(
        &self,
        fit_rows: &[usize],
        train_rows: &[usize],
        test_rows: &[usize],
        labels: &[usize],
    ) -> Result<FoldFeatures<T>> {
        check_rows(self.n_rows(), fit_rows.iter().chain(train_rows).chain(test_rows))?;
        let selection = self.select(fit_rows, labels)?;
        if selection.channels.len() < 2 {
            return Err(Error::invalid("coherence features need at least 2 selected electrodes"));
        }
        let pairs = canonical_pairs(&selection.channels)?;
        let names = self.provider.channel_names();
        let index = |n: &str| {
            names
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| Error::invalid(format!("selected electrode `{n}` not in recording")))
        };
        let idx_pairs = pairs
            .iter()
            .map(|(a, b)| Ok((index(a)?, index(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let cols = self.pair_columns(&idx_pairs)?;
        Ok(FoldFeatures {
            train: self.assemble(&cols, train_rows),
            test: self.assemble(&cols, test_rows),
            columns: msc_columns(&pairs, &self.bands),
            fitted_rows: match self.choice {
                ElectrodeChoice::PerFold { .. } => Some(fit_rows.to_vec()),
                ElectrodeChoice::Fixed(_) => None,
            },
            degenerate: cols.iter().map(|c| c.1).sum(),
            selection: Some(selection),
        })
    }
}

/// Horizontal concatenation of several sources, in order.
pub struct ConcatSource<T: Scalar> {
    parts: Vec<Box<dyn FeatureSource<T>>>,
}

impl<T: Scalar> ConcatSource<T> {
    pub fn new(parts: Vec<Box<dyn FeatureSource<T>>>) -> Result<Self> {
        let n = parts
            .first()
            .map(|p| p.n_rows())
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        if parts.iter().any(|p| p.n_rows() != n) {
            return Err(Error::invalid("concatenated sources cover different rows"));
        }
        Ok(ConcatSource { parts })
    }
}

impl<T: Scalar> FeatureSource<T> for ConcatSource<T> {
    fn n_rows(&self) -> usize {
        self.parts[0].n_rows()
    }

    fn fold_features(
        &self,
        fit_rows: &[usize],
        train_rows: &[usize],
        test_rows: &[usize],
        labels: &[usize],
    ) -> Result<FoldFeatures<T>> {
        let mut out: Option<FoldFeatures<T>> = None;
        for part in &self.parts {
            let f = part.fold_features(fit_rows, train_rows, test_rows, labels)?;
            out = Some(match out {
                None => f,
                Some(acc) => FoldFeatures {
                    train: ndarray::concatenate![ndarray::Axis(1), acc.train, f.train],
                    test: ndarray::concatenate![ndarray::Axis(1), acc.test, f.test],
                    columns: acc.columns.into_iter().chain(f.columns).collect(),
                    fitted_rows: match (acc.fitted_rows, f.fitted_rows) {
                        (Some(mut a), Some(b)) => {
                            a.extend(b);
                            a.sort_unstable();
                            a.dedup();
                            Some(a)
                        }
                        (a, b) => a.or(b),
                    },
                    selection: acc.selection.or(f.selection),
                    degenerate: acc.degenerate + f.degenerate,
                },
            });
        }
        Ok(out.expect("at least one part"))
    }
}
