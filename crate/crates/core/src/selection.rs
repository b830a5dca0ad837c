//! Mutual-information electrode scoring and top-k selection.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::BandName;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{FeatureColumn, FeatureMatrix};

pub const DEFAULT_MI_BINS: usize = 8;
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub bits: f64,
    /// The feature was constant, so no binning was possible.
    pub degenerate: bool,
}

/// Equal-frequency bin of every sample. Tied values share the bin of their
/// first rank, so any strictly monotone transform yields the same bins.
pub fn quantile_bins<T: Scalar>(values: &[T], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("finite values")
            .then(a.cmp(&b))
    });
    let mut out = vec![0; n];
    let mut first = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && values[i] != values[order[rank - 1]] {
            first = rank;
        }
        out[i] = first * bins / n;
    }
    out
}

/// Plug-in mutual information in bits between a discretized feature and
/// class labels.
pub fn mutual_information<T: Scalar>(values: &[T], labels: &[usize], bins: usize) -> Result<MiEstimate> {
    if values.len() != labels.len() {
        return Err(Error::invalid(format!(
            "feature has {} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    if values.len() < 2 {
        return Err(Error::invalid("mutual information needs at least 2 samples"));
    }
    if bins < 2 {
        return Err(Error::invalid("mutual information needs at least 2 bins"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(MiEstimate {
            bits: 0.0,
            degenerate: true,
        });
    }
    let xb = quantile_bins(values, bins);
    Ok(MiEstimate {
        bits: discrete_mutual_information(&xb, labels),
        degenerate: false,
    })
}

/// Plug-in mutual information (bits) of two discrete sequences.
pub fn discrete_mutual_information(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len() as f64;
    let nx = x.iter().max().map_or(0, |m| m + 1);
    let ny = y.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![0usize; nx * ny];
    let mut px = vec![0usize; nx];
    let mut py = vec![0usize; ny];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * ny + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let mut mi = 0.0;
    for a in 0..nx {
        for b in 0..ny {
            let c = joint[a * ny + b];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (px[a] as f64 * py[b] as f64)).log2();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiScore {
    pub channel: String,
    pub band: BandName,
    pub mi_bits: f64,
    pub degenerate: bool,
}

/// One score per PIB column, in column order. Non-PIB columns are skipped.
pub fn score_electrodes<T: Scalar>(pib: &FeatureMatrix<T>, labels: &[usize], bins: usize) -> Result<Vec<MiScore>> {
    if labels.len() != pib.n_rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} feature rows",
            labels.len(),
            pib.n_rows()
        )));
    }
    let targets: Vec<(usize, &String, BandName)> = pib
        .columns()
        .iter()
        .enumerate()
        .filter_map(|(j, c)| match c {
            FeatureColumn::Pib { channel, band } => Some((j, channel, *band)),
            FeatureColumn::Msc { .. } => None,
        })
        .collect();
    if targets.is_empty() {
        return Err(Error::invalid("no PIB columns to score"));
    }
    let values = pib.values();
    targets
        .par_iter()
        .map(|&(j, channel, band)| {
            let col = column_vec(values.column(j));
            let est = mutual_information(&col, labels, bins)?;
            Ok(MiScore {
                channel: channel.clone(),
                band,
                mi_bits: est.bits,
                degenerate: est.degenerate,
            })
        })
        .collect()
}

fn column_vec<T: Scalar>(col: ArrayView1<'_, T>) -> Vec<T> {
    col.iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeSelection {
    pub k: usize,
    pub channels: Vec<String>,
    pub aggregate_mi: Vec<f64>,
    /// Fewer than `k` channels were available.
    #[serde(default)]
    pub short: bool,
}

impl ElectrodeSelection {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sel: ElectrodeSelection = serde_json::from_str(&text)?;
        if sel.channels.len() != sel.aggregate_mi.len() {
            return Err(Error::Format(format!(
                "{}: channel and score counts differ",
                path.display()
            )));
        }
        Ok(sel)
    }
}

/// Ranks channels by MI summed over bands; ties go to the smaller name.
pub fn select_top_k(scores: &[MiScore], k: usize) -> Result<ElectrodeSelection> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut agg: BTreeMap<&str, f64> = BTreeMap::new();
    for s in scores {
        *agg.entry(s.channel.as_str()).or_insert(0.0) += s.mi_bits;
    }
    let mut ranked: Vec<(&str, f64)> = agg.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let short = ranked.len() < k;
    if short {
        log::warn!("only {} channels available for top-{k} selection", ranked.len());
    }
    ranked.truncate(k);
    Ok(ElectrodeSelection {
        k,
        channels: ranked.iter().map(|(c, _)| c.to_string()).collect(),
        aggregate_mi: ranked.iter().map(|(_, m)| *m).collect(),
        short,
    })
}
