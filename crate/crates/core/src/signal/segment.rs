//! Trial extraction around pain reports and fixed-length windowing.

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::Recording;

/// Seconds kept on either side of a pain report.
pub const TRIAL_HALF_SPAN_S: f64 = 150.0;
pub const WINDOW_S: f64 = 10.0;
pub const WINDOWS_PER_TRIAL: usize = 30;

/// A self-reported pain score at a time offset into the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PainReport {
    pub timestamp_s: f64,
    pub vas: u8,
}

/// Sample range of one trial inside a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpan {
    pub trial_id: usize,
    pub start: usize,
    pub len: usize,
    pub vas: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentWarning {
    pub report_index: usize,
    pub timestamp_s: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub trial_id: usize,
    pub vas: u8,
    pub report_time_s: f64,
    pub sample_rate_hz: f64,
    pub samples: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    pub trial_id: usize,
    pub window_index: usize,
    pub samples: Array2<T>,
}

pub fn trial_len(sample_rate_hz: f64) -> usize {
    (2.0 * TRIAL_HALF_SPAN_S * sample_rate_hz).round() as usize
}

pub fn window_len(sample_rate_hz: f64) -> usize {
    (WINDOW_S * sample_rate_hz).round() as usize
}

/// Works out which reports have a full trial inside the recording. Trial ids
/// are report indices, so skipped reports leave gaps.
pub fn plan_trials(
    n_samples: usize,
    sample_rate_hz: f64,
    reports: &[PainReport],
) -> Result<(Vec<TrialSpan>, Vec<SegmentWarning>)> {
    let len = trial_len(sample_rate_hz);
    let mut spans = Vec::new();
    let mut warnings = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        if r.vas > 10 {
            return Err(Error::invalid(format!("report {i}: VAS {} outside 0..=10", r.vas)));
        }
        let start = (r.timestamp_s * sample_rate_hz - TRIAL_HALF_SPAN_S * sample_rate_hz).round();
        if !r.timestamp_s.is_finite() || start < 0.0 || start as usize + len > n_samples {
            let reason = format!(
                "report at {:.3} s needs [{:.3}, {:.3}) s but recording covers [0, {:.3}) s",
                r.timestamp_s,
                r.timestamp_s - TRIAL_HALF_SPAN_S,
                r.timestamp_s + TRIAL_HALF_SPAN_S,
                n_samples as f64 / sample_rate_hz
            );
            log::warn!("skipping report {i}: {reason}");
            warnings.push(SegmentWarning {
                report_index: i,
                timestamp_s: r.timestamp_s,
                reason,
            });
            continue;
        }
        spans.push(TrialSpan {
            trial_id: i,
            start: start as usize,
            len,
            vas: r.vas,
        });
    }
    Ok((spans, warnings))
}

impl<T: Scalar> Trial<T> {
    pub fn from_span(rec: &Recording<T>, span: &TrialSpan) -> Self {
        let samples = rec
            .samples()
            .slice(s![.., span.start..span.start + span.len])
            .to_owned();
        Trial {
            trial_id: span.trial_id,
            vas: span.vas,
            report_time_s: (span.start as f64 / rec.sample_rate_hz()) + TRIAL_HALF_SPAN_S,
            sample_rate_hz: rec.sample_rate_hz(),
            samples,
        }
    }
}

/// Cuts one five-minute trial per coverable report.
pub fn segment_trials<T: Scalar>(
    rec: &Recording<T>,
    reports: &[PainReport],
) -> Result<(Vec<Trial<T>>, Vec<SegmentWarning>)> {
    let (spans, warnings) = plan_trials(rec.n_samples(), rec.sample_rate_hz(), reports)?;
    let trials = spans.iter().map(|s| Trial::from_span(rec, s)).collect();
    Ok((trials, warnings))
}

/// Symmetric Hann taper: zero at both ends, one at the midpoint (odd lengths).
pub fn hann_symmetric(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let denom = (n - 1) as f64;
            (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
                .collect()
        }
    }
}

/// Splits a trial into thirty non-overlapping ten-second windows. With
/// `taper` set, each window is multiplied by a symmetric Hann taper.
pub fn window_trial<T: Scalar>(trial: &Trial<T>, taper: bool) -> Result<Vec<Window<T>>> {
    let wlen = window_len(trial.sample_rate_hz);
    let expected = wlen * WINDOWS_PER_TRIAL;
    let got = trial.samples.ncols();
    if wlen == 0 || got < expected || got > expected + 1 {
        return Err(Error::invalid(format!(
            "trial {} has {got} samples, expected {expected}",
            trial.trial_id
        )));
    }
    let hann: Option<Vec<T>> = taper.then(|| hann_symmetric(wlen).into_iter().map(T::lit).collect());
    Ok((0..WINDOWS_PER_TRIAL)
        .map(|w| {
            let mut samples = trial.samples.slice(s![.., w * wlen..(w + 1) * wlen]).to_owned();
            if let Some(h) = &hann {
                for mut row in samples.axis_iter_mut(Axis(0)) {
                    for (v, &c) in row.iter_mut().zip(h) {
                        *v = *v * c;
                    }
                }
            }
            Window {
                trial_id: trial.trial_id,
                window_index: w,
                samples,
            }
        })
        .collect())
}
