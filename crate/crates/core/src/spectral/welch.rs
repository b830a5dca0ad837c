//! Welch auto- and cross-spectral estimation with a periodic Hann taper and
//! per-segment mean removal.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd<T> {
    pub frequencies_hz: Vec<f64>,
    pub values: Vec<T>,
    pub segment_count: usize,
}

/// One-sided cross spectral density, `conj(X) * Y` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Csd<T> {
    pub frequencies_hz: Vec<f64>,
    pub values: Vec<Complex<T>>,
    pub segment_count: usize,
}

pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Tapered segment spectra of one signal, `segments × bins`, row-major.
#[derive(Debug, Clone)]
pub struct SegmentSpectra<T> {
    pub bins: usize,
    pub segments: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Scalar> SegmentSpectra<T> {
    #[inline]
    pub fn segment(&self, k: usize) -> &[Complex<T>] {
        &self.data[k * self.bins..(k + 1) * self.bins]
    }
}

/// Reusable segmenting/FFT machinery for a fixed segment length and step.
pub struct WelchEngine<T: Scalar> {
    segment_len: usize,
    step: usize,
    sample_rate_hz: f64,
    taper: Vec<T>,
    taper_power: f64,
    fft: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Scalar> WelchEngine<T> {
    pub fn new(segment_len: usize, overlap_fraction: f64, sample_rate_hz: f64) -> Result<Self> {
        if segment_len < 2 {
            return Err(Error::invalid(format!("Welch segment length {segment_len} < 2")));
        }
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(Error::invalid(format!(
                "overlap fraction {overlap_fraction} outside [0, 1)"
            )));
        }
        let overlap = (overlap_fraction * segment_len as f64).round() as usize;
        let step = (segment_len - overlap).max(1);
        let taper64 = hann_periodic(segment_len);
        let taper_power = taper64.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment_len);
        let scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        Ok(WelchEngine {
            segment_len,
            step,
            sample_rate_hz,
            taper: taper64.into_iter().map(T::lit).collect(),
            taper_power,
            fft,
            buf: vec![Complex::new(T::zero(), T::zero()); segment_len],
            scratch,
        })
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn bins(&self) -> usize {
        self.segment_len / 2 + 1
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        (0..self.bins())
            .map(|k| k as f64 * self.sample_rate_hz / self.segment_len as f64)
            .collect()
    }

    pub fn segment_count(&self, n: usize) -> usize {
        if n < self.segment_len {
            0
        } else {
            (n - self.segment_len) / self.step + 1
        }
    }

    pub fn spectra(&mut self, x: &[T]) -> Result<SegmentSpectra<T>> {
        let k = self.segment_count(x.len());
        if k == 0 {
            return Err(Error::invalid(format!(
                "Welch segment length {} exceeds signal length {}",
                self.segment_len,
                x.len()
            )));
        }
        let bins = self.bins();
        let mut data = Vec::with_capacity(k * bins);
        let inv_len = T::lit(1.0 / self.segment_len as f64);
        for s in 0..k {
            let seg = &x[s * self.step..s * self.step + self.segment_len];
            let mean = seg.iter().copied().sum::<T>() * inv_len;
            for ((b, &v), &w) in self.buf.iter_mut().zip(seg).zip(&self.taper) {
                *b = Complex::new((v - mean) * w, T::zero());
            }
            self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
            data.extend_from_slice(&self.buf[..bins]);
        }
        Ok(SegmentSpectra {
            bins,
            segments: k,
            data,
        })
    }

    /// Density scaling for bin `k` of a one-sided spectrum.
    fn density_scale(&self, k: usize, segments: usize) -> f64 {
        let edge = k == 0 || (self.segment_len.is_multiple_of(2) && k == self.segment_len / 2);
        let one_sided = if edge { 1.0 } else { 2.0 };
        one_sided / (self.sample_rate_hz * self.taper_power * segments as f64)
    }

    pub fn psd(&self, a: &SegmentSpectra<T>) -> Psd<T> {
        let values = (0..a.bins)
            .map(|k| {
                let acc: f64 = (0..a.segments).map(|s| a.segment(s)[k].norm_sqr().as_f64()).sum();
                T::lit(acc * self.density_scale(k, a.segments))
            })
            .collect();
        Psd {
            frequencies_hz: self.frequencies_hz(),
            values,
            segment_count: a.segments,
        }
    }

    pub fn csd(&self, a: &SegmentSpectra<T>, b: &SegmentSpectra<T>) -> Csd<T> {
        let values = (0..a.bins)
            .map(|k| {
                let mut re = 0.0f64;
                let mut im = 0.0f64;
                for s in 0..a.segments {
                    let p = a.segment(s)[k].conj() * b.segment(s)[k];
                    re += p.re.as_f64();
                    im += p.im.as_f64();
                }
                let sc = self.density_scale(k, a.segments);
                Complex::new(T::lit(re * sc), T::lit(im * sc))
            })
            .collect();
        Csd {
            frequencies_hz: self.frequencies_hz(),
            values,
            segment_count: a.segments,
        }
    }
}

/// Welch estimates of `Sxx`, `Syy` and `Sxy` over Hann-tapered segments.
pub fn welch_spectra<T: Scalar>(
    x: &[T],
    y: &[T],
    sample_rate_hz: f64,
    segment_len: usize,
    overlap_fraction: f64,
) -> Result<(Psd<T>, Psd<T>, Csd<T>)> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "signal lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut engine = WelchEngine::new(segment_len, overlap_fraction, sample_rate_hz)?;
    let sx = engine.spectra(x)?;
    let sy = engine.spectra(y)?;
    Ok((engine.psd(&sx), engine.psd(&sy), engine.csd(&sx, &sy)))
}
