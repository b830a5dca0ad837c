//! IIR filters realized as cascaded second-order sections.
//!
//! Butterworth designs start from the analog prototype, are transformed in
//! the s-plane (low-pass scaling or low-pass to band-pass), and mapped to z
//! with the bilinear transform after pre-warping the band edges. Poles and
//! zeros are then grouped into biquads. Coefficient design and the filter
//! state run in `f64` regardless of the sample type.

use std::f64::consts::PI;

use ndarray::Axis;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::BandSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::Recording;

/// Default notch quality factor.
pub const DEFAULT_NOTCH_Q: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Single forward pass.
    #[default]
    Causal,
    /// Forward then backward pass; squares the magnitude response.
    ZeroPhase,
}

/// One biquad, `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    sections: Vec<Sos>,
    sample_rate_hz: f64,
}

impl SosFilter {
    pub fn sections(&self) -> &[Sos] {
        &self.sections
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Butterworth low-pass of the given order with -3 dB at `cutoff_hz`.
    pub fn butter_lowpass(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        check_order(order)?;
        check_below_nyquist(cutoff_hz, sample_rate_hz, "cutoff")?;
        let fs2 = 2.0 * sample_rate_hz;
        let wc = prewarp(cutoff_hz, sample_rate_hz);
        let poles: Vec<Complex64> = prototype_poles(order).into_iter().map(|p| p * wc).collect();
        let zpoles: Vec<Complex64> = poles.iter().map(|&p| bilinear(p, fs2)).collect();
        let zeros = vec![Complex64::new(-1.0, 0.0); order];
        let mut f = SosFilter {
            sections: group_sections(&zeros, &zpoles),
            sample_rate_hz,
        };
        f.normalize_gain_at(0.0);
        Ok(f)
    }

    /// Butterworth band-pass built from an `order`-pole low-pass prototype,
    /// giving `2 * order` poles in total.
    pub fn butter_bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        check_order(order)?;
        if !(low_hz > 0.0 && low_hz < high_hz) {
            return Err(Error::invalid(format!(
                "band-pass edges must satisfy 0 < low ({low_hz}) < high ({high_hz})"
            )));
        }
        check_below_nyquist(high_hz, sample_rate_hz, "upper band edge")?;
        let fs2 = 2.0 * sample_rate_hz;
        let w1 = prewarp(low_hz, sample_rate_hz);
        let w2 = prewarp(high_hz, sample_rate_hz);
        let bw = w2 - w1;
        let w0_sq = w1 * w2;
        let mut zpoles = Vec::with_capacity(2 * order);
        for p in prototype_poles(order) {
            let half = p * (bw / 2.0);
            let disc = (half * half - w0_sq).sqrt();
            zpoles.push(bilinear(half + disc, fs2));
            zpoles.push(bilinear(half - disc, fs2));
        }
        // `order` zeros at s = 0 map to z = 1; the `order` at infinity map to z = -1.
        let zeros: Vec<Complex64> = (0..2 * order)
            .map(|i| Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let mut f = SosFilter {
            sections: group_sections(&zeros, &zpoles),
            sample_rate_hz,
        };
        // Unit gain at the digital image of the analog geometric center.
        let center_hz = (w0_sq.sqrt() / fs2).atan() * sample_rate_hz / PI;
        f.normalize_gain_at(center_hz);
        Ok(f)
    }

    /// Second-order IIR notch with zeros on the unit circle at `freq_hz` and
    /// -3 dB bandwidth `freq_hz / q`.
    pub fn notch(freq_hz: f64, q: f64, sample_rate_hz: f64) -> Result<Self> {
        check_below_nyquist(freq_hz, sample_rate_hz, "notch frequency")?;
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid(format!(
                "notch quality factor must be positive, got {q}"
            )));
        }
        let w0 = 2.0 * PI * freq_hz / sample_rate_hz;
        let beta = (w0 / q / 2.0).tan();
        let gain = 1.0 / (1.0 + beta);
        let c = w0.cos();
        Ok(SosFilter {
            sections: vec![Sos {
                b: [gain, -2.0 * gain * c, gain],
                a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
            }],
            sample_rate_hz,
        })
    }

    /// Cascade of notches, one per frequency.
    pub fn notches(freqs_hz: &[f64], q: f64, sample_rate_hz: f64) -> Result<Self> {
        let mut sections = Vec::with_capacity(freqs_hz.len());
        for &f in freqs_hz {
            sections.extend(Self::notch(f, q, sample_rate_hz)?.sections);
        }
        Ok(SosFilter {
            sections,
            sample_rate_hz,
        })
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    fn normalize_gain_at(&mut self, freq_hz: f64) {
        let g = self.response(freq_hz).norm();
        if let Some(first) = self.sections.first_mut() {
            for b in &mut first.b {
                *b /= g;
            }
        }
    }

    /// Filters `x` in place.
    pub fn apply_in_place<T: Scalar>(&self, x: &mut [T], mode: FilterMode) {
        self.forward(x);
        if mode == FilterMode::ZeroPhase {
            x.reverse();
            self.forward(x);
            x.reverse();
        }
    }

    pub fn apply<T: Scalar>(&self, x: &[T], mode: FilterMode) -> Vec<T> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out, mode);
        out
    }

    // Transposed direct form II, one section at a time over the whole buffer.
    fn forward<T: Scalar>(&self, x: &mut [T]) {
        for s in &self.sections {
            let (b0, b1, b2) = (s.b[0], s.b[1], s.b[2]);
            let (a1, a2) = (s.a[1], s.a[2]);
            let mut z1 = 0.0f64;
            let mut z2 = 0.0f64;
            for v in x.iter_mut() {
                let xin = v.as_f64();
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = T::lit(y);
            }
        }
    }

    /// Filters every channel of a recording in place.
    pub fn apply_recording_in_place<T: Scalar>(&self, rec: &mut Recording<T>, mode: FilterMode) {
        for mut row in rec.samples_mut().axis_iter_mut(Axis(0)) {
            match row.as_slice_mut() {
                Some(buf) => self.apply_in_place(buf, mode),
                None => {
                    let mut buf = row.to_vec();
                    self.apply_in_place(&mut buf, mode);
                    row.assign(&ndarray::ArrayView1::from(&buf));
                }
            }
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    Ok(())
}

fn check_below_nyquist(freq_hz: f64, sample_rate_hz: f64, what: &str) -> Result<()> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::invalid(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    let nyquist = sample_rate_hz / 2.0;
    if !(freq_hz > 0.0 && freq_hz < nyquist) {
        return Err(Error::invalid(format!(
            "{what} {freq_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    Ok(())
}

/// Analog frequency (rad/s) that the bilinear transform maps onto `freq_hz`.
fn prewarp(freq_hz: f64, sample_rate_hz: f64) -> f64 {
    2.0 * sample_rate_hz * (PI * freq_hz / sample_rate_hz).tan()
}

/// Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (fs2 + s) / (fs2 - s)
}

/// Groups conjugate pole pairs (and leftover real poles) into biquads, handing
/// each section as many zeros as it has poles.
fn group_sections(zeros: &[Complex64], poles: &[Complex64]) -> Vec<Sos> {
    const IM_EPS: f64 = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > IM_EPS).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= IM_EPS).map(|p| p.re).collect();
    // Least resonant first.
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut pole_groups: Vec<Vec<Complex64>> = complex.iter().map(|&p| vec![p, p.conj()]).collect();
    for chunk in real.chunks(2) {
        pole_groups.push(chunk.iter().map(|&r| Complex64::new(r, 0.0)).collect());
    }

    let mut zi = zeros.iter();
    pole_groups
        .into_iter()
        .map(|group| {
            let zs: Vec<Complex64> = zi.by_ref().take(group.len()).copied().collect();
            Sos {
                b: poly2(&zs),
                a: poly2(&group),
            }
        })
        .collect()
}

/// Monic polynomial in z^-1 with the given (at most two, conjugate-closed) roots.
fn poly2(roots: &[Complex64]) -> [f64; 3] {
    match roots {
        [] => [1.0, 0.0, 0.0],
        [r] => [1.0, -r.re, 0.0],
        [r1, r2] => [1.0, -(r1 + r2).re, (r1 * r2).re],
        _ => unreachable!("sections hold at most two roots"),
    }
}

/// Applies a notch at each frequency in `freqs_hz` to every channel.
pub fn notch_filter<T: Scalar>(rec: &Recording<T>, freqs_hz: &[f64], quality: f64) -> Result<Recording<T>> {
    let filt = SosFilter::notches(freqs_hz, quality, rec.sample_rate_hz())?;
    let mut out = rec.clone();
    filt.apply_recording_in_place(&mut out, FilterMode::Causal);
    Ok(out)
}

pub fn butterworth_lowpass<T: Scalar>(rec: &Recording<T>, cutoff_hz: f64, order: usize) -> Result<Recording<T>> {
    let filt = SosFilter::butter_lowpass(order, cutoff_hz, rec.sample_rate_hz())?;
    let mut out = rec.clone();
    filt.apply_recording_in_place(&mut out, FilterMode::Causal);
    Ok(out)
}

pub fn butterworth_bandpass<T: Scalar>(
    signal: &[T],
    band: &BandSpec,
    sample_rate_hz: f64,
    order: usize,
) -> Result<Vec<T>> {
    band.validate(sample_rate_hz)?;
    let filt = SosFilter::butter_bandpass(order, band.low_hz, band.high_hz, sample_rate_hz)?;
    Ok(filt.apply(signal, FilterMode::Causal))
}
