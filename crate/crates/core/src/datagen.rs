//! Seeded synthetic recordings: 1/f background noise per channel with
//! class-conditional band-power and coherence effects.
//!
//! Each trial is shaped in the frequency domain. A coherence effect replaces
//! the band bins of both channels by `sqrt(1 - w) N + sqrt(w) S` with a shared
//! source `S` of the same spectrum, giving band coherence `w^2`; a band-power
//! effect then scales the band bins by `sqrt(ratio)`.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bands::{BandName, BandSpec};
use crate::error::{Error, Result};
use crate::labeling::PainClass;
use crate::rng::{rng_for, TAG_LAYOUT, TAG_TRIAL};
use crate::scalar::Scalar;
use crate::signal::{PainReport, Recording, TRIAL_HALF_SPAN_S};

const SOURCE_STREAM: u64 = 1 << 32;
const VAS_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    BandPower,
    Coherence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub kind: EffectKind,
    /// One channel index for band power, two for coherence.
    pub channels: Vec<usize>,
    pub band: BandName,
    /// Power ratio, or target band coherence in [0, 1].
    pub effect_size: f64,
    pub applies_to_class: PainClass,
}

impl EffectSpec {
    pub fn band_power(channel: usize, band: BandName, ratio: f64, class: PainClass) -> Self {
        EffectSpec {
            kind: EffectKind::BandPower,
            channels: vec![channel],
            band,
            effect_size: ratio,
            applies_to_class: class,
        }
    }

    pub fn coherence(a: usize, b: usize, band: BandName, target: f64, class: PainClass) -> Self {
        EffectSpec {
            kind: EffectKind::Coherence,
            channels: vec![a, b],
            band,
            effect_size: target,
            applies_to_class: class,
        }
    }

    /// `pain` also covers the two graded pain classes.
    fn applies_to(&self, class: PainClass) -> bool {
        self.applies_to_class == class
            || (self.applies_to_class == PainClass::Pain
                && matches!(class, PainClass::ModeratePain | PainClass::HighPain))
    }
}

fn default_rate() -> f64 {
    500.0
}

fn default_exponent() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub channels: usize,
    /// Defaults to `E01`, `E02`, ...
    #[serde(default)]
    pub channel_names: Option<Vec<String>>,
    pub trials_per_class: BTreeMap<PainClass, usize>,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_exponent")]
    pub noise_exponent: f64,
    #[serde(default)]
    pub effects: Vec<EffectSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn binary(channels: usize, trials_per_class: usize, seed: u64) -> Self {
        SynthConfig {
            channels,
            channel_names: None,
            trials_per_class: [
                (PainClass::NoPain, trials_per_class),
                (PainClass::Pain, trials_per_class),
            ]
            .into(),
            sample_rate_hz: default_rate(),
            noise_exponent: default_exponent(),
            effects: Vec::new(),
            seed,
        }
    }

    pub fn ternary(channels: usize, trials_per_class: usize, seed: u64) -> Self {
        SynthConfig {
            trials_per_class: [
                (PainClass::NoPain, trials_per_class),
                (PainClass::ModeratePain, trials_per_class),
                (PainClass::HighPain, trials_per_class),
            ]
            .into(),
            ..Self::binary(channels, trials_per_class, seed)
        }
    }

    pub fn with_effect(mut self, effect: EffectSpec) -> Self {
        self.effects.push(effect);
        self
    }

    pub fn names(&self) -> Vec<String> {
        self.channel_names
            .clone()
            .unwrap_or_else(|| (1..=self.channels).map(|i| format!("E{i:02}")).collect())
    }

    pub fn n_trials(&self) -> usize {
        self.trials_per_class.values().sum()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.channels == 0 {
            return cfg("at least one channel is required".into());
        }
        if let Some(names) = &self.channel_names {
            if names.len() != self.channels {
                return cfg(format!("{} channel names for {} channels", names.len(), self.channels));
            }
        }
        if !(self.sample_rate_hz > 0.0) {
            return cfg("sample rate must be positive".into());
        }
        if !self.noise_exponent.is_finite() {
            return cfg("noise exponent must be finite".into());
        }
        if self.n_trials() == 0 {
            return cfg("no trials requested".into());
        }
        for (class, &n) in &self.trials_per_class {
            if *class == PainClass::Excluded {
                return cfg("cannot generate trials of the excluded class".into());
            }
            if n == 0 {
                return cfg(format!("class {class} requests zero trials"));
            }
        }
        let mut mix: BTreeMap<(usize, BandName), f64> = BTreeMap::new();
        for (i, e) in self.effects.iter().enumerate() {
            let want = match e.kind {
                EffectKind::BandPower => 1,
                EffectKind::Coherence => 2,
            };
            if e.channels.len() != want {
                return cfg(format!(
                    "effect {i}: expected {want} channel(s), got {}",
                    e.channels.len()
                ));
            }
            if let Some(&c) = e.channels.iter().find(|&&c| c >= self.channels) {
                return cfg(format!("effect {i}: channel {c} out of range"));
            }
            let band = BandSpec::by_name(e.band);
            if band.high_hz >= self.sample_rate_hz / 2.0 {
                return cfg(format!("effect {i}: band {} reaches Nyquist", e.band.as_str()));
            }
            match e.kind {
                EffectKind::BandPower => {
                    if !(e.effect_size > 0.0 && e.effect_size.is_finite()) {
                        return cfg(format!("effect {i}: power ratio must be positive"));
                    }
                }
                EffectKind::Coherence => {
                    if e.channels[0] == e.channels[1] {
                        return cfg(format!("effect {i}: coherence needs two distinct channels"));
                    }
                    if !(0.0..=1.0).contains(&e.effect_size) {
                        return cfg(format!("effect {i}: coherence target {} outside [0, 1]", e.effect_size));
                    }
                    for &c in &e.channels {
                        let w = mix.entry((c, e.band)).or_insert(0.0);
                        *w += e.effect_size.sqrt();
                        if *w > 1.0 + 1e-12 {
                            return cfg(format!(
                                "effect {i}: shared sources on channel {c} {} need mixing weight {:.3} > 1",
                                e.band.as_str(),
                                *w
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput<T> {
    pub recording: Recording<T>,
    pub reports: Vec<PainReport>,
    /// Generating class of each trial, in recording order.
    pub classes: Vec<PainClass>,
}

impl<T: Scalar> SynthOutput<T> {
    /// Writes `recording.pnb`, `reports.csv` and `classes.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::signal::io::save_container(&self.recording, &dir.join("recording.pnb"))?;
        crate::signal::io::save_reports(&self.reports, &dir.join("reports.csv"))?;
        let path = dir.join("classes.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self.classes)?).map_err(|e| Error::io(&path, e))
    }
}

pub fn vas_range(class: PainClass) -> Result<(u8, u8)> {
    match class {
        PainClass::NoPain => Ok((0, 3)),
        PainClass::ModeratePain => Ok((4, 6)),
        PainClass::HighPain | PainClass::Pain => Ok((7, 10)),
        PainClass::Excluded => Err(Error::Config("excluded class has no VAS range".into())),
    }
}

/// Positive and mirrored FFT bins whose frequency lies in `[low, high)`.
fn band_bins(band: &BandSpec, len: usize, fs: f64) -> Vec<usize> {
    let mut bins = Vec::new();
    for k in 1..=len / 2 {
        let f = k as f64 * fs / len as f64;
        if band.contains(f) {
            bins.push(k);
            if k != len - k {
                bins.push(len - k);
            }
        }
    }
    bins
}

struct Shaper {
    len: usize,
    gain: Vec<f64>,
    norm: f64,
}

impl Shaper {
    fn new(len: usize, fs: f64, exponent: f64) -> Self {
        let gain: Vec<f64> = (0..len)
            .map(|k| {
                let kk = k.min(len - k);
                if kk == 0 {
                    0.0
                } else {
                    (kk as f64 * fs / len as f64).powf(-exponent / 2.0)
                }
            })
            .collect();
        let norm = (gain.iter().map(|g| g * g).sum::<f64>() / len as f64).sqrt();
        Shaper { len, gain, norm }
    }

    /// Spectrum of unit-variance Gaussian noise with the configured slope.
    fn spectrum(&self, fft: &dyn rustfft::Fft<f64>, seed: u64, path: &[u64]) -> Vec<Complex64> {
        let mut rng = rng_for(seed, path);
        let mut buf: Vec<Complex64> = (0..self.len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
            .collect();
        fft.process(&mut buf);
        for (v, g) in buf.iter_mut().zip(&self.gain) {
            *v *= g / self.norm;
        }
        buf
    }
}

pub fn generate<T: Scalar>(config: &SynthConfig) -> Result<SynthOutput<T>> {
    config.validate()?;
    let fs = config.sample_rate_hz;
    let trial_len = (2.0 * TRIAL_HALF_SPAN_S * fs).round() as usize;
    let mut classes: Vec<PainClass> = config
        .trials_per_class
        .iter()
        .flat_map(|(&c, &n)| std::iter::repeat_n(c, n))
        .collect();
    classes.shuffle(&mut rng_for(config.seed, &[TAG_LAYOUT]));

    let n_ch = config.channels;
    let mut samples = Array2::<T>::zeros((n_ch, trial_len * classes.len()));
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(trial_len);
    let inv = planner.plan_fft_inverse(trial_len);
    let shaper = Shaper::new(trial_len, fs, config.noise_exponent);
    let bins: Vec<Vec<usize>> = config
        .effects
        .iter()
        .map(|e| band_bins(&BandSpec::by_name(e.band), trial_len, fs))
        .collect();
    let mut reports = Vec::with_capacity(classes.len());

    for (t, &class) in classes.iter().enumerate() {
        let tid = t as u64;
        let (lo, hi) = vas_range(class)?;
        let vas = rng_for(config.seed, &[TAG_TRIAL, tid, VAS_STREAM]).random_range(lo..=hi);
        reports.push(PainReport {
            timestamp_s: t as f64 * 2.0 * TRIAL_HALF_SPAN_S + TRIAL_HALF_SPAN_S,
            vas,
        });
        let active: Vec<usize> = (0..config.effects.len())
            .filter(|&e| config.effects[e].applies_to(class))
            .collect();
        let sources: BTreeMap<usize, Vec<Complex64>> = active
            .iter()
            .filter(|&&e| config.effects[e].kind == EffectKind::Coherence)
            .map(|&e| {
                (
                    e,
                    shaper.spectrum(fwd.as_ref(), config.seed, &[TAG_TRIAL, tid, SOURCE_STREAM + e as u64]),
                )
            })
            .collect();

        let rows: Vec<Vec<f64>> = (0..n_ch)
            .into_par_iter()
            .map(|ch| {
                let mut x = shaper.spectrum(fwd.as_ref(), config.seed, &[TAG_TRIAL, tid, ch as u64]);
                // mixing weights per band on this channel
                let mut shared: BTreeMap<BandName, Vec<usize>> = BTreeMap::new();
                for &e in &active {
                    let eff = &config.effects[e];
                    if eff.kind == EffectKind::Coherence && eff.channels.contains(&ch) {
                        shared.entry(eff.band).or_default().push(e);
                    }
                }
                for effs in shared.values() {
                    let w_total: f64 = effs.iter().map(|&e| config.effects[e].effect_size.sqrt()).sum();
                    let keep = (1.0 - w_total).max(0.0).sqrt();
                    for &k in &bins[effs[0]] {
                        let mut v = x[k] * keep;
                        for &e in effs {
                            v += sources[&e][k] * config.effects[e].effect_size.sqrt().sqrt();
                        }
                        x[k] = v;
                    }
                }
                for &e in &active {
                    let eff = &config.effects[e];
                    if eff.kind == EffectKind::BandPower && eff.channels[0] == ch {
                        let g = eff.effect_size.sqrt();
                        for &k in &bins[e] {
                            x[k] *= g;
                        }
                    }
                }
                inv.process(&mut x);
                let scale = 1.0 / trial_len as f64;
                x.iter().map(|v| v.re * scale).collect()
            })
            .collect();
        let mut block = samples.slice_mut(s![.., t * trial_len..(t + 1) * trial_len]);
        for (ch, row) in rows.iter().enumerate() {
            for (dst, &v) in block.row_mut(ch).iter_mut().zip(row) {
                *dst = T::lit(v);
            }
        }
    }
    let recording = Recording::new(samples, fs, config.names())?;
    Ok(SynthOutput {
        recording,
        reports,
        classes,
    })
}
