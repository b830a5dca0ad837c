use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Multichannel sampled signal, `channels × time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    samples: Array2<T>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    usable: Vec<bool>,
}

impl<T: Scalar> Recording<T> {
    /// Builds a recording with every channel marked usable.
    pub fn new(samples: Array2<T>, sample_rate_hz: f64, channel_names: Vec<String>) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if channel_names.len() != samples.nrows() {
            return Err(Error::invalid(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                samples.nrows()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &channel_names {
            if name.is_empty() || name.contains('|') || name.contains(':') || name.contains(',') {
                return Err(Error::invalid(format!(
                    "channel name `{name}` must be non-empty and free of '|', ':' and ','"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate channel name `{name}`")));
            }
        }
        let usable = vec![true; channel_names.len()];
        Ok(Recording {
            samples,
            sample_rate_hz,
            channel_names,
            usable,
        })
    }

    pub fn samples(&self) -> &Array2<T> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut Array2<T> {
        &mut self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn usable_mask(&self) -> &[bool] {
        &self.usable
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    pub fn channel(&self, idx: usize) -> ArrayView1<'_, T> {
        self.samples.row(idx)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }

    pub fn set_usable(&mut self, idx: usize, usable: bool) {
        self.usable[idx] = usable;
    }

    /// Marks every all-zero channel unusable and returns how many were flagged.
    pub fn mark_zero_channels(&mut self) -> usize {
        let mut flagged = 0;
        for (i, row) in self.samples.axis_iter(Axis(0)).enumerate() {
            if self.usable[i] && row.iter().all(|v| *v == T::zero()) {
                self.usable[i] = false;
                flagged += 1;
            }
        }
        flagged
    }

    /// Marks the named channels unusable. Unknown names are an error.
    pub fn flag_channels<S: AsRef<str>>(&mut self, names: &[S]) -> Result<()> {
        for name in names {
            let idx = self
                .channel_index(name.as_ref())
                .ok_or_else(|| Error::invalid(format!("flagged channel `{}` not in recording", name.as_ref())))?;
            self.usable[idx] = false;
        }
        Ok(())
    }

    /// Drops unusable channels.
    pub fn into_usable(self) -> Recording<T> {
        if self.usable.iter().all(|u| *u) {
            return self;
        }
        let keep: Vec<usize> = (0..self.n_channels()).filter(|&i| self.usable[i]).collect();
        let samples = self.samples.select(Axis(0), &keep);
        let channel_names = keep.iter().map(|&i| self.channel_names[i].clone()).collect();
        Recording {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            channel_names,
            usable: vec![true; keep.len()],
        }
    }
}
