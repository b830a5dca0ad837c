use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// FFT-based analytic signal for a fixed length: negative-frequency bins
/// are zeroed and positive ones doubled.
pub struct AnalyticTransform<T: Scalar> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Scalar> AnalyticTransform<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        AnalyticTransform {
            len,
            forward,
            inverse,
            buf: vec![Complex::new(T::zero(), T::zero()); len],
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Writes the analytic signal of `x` into the internal buffer and
    /// returns it. The real part is `x` itself.
    pub fn transform(&mut self, x: &[T]) -> &[Complex<T>] {
        assert_eq!(x.len(), self.len, "input length does not match plan");
        let n = self.len;
        for (b, &v) in self.buf.iter_mut().zip(x) {
            *b = Complex::new(v, T::zero());
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        let two = T::lit(2.0);
        let half = n / 2;
        let positive_end = if n.is_multiple_of(2) { half } else { half + 1 };
        for b in &mut self.buf[1..positive_end] {
            *b = *b * two;
        }
        for b in &mut self.buf[(half + 1)..] {
            *b = Complex::new(T::zero(), T::zero());
        }
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = T::lit(1.0 / n as f64);
        for (b, &v) in self.buf.iter_mut().zip(x) {
            *b = Complex::new(v, b.im * scale);
        }
        &self.buf
    }
}

pub fn analytic_signal<T: Scalar>(x: &[T]) -> Result<Vec<Complex<T>>> {
    if x.is_empty() {
        return Err(Error::invalid("analytic signal of an empty input"));
    }
    let mut t = AnalyticTransform::new(x.len());
    Ok(t.transform(x).to_vec())
}
