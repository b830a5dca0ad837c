//! Signal containers, IIR filtering and trial/window segmentation.

pub mod filter;
pub mod io;
mod recording;
mod segment;

pub use filter::{FilterMode, Sos, SosFilter};
pub use recording::Recording;
pub use segment::{
    hann_symmetric, plan_trials, segment_trials, trial_len, window_len, window_trial, PainReport, SegmentWarning,
    Trial, TrialSpan, Window, TRIAL_HALF_SPAN_S, WINDOWS_PER_TRIAL, WINDOW_S,
};
