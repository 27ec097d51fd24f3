//! Music onset detection.
//!
//! Onset strength signals (complex domain, spectral flux, superflux and the
//! short-time spectral average), chirp group delay smoothing, valley-peak
//! distance and moving-threshold peak picking, plus evaluation and timing
//! utilities.
//!
//! ```no_run
//! use onsetlab::{run_detect, PipelineConfig};
//!
//! let config = PipelineConfig::preset("4012")?;
//! let onsets = run_detect("take.wav", &config)?;
//! for t in onsets.times() {
//!     println!("{t:.3}");
//! }
//! # Ok::<(), onsetlab::Error>(())
//! ```

pub mod audio_io;
pub mod bench;
pub mod cgd;
pub mod convert;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod oss;
pub mod peakpick;
pub mod pipeline;
pub mod spectral;
pub mod synth;

pub use audio_io::{load_audio, load_external_oss, AudioBuffer};
pub use cgd::{cgd_smooth, chirp_group_delay, CgdConfig};
pub use error::{Error, Result};
pub use eval::{match_onsets, parse_annotations, MatchResult, Metrics, OnsetList};
pub use oss::OnsetStrengthSignal;
pub use peakpick::{PickerParams, VpdConfig};
pub use pipeline::{run_detect, OssMethod, PickerKind, PipelineConfig};
pub use spectral::StftConfig;
