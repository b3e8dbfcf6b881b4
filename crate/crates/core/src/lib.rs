//! Detection of dim, slowly emerging point targets in image sequences.
//!
//! The pipeline has three stages, plus the tooling needed to exercise it
//! end to end without flight hardware:
//!
//! 1. **Pre-processing** ([`morphology`]) — grayscale bottom-hat filtering
//!    that emphasises small dark features against a brighter background.
//! 2. **Temporal filtering** ([`hmm`]) — a hidden Markov model over pixel
//!    states plus one out-of-image state, updated per frame from the
//!    bottom-hat output.
//! 3. **Detection logic** ([`detection`]) — threshold rules on the filter
//!    posterior: the baseline ISD statistic, a max-posterior greedy rule,
//!    and a kernel-penalised greedy rule that rejects multi-pixel
//!    artefacts, together with the cost model their stopping regions come
//!    from.
//!
//! Supporting components:
//!
//! - [`simulator`] — seeded synthetic near-collision encounters (cloud
//!   texture, transient blob clutter, an emerging dark target) with
//!   per-frame ground truth and a frame-to-range mapping.
//! - [`evaluation`] — zero-false-alarm threshold search and detection
//!   range aggregation over a suite of encounters.
//! - [`oracle`] — a dynamic-programming solver for the underlying optimal
//!   stopping problem on a discretized belief simplex, small enough to
//!   verify the stopping-region structure and false-alarm bound
//!   numerically.
//! - [`config`] — JSON pipeline configuration shared by the CLI commands.

pub mod config;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod hmm;
pub mod image;
pub mod morphology;
pub mod oracle;
#[doc(hidden)]
pub mod reference;
pub mod simulator;

pub use error::CoreError;
pub use image::GrayImage;
pub use morphology::StructuringElement;
