//! Frequency-domain explanations for face verification.
//!
//! Images of a pair are moved into the centered 2-D DFT domain, radius bands
//! are removed from both images, and the change in embedding cosine
//! similarity is recorded per band. The normalized per-band changes form a
//! frequency heat plot (FHP). The [`evaluation`] module scores explanations
//! with insertion/deletion curves over verification error rates.

pub mod embedder;
mod error;
pub mod evaluation;
pub mod explain;
pub mod imaging;
mod par;
pub mod precision;
pub mod spectral;

pub use error::{Error, Result};
