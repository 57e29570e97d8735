//! First-order Ambisonics encoding for arbitrary microphone arrays.
//!
//! Building blocks: real spherical harmonics and sphere quadrature ([`sh`]),
//! STFT analysis and synthesis ([`tf`]), randomized shoebox scenes with
//! reference Ambisonic rendering ([`scene`]), least-squares encoder design
//! ([`encoder`]), evaluation metrics ([`metrics`]), binary exchange formats
//! ([`formats`]) and on-disk datasets ([`dataset`]).
//!
//! With the default `parallel` feature, scenes, frequency bins and frames are
//! processed with rayon. Without it everything runs on the calling thread.

pub mod dataset;
pub mod encoder;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod scene;
pub mod sh;
pub mod tf;
pub mod wav;

pub use error::{Error, Result};
pub use num_complex::Complex64;
