//! Biophysical skin albedo engine.
//!
//! The crate covers the full path from skin biophysics to editable albedo
//! maps:
//!
//! - [`optics`]: chromophore data and per-layer absorption, scattering and
//!   anisotropy for a two-layer (epidermis over semi-infinite dermis) skin.
//! - [`transport`]: a 2D Monte Carlo random walk estimating spectral diffuse
//!   reflectance on the 380-780 nm grid.
//! - [`colorimetry`]: spectral integration to XYZ and linear sRGB.
//! - [`space`]: the warped 5D parameter space, Halton sampling, the
//!   precomputed albedo look-up tensor and its brute-force inversion.
//! - [`neural`]: an encoder/decoder MLP pair trained from scratch with a
//!   three-term loss and Adam.
//! - [`mapops`]: per-texel inversion, editing and reconstruction of albedo
//!   maps, plus error metrics.
//! - [`formats`]: versioned, hashed binary artifacts and PFM/PNG/CSV codecs.
//! - [`cli`]: the `dermalight` command line front end.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod cli;
pub mod colorimetry;
mod error;
pub mod formats;
pub mod mapops;
pub mod neural;
pub mod optics;
pub mod space;
pub mod transport;

pub use error::{Error, Result};
pub use optics::{SkinParams, SpectralCurve, WavelengthGrid, BANDS};
