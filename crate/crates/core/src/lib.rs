//! Model-agnostic forensics for protective image perturbations.
//!
//! The crate covers the signal-level side of studying clean/protected image
//! pairs:
//!
//! - [`synthesis`]: procedural masks and noise fields composed onto a base
//!   image, swept over a mask × noise × lightness grid;
//! - [`occlusion`]: sliding-window occlusion sensitivity maps;
//! - [`spectral`]: centred log-magnitude spectra, signed spectral
//!   differences and radial profiles;
//! - [`detection`]: histogram-entropy detection and subtraction purification
//!   behind a pluggable reconstructor (including a subprocess adapter);
//! - [`fingerprint`]: fixed-length descriptors, PCA projection and
//!   silhouette scores;
//! - [`pipeline`]: configuration, manifests, batch runs and static reports.
//!
//! Rasters live in [`image`]; float planes serialize through [`pmap`].

pub mod detection;
pub mod error;
pub mod fingerprint;
pub mod image;
pub mod occlusion;
pub mod pipeline;
pub mod pmap;
pub mod spectral;
pub mod synthesis;

pub use error::{Error, Result};
