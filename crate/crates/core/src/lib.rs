//! Geodesic Gramian denoising of grayscale images.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the algorithmic side of
//! the denoiser:
//!
//! * [`image`]: the [`GrayImage`] container, clamping and channel averaging.
//! * [`noise`]: seeded additive Gaussian noise and relative-noise calibration.
//! * [`metrics`]: RE, PSNR and global SSIM.
//! * [`patchgraph`]: patch extraction, the nearest-neighbour graph and
//!   all-pairs geodesic distances.
//! * [`gramian`]: double-centering of the geodesic distance matrix.
//! * [`lowrank`]: five interchangeable top-L singular-triplet backends.
//! * [`pipeline`]: spectral projection of patches, Shepard merging and the
//!   end-to-end [`pipeline::denoise`].
//!
//! File formats, timing and the command line live in the companion `ggd` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod gramian;
pub mod image;
pub mod linalg;
pub mod lowrank;
pub mod metrics;
pub mod noise;
pub mod patchgraph;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
pub use gramian::{gramian_from_distances, GramianMatrix};
pub use image::GrayImage;
pub use linalg::Matrix;
pub use lowrank::{Backend, BackendOptions, SingularTriplets};
pub use metrics::MetricReport;
pub use noise::NoiseSpec;
pub use patchgraph::{GeodesicAlgorithm, GeodesicMatrix, NeighborGraph, PatchMatrix};
pub use pipeline::{denoise, DenoiseParams, Stage};
