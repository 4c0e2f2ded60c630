//! Extended-variance vector quantization.
//!
//! The extended variance generalizes the K-means distortion with a
//! neighborhood structure on the centroid index lattice: each Voronoi cell
//! `i` is charged the squared distance to every centroid `j`, weighted by
//! `Λ(i − j)`. With the Kronecker kernel the criterion reduces to half the
//! classical mean squared quantization error.
//!
//! The crate provides
//!
//! * [`lattice`]: box lattices and neighborhood kernels,
//! * [`quantizer`]: Voronoi assignment, empirical and Monte Carlo extended variance,
//! * [`optimizer`]: a batch minimizer with multi-start and separation repair,
//! * [`datagen`]: seeded samplers on the unit cube,
//! * [`theory`]: numerical checks of the displacement bound, the uniform
//!   law of large numbers and the consistency of quasi-minimizers,
//! * [`cli`]: the `extvar` command-line front end.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod io;
pub mod lattice;
pub mod optimizer;
pub mod quantizer;
pub mod rng;
pub mod sum;
pub mod svg;
pub mod theory;

pub use datagen::{random_config_in_d, sample, PointSampler, Sampler};
pub use error::{Error, Result};
pub use lattice::{Kernel, Lattice, NeighborhoodFunction};
pub use optimizer::{
    batch_update, enforce_separation, fit, is_quasi_minimizer, FitParams, FitResult, Init,
    QuasiMinimizerSpec,
};
pub use quantizer::{
    assign, empirical_variance, g_value, mc_variance, partition, Assignment, Configuration,
    SampleSet,
};
