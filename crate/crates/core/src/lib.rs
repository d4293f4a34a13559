//! Source detection with false cluster proportion control.
//!
//! Detections are connected clusters of a level set of a per-pixel statistic.
//! The threshold is chosen so that, with probability at least `1 - alpha`,
//! at most a fraction `c` of the reported clusters are background. The
//! background set is bounded by a Monte-Carlo confidence superset simulated
//! from the noise model pushed through the same statistic pipeline as the
//! data.
//!
//! Grid math is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the double-precision types the pipeline uses.

pub mod cluster;
pub mod error;
pub mod graph;
pub mod image;
pub mod msd;
pub mod noise;
pub mod pipeline;
pub mod scalar;
mod serde_float;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Image = image::ImageGrid<f64>;
pub type Image32 = image::ImageGrid<f32>;
pub type Clusters = cluster::ClusterSet<f64>;
pub type Fcp = cluster::FcpResult<f64>;
pub type MaxTable = noise::MaxDistributionTable<f64>;
pub type Kernel = msd::MsdKernel<f64>;
