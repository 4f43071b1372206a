//! Non-local low-rank point cloud filtering.
//!
//! Each point's K-neighborhood is decomposed into low-rank and sparse parts;
//! patches with close low-rank singular values are aligned in a shared
//! canonical frame and averaged to move the point toward the surface.

pub mod alignment;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod index;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rpca;
pub mod similarity;
pub mod synthetic;

pub use error::{Error, Result};
pub use geometry::{add_gaussian_noise, bounding_box_diagonal, extract_patch, Patch, PointCloud};
pub use index::NeighborIndex;
pub use metrics::{chamfer, evaluate, mse, MetricResult};
pub use pipeline::{filter, filter_sampled, FilterParams, FilterReport, Scheme};
pub use rpca::{decompose, Decomposition, Descriptor, RpcaParams};
pub use similarity::{SimilarSet, SimilarSets};
