//! Chamfer distance and mean square error between point sets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::index::NeighborIndex;

/// Neighbors per reference point used by [`mse`] by default.
pub const DEFAULT_MSE_NEIGHBORS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    pub chamfer: f64,
    pub mse: f64,
}

/// Mean over `from` of the squared distance to the nearest point of `to`.
fn mean_nearest_sq(from: &PointCloud, to: &NeighborIndex) -> f64 {
    let terms: Vec<f64> = from
        .points()
        .par_iter()
        .map(|p| to.query_with_distances(p, 1)[0].1)
        .collect();
    terms.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance (sum of both directional mean squared NN distances).
pub fn chamfer(reference: &PointCloud, candidate: &PointCloud) -> Result<f64> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ref_index = NeighborIndex::build(reference)?;
    let cand_index = NeighborIndex::build(candidate)?;
    Ok(mean_nearest_sq(reference, &cand_index) + mean_nearest_sq(candidate, &ref_index))
}

/// For each reference point, the mean squared distance to its `k` nearest
/// candidate points, averaged over the reference.
pub fn mse(reference: &PointCloud, candidate: &PointCloud, k: usize) -> Result<f64> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::invalid("mse needs at least one neighbor"));
    }
    if candidate.len() < k {
        return Err(Error::invalid(format!(
            "mse needs {k} neighbors but candidate has only {} points",
            candidate.len()
        )));
    }
    let index = NeighborIndex::build(candidate)?;
    let terms: Vec<f64> = reference
        .points()
        .par_iter()
        .map(|p| {
            let nn = index.query_with_distances(p, k);
            nn.iter().map(|&(_, d2)| d2).sum::<f64>() / k as f64
        })
        .collect();
    Ok(terms.iter().sum::<f64>() / reference.len() as f64)
}

pub fn evaluate(reference: &PointCloud, candidate: &PointCloud, k: usize) -> Result<MetricResult> {
    Ok(MetricResult {
        chamfer: chamfer(reference, candidate)?,
        mse: mse(reference, candidate, k)?,
    })
}
