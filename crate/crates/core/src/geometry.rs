//! Point storage, patch extraction and synthetic noise.

use nalgebra::{Matrix3xX, Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::index::NeighborIndex;

/// An ordered set of 3D positions with finite coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting any non-finite coordinate.
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinitePoint(i));
        }
        Ok(Self { points })
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(
            coords
                .iter()
                .map(|c| Point3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<f64>> {
        self.points
    }

    /// Returns a copy with every point transformed by `f`.
    pub fn map(&self, f: impl FnMut(&Point3<f64>) -> Point3<f64>) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect())
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> Result<(Point3<f64>, Point3<f64>)> {
        let first = *self.points.first().ok_or(Error::EmptyInput)?;
        Ok(self
            .points
            .iter()
            .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }
}

/// Length of the axis-aligned bounding-box diagonal.
pub fn bounding_box_diagonal(cloud: &PointCloud) -> Result<f64> {
    let (lo, hi) = cloud.bounds()?;
    Ok((hi - lo).norm())
}

/// A point together with its K nearest neighbors, centered on their mean.
///
/// Columns of `matrix` follow `neighbor_indices`, which is ordered by
/// nondecreasing distance from the center point.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center_index: usize,
    pub neighbor_indices: Vec<usize>,
    pub centroid: Point3<f64>,
    pub matrix: Matrix3xX<f64>,
}

impl Patch {
    pub fn k(&self) -> usize {
        self.neighbor_indices.len()
    }

    /// Position of the center point relative to the patch centroid.
    pub fn center_offset(&self, cloud: &PointCloud) -> Vector3<f64> {
        cloud.points()[self.center_index] - self.centroid
    }
}

/// Builds the patch of `k` nearest neighbors (center included) around point `index`.
pub fn extract_patch(
    cloud: &PointCloud,
    index: usize,
    k: usize,
    neighbors: &NeighborIndex,
) -> Result<Patch> {
    let n = cloud.len();
    if k > n {
        return Err(Error::PatchLargerThanCloud { k, n });
    }
    if index >= n {
        return Err(Error::IndexOutOfRange { index, n });
    }
    if k == 0 {
        return Err(Error::invalid("patch size K must be at least 1"));
    }
    let center = cloud.points()[index];
    let mut ids = neighbors.query(&center, k);
    // Coincident points with smaller indices can push the center out of its own patch.
    if !ids.contains(&index) {
        ids.pop();
        ids.insert(0, index);
    }
    Ok(patch_from_indices(cloud, index, ids))
}

pub(crate) fn patch_from_indices(cloud: &PointCloud, index: usize, ids: Vec<usize>) -> Patch {
    let pts = cloud.points();
    let k = ids.len();
    let sum = ids
        .iter()
        .fold(Vector3::zeros(), |acc, &i| acc + pts[i].coords);
    let centroid = Point3::from(sum / k as f64);
    let matrix = Matrix3xX::from_fn(k, |r, c| pts[ids[c]][r] - centroid[r]);
    Patch {
        center_index: index,
        neighbor_indices: ids,
        centroid,
        matrix,
    }
}

/// Perturbs every coordinate with zero-mean Gaussian noise whose standard
/// deviation is `sigma_fraction` times the bounding-box diagonal.
pub fn add_gaussian_noise(
    cloud: &PointCloud,
    sigma_fraction: f64,
    seed: u64,
) -> Result<PointCloud> {
    if !sigma_fraction.is_finite() || sigma_fraction < 0.0 {
        return Err(Error::invalid(format!(
            "noise level must be a non-negative finite number, got {sigma_fraction}"
        )));
    }
    if sigma_fraction == 0.0 || cloud.is_empty() {
        return Ok(cloud.clone());
    }
    let sigma = sigma_fraction * bounding_box_diagonal(cloud)?;
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cloud.map(|p| {
        let dx = normal.sample(&mut rng);
        let dy = normal.sample(&mut rng);
        let dz = normal.sample(&mut rng);
        Point3::new(p.x + dx, p.y + dy, p.z + dz)
    })
}
