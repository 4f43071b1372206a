//! Canonical-space alignment of similar patches and the central-point update.
//!
//! Every patch is rotated into its own principal frame. The remaining sign
//! ambiguity of the eigenvectors (8 axis flips) is resolved by comparing the
//! dominant directions of the 8 octant sub-patches against the query patch.
//! The query point then moves to the mean of the aligned central points,
//! mapped back through the query frame.

use nalgebra::{Matrix3, Matrix3xX, Point3, Vector3};
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{extract_patch, Patch, PointCloud};
use crate::index::NeighborIndex;
use crate::linalg::{gram, sym_eigen_desc};
use crate::similarity::SimilarSet;

/// Offsets closer than this are treated as tied when picking a flip.
pub const FLIP_TIE_TOLERANCE: f64 = 1e-12;

/// Orthogonal map from a patch's original coordinates into its principal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame {
    /// Rows are covariance eigenvectors, eigenvalue-descending.
    pub forward: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub centroid: Point3<f64>,
}

impl EigenFrame {
    pub fn identity(centroid: Point3<f64>) -> Self {
        Self {
            forward: Matrix3::identity(),
            inverse: Matrix3::identity(),
            centroid,
        }
    }

    pub fn to_canonical(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.forward * (p - self.centroid)
    }

    pub fn from_canonical(&self, v: &Vector3<f64>) -> Point3<f64> {
        self.centroid + self.inverse * v
    }
}

/// Flips `v` so its largest-magnitude component is positive (first index wins ties).
fn orient(v: Vector3<f64>) -> Vector3<f64> {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -v
    } else {
        v
    }
}

/// Principal frame of a patch from the eigenvectors of `M·Mᵀ`.
pub fn eigen_frame(patch: &Patch) -> EigenFrame {
    let (_, vectors) = sym_eigen_desc(&gram(&patch.matrix));
    let rows: Vec<Vector3<f64>> = (0..3)
        .map(|i| orient(vectors.column(i).into_owned()))
        .collect();
    let mut forward = Matrix3::from_rows(&[
        rows[0].transpose(),
        rows[1].transpose(),
        rows[2].transpose(),
    ]);
    if forward.determinant() < 0.0 {
        let last = -forward.row(2);
        forward.set_row(2, &last);
    }
    EigenFrame {
        forward,
        inverse: forward.transpose(),
        centroid: patch.centroid,
    }
}

/// A patch expressed in its principal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPatch {
    pub matrix: Matrix3xX<f64>,
    /// The patch's central point in canonical coordinates.
    pub center: Vector3<f64>,
}

pub fn map_to_canonical(frame: &EigenFrame, patch: &Patch) -> CanonicalPatch {
    let center_col = patch
        .neighbor_indices
        .iter()
        .position(|&i| i == patch.center_index)
        .expect("patch contains its center");
    let matrix = frame.forward * &patch.matrix;
    let center = matrix.column(center_col).into_owned();
    CanonicalPatch { matrix, center }
}

/// A sign triple applied to the canonical axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flip(pub [i8; 3]);

impl Flip {
    pub const IDENTITY: Flip = Flip([1, 1, 1]);

    /// All flips in lexicographic order with `+1` before `-1`; identity first.
    pub const ALL: [Flip; 8] = [
        Flip([1, 1, 1]),
        Flip([1, 1, -1]),
        Flip([1, -1, 1]),
        Flip([1, -1, -1]),
        Flip([-1, 1, 1]),
        Flip([-1, 1, -1]),
        Flip([-1, -1, 1]),
        Flip([-1, -1, -1]),
    ];

    pub fn signs(&self) -> Vector3<f64> {
        Vector3::new(self.0[0] as f64, self.0[1] as f64, self.0[2] as f64)
    }

    /// Octant bits toggled by this flip (x = 1, y = 2, z = 4).
    pub fn mask(&self) -> usize {
        (self.0[0] < 0) as usize | ((self.0[1] < 0) as usize) << 1 | ((self.0[2] < 0) as usize) << 2
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        v.component_mul(&self.signs())
    }

    pub fn apply_patch(&self, c: &CanonicalPatch) -> CanonicalPatch {
        let mut matrix = c.matrix.clone();
        for (r, &s) in self.0.iter().enumerate() {
            if s < 0 {
                matrix.row_mut(r).neg_mut();
            }
        }
        CanonicalPatch {
            matrix,
            center: self.apply(&c.center),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlipVariant {
    pub flip: Flip,
    pub patch: CanonicalPatch,
}

pub fn flip_variants(c: &CanonicalPatch) -> Vec<FlipVariant> {
    Flip::ALL
        .iter()
        .map(|&flip| FlipVariant {
            flip,
            patch: flip.apply_patch(c),
        })
        .collect()
}

/// Zero-based octant index `(x<0) + 2·(y<0) + 4·(z<0)`; zero counts as positive.
#[inline]
pub fn octant(v: &Vector3<f64>) -> usize {
    (v.x < 0.0) as usize | ((v.y < 0.0) as usize) << 1 | ((v.z < 0.0) as usize) << 2
}

/// Partitions the columns of a canonical patch into the 8 octants.
pub fn quadrant_split(c: &CanonicalPatch) -> [Vec<Vector3<f64>>; 8] {
    let mut parts: [Vec<Vector3<f64>>; 8] = Default::default();
    for col in c.matrix.column_iter() {
        let v = col.into_owned();
        parts[octant(&v)].push(v);
    }
    parts
}

/// Dominant principal direction of a sub-patch, or `None` below 3 points.
pub fn sub_axis(points: &[Vector3<f64>]) -> Option<Vector3<f64>> {
    if points.len() < 3 {
        return None;
    }
    let mean = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let (_, vectors) = sym_eigen_desc(&cov);
    Some(orient(vectors.column(0).into_owned()))
}

/// Sub-patch axes of all 8 octants.
pub type QuadrantAxes = [Option<Vector3<f64>>; 8];

pub fn quadrant_axes(c: &CanonicalPatch) -> QuadrantAxes {
    let parts = quadrant_split(c);
    let mut axes = [None; 8];
    for (axis, part) in axes.iter_mut().zip(parts.iter()) {
        *axis = sub_axis(part);
    }
    axes
}

/// Sign-insensitive axis mismatch, `min(‖a − b‖, ‖a + b‖)`.
#[inline]
fn axis_mismatch(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm().min((a + b).norm())
}

/// Offset between two sets of octant axes; octants missing on either side add nothing.
pub fn axes_offset(candidate: &QuadrantAxes, reference: &QuadrantAxes) -> f64 {
    candidate
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => axis_mismatch(a, b),
            _ => 0.0,
        })
        .sum()
}

/// Offset σ between a flipped candidate patch and the reference patch.
pub fn alignment_offset(candidate: &CanonicalPatch, reference: &CanonicalPatch) -> f64 {
    axes_offset(&quadrant_axes(candidate), &quadrant_axes(reference))
}

/// Index into [`Flip::ALL`] of the first flip whose offset is within
/// [`FLIP_TIE_TOLERANCE`] of the minimum.
fn pick_flip(offsets: &[f64; 8]) -> usize {
    let min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    offsets
        .iter()
        .position(|&s| s <= min + FLIP_TIE_TOLERANCE)
        .unwrap_or(0)
}

/// The flip of `o` that best matches `reference`.
pub fn best_flip(o: &CanonicalPatch, reference: &CanonicalPatch) -> FlipVariant {
    let ref_axes = quadrant_axes(reference);
    let mut variants = flip_variants(o);
    let mut offsets = [0.0; 8];
    for (s, v) in offsets.iter_mut().zip(&variants) {
        *s = axes_offset(&quadrant_axes(&v.patch), &ref_axes);
    }
    variants.swap_remove(pick_flip(&offsets))
}

/// New position of the query's central point from the aligned central points of
/// its similar patches. Recomputes every member patch from scratch; the filtering
/// pipeline uses [`AlignmentTable`] for the same result with cached frames.
pub fn update_center(
    query: &Patch,
    frame: &EigenFrame,
    similar: &SimilarSet,
    cloud: &PointCloud,
    k: usize,
    index: &NeighborIndex,
) -> Result<Point3<f64>> {
    let reference = map_to_canonical(frame, query);
    if similar.is_empty() {
        return Ok(frame.from_canonical(&reference.center));
    }
    let mut sum = Vector3::zeros();
    for &j in &similar.member_indices {
        let patch = extract_patch(cloud, j, k, index)?;
        let own = eigen_frame(&patch);
        let canonical = map_to_canonical(&own, &patch);
        sum += best_flip(&canonical, &reference).patch.center;
    }
    let mean = sum / similar.len() as f64;
    Ok(frame.from_canonical(&mean))
}

/// Precomputed canonical data for one patch.
#[derive(Debug, Clone)]
pub struct AlignedPatch {
    pub frame: EigenFrame,
    pub center: Vector3<f64>,
    pub axes: QuadrantAxes,
    // Flipping moves an exact-zero coordinate across octants differently from
    // the bit mask, so such patches keep their matrix for the exact route.
    exact: Option<CanonicalPatch>,
}

impl AlignedPatch {
    pub fn new(patch: &Patch) -> Self {
        let frame = eigen_frame(patch);
        let canonical = map_to_canonical(&frame, patch);
        let axes = quadrant_axes(&canonical);
        let has_zero = canonical.matrix.iter().any(|&v| v == 0.0);
        Self {
            frame,
            center: canonical.center,
            axes,
            exact: has_zero.then_some(canonical),
        }
    }

    /// σ for every flip in [`Flip::ALL`] order against `reference` axes.
    pub fn flip_offsets(&self, reference: &QuadrantAxes) -> [f64; 8] {
        let mut offsets = [0.0; 8];
        match &self.exact {
            Some(c) => {
                for (s, flip) in offsets.iter_mut().zip(Flip::ALL.iter()) {
                    *s = axes_offset(&quadrant_axes(&flip.apply_patch(c)), reference);
                }
            }
            None => {
                for (s, flip) in offsets.iter_mut().zip(Flip::ALL.iter()) {
                    let mask = flip.mask();
                    let signs = flip.signs();
                    let mut total = 0.0;
                    for (q, b) in reference.iter().enumerate() {
                        if let (Some(a), Some(b)) = (&self.axes[q ^ mask], b) {
                            total += axis_mismatch(&a.component_mul(&signs), b);
                        }
                    }
                    *s = total;
                }
            }
        }
        offsets
    }

    pub fn best_flip(&self, reference: &QuadrantAxes) -> Flip {
        Flip::ALL[pick_flip(&self.flip_offsets(reference))]
    }
}

/// Canonical data for every patch of one cloud snapshot.
#[derive(Debug, Clone)]
pub struct AlignmentTable {
    patches: Vec<AlignedPatch>,
}

impl AlignmentTable {
    pub fn build(cloud: &PointCloud, k: usize, index: &NeighborIndex) -> Result<Self> {
        let patches = (0..cloud.len())
            .into_par_iter()
            .map(|i| extract_patch(cloud, i, k, index).map(|p| AlignedPatch::new(&p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { patches })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn get(&self, i: usize) -> &AlignedPatch {
        &self.patches[i]
    }

    /// Updated position of point `query` given its similar members (ascending order).
    pub fn update(&self, query: usize, members: &[usize]) -> Point3<f64> {
        let q = &self.patches[query];
        if members.is_empty() {
            return q.frame.from_canonical(&q.center);
        }
        let mut sum = Vector3::zeros();
        for &j in members {
            let m = &self.patches[j];
            sum += m.best_flip(&q.axes).apply(&m.center);
        }
        let mean = sum / members.len() as f64;
        q.frame.from_canonical(&mean)
    }
}
