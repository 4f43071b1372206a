//! Non-local search for patches with matching RPCA descriptors.

use rayon::prelude::*;

use crate::alignment::eigen_frame;
use crate::error::{Error, Result};
use crate::geometry::{extract_patch, Patch, PointCloud};
use crate::index::NeighborIndex;
use crate::rpca::{decompose, descriptor, Decomposition, Descriptor, RpcaParams};

/// Euclidean distance between two descriptors.
pub fn patch_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    (a.0 - b.0).norm()
}

/// Two patches are similar when their descriptor distance is strictly below `theta`.
#[inline]
pub fn is_similar(d: f64, theta: f64) -> bool {
    d < theta
}

/// Per-point descriptors for one cloud, computed once per filtering pass.
#[derive(Debug, Clone)]
pub struct DescriptorTable {
    descriptors: Vec<Descriptor>,
    // Point indices sorted by leading singular value, for windowed search.
    by_leading: Vec<usize>,
    leading: Vec<f64>,
    unconverged: usize,
}

impl DescriptorTable {
    pub fn from_descriptors(descriptors: Vec<Descriptor>) -> Self {
        let mut by_leading: Vec<usize> = (0..descriptors.len()).collect();
        by_leading.sort_by(|&a, &b| {
            descriptors[a].0[0]
                .total_cmp(&descriptors[b].0[0])
                .then(a.cmp(&b))
        });
        let leading = by_leading.iter().map(|&i| descriptors[i].0[0]).collect();
        Self {
            descriptors,
            by_leading,
            leading,
            unconverged: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn get(&self, i: usize) -> &Descriptor {
        &self.descriptors[i]
    }

    pub fn descriptors(&self) -> &[Descriptor] {
        &self.descriptors
    }

    /// Number of patches whose decomposition hit the iteration cap.
    pub fn unconverged(&self) -> usize {
        self.unconverged
    }

    /// Range of `by_leading` that can hold matches: |Δσ₁| ≤ ‖Δv‖ < θ.
    /// The window is padded slightly; the exact test happens afterwards.
    fn window(&self, target: &Descriptor, theta: f64) -> (usize, usize) {
        let lead = target.0[0];
        let pad = theta * (1.0 + 1e-9);
        let lo = self.leading.partition_point(|&v| v < lead - pad);
        let hi = self.leading.partition_point(|&v| v <= lead + pad);
        (lo, hi)
    }

    /// Indices whose descriptor lies within `theta` of `target` (strictly), ascending.
    fn search(&self, target: &Descriptor, theta: f64) -> Vec<usize> {
        if theta.is_nan() || theta <= 0.0 {
            return Vec::new();
        }
        let (lo, hi) = self.window(target, theta);
        let mut out: Vec<usize> = self.by_leading[lo..hi]
            .iter()
            .copied()
            .filter(|&j| is_similar(patch_distance(target, &self.descriptors[j]), theta))
            .collect();
        out.sort_unstable();
        out
    }

    fn count(&self, target: &Descriptor, theta: f64) -> usize {
        if theta.is_nan() || theta <= 0.0 {
            return 0;
        }
        let (lo, hi) = self.window(target, theta);
        self.by_leading[lo..hi]
            .iter()
            .filter(|&&j| is_similar(patch_distance(target, &self.descriptors[j]), theta))
            .count()
    }
}

/// Decomposes a patch expressed in its principal frame.
///
/// The entry-wise sparsity penalty depends on the coordinate axes, so the raw
/// patch would give orientation-dependent results. In the principal frame a
/// rotated copy of the patch differs only by row signs, which both shrinkage
/// steps commute with.
pub fn decompose_patch(patch: &Patch, rpca: &RpcaParams) -> Result<Decomposition> {
    let frame = eigen_frame(patch);
    decompose(&(frame.forward * &patch.matrix), rpca)
}

/// RPCA descriptor of one patch and whether its decomposition converged.
pub fn patch_descriptor(patch: &Patch, rpca: &RpcaParams) -> Result<(Descriptor, bool)> {
    let d = decompose_patch(patch, rpca)?;
    Ok((descriptor(&d.low_rank), d.converged))
}

/// Descriptor of every patch of size `k` in the cloud.
pub fn build_descriptor_table(
    cloud: &PointCloud,
    k: usize,
    rpca: &RpcaParams,
) -> Result<DescriptorTable> {
    let index = NeighborIndex::build(cloud)?;
    build_descriptor_table_with(cloud, k, rpca, &index)
}

pub fn build_descriptor_table_with(
    cloud: &PointCloud,
    k: usize,
    rpca: &RpcaParams,
    index: &NeighborIndex,
) -> Result<DescriptorTable> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k > cloud.len() {
        return Err(Error::PatchLargerThanCloud { k, n: cloud.len() });
    }
    rpca.validate()?;
    let computed: Vec<(Descriptor, bool)> = (0..cloud.len())
        .into_par_iter()
        .map(|i| patch_descriptor(&extract_patch(cloud, i, k, index)?, rpca))
        .collect::<Result<_>>()?;
    let unconverged = computed.iter().filter(|(_, c)| !c).count();
    if unconverged > 0 {
        log::debug!("{unconverged} patch decompositions reached the iteration cap");
    }
    let mut table =
        DescriptorTable::from_descriptors(computed.into_iter().map(|(d, _)| d).collect());
    table.unconverged = unconverged;
    Ok(table)
}

/// Patches similar to one query patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarSet {
    pub query_index: usize,
    /// Ascending, without duplicates; contains `query_index` whenever `theta > 0`.
    pub member_indices: Vec<usize>,
}

impl SimilarSet {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

/// All patches `j` with `‖v_query − v_j‖ < theta`, the query included.
pub fn find_similar(query_index: usize, table: &DescriptorTable, theta: f64) -> SimilarSet {
    SimilarSet {
        query_index,
        member_indices: table.search(table.get(query_index), theta),
    }
}

/// Like [`find_similar`] but only among `candidates` (used for the local-search comparison).
pub fn find_similar_among(
    query_index: usize,
    table: &DescriptorTable,
    theta: f64,
    candidates: &[usize],
) -> SimilarSet {
    let v = table.get(query_index);
    let mut member_indices: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&j| is_similar(patch_distance(v, table.get(j)), theta))
        .collect();
    member_indices.sort_unstable();
    member_indices.dedup();
    SimilarSet {
        query_index,
        member_indices,
    }
}

/// Candidates for a local search: points within `factor` times the patch radius
/// (distance to the K-th neighbor) of the query point.
pub fn local_candidates(
    cloud: &PointCloud,
    index: &NeighborIndex,
    query_index: usize,
    k: usize,
    factor: f64,
) -> Vec<usize> {
    let p = cloud.points()[query_index];
    let radius = index
        .query_with_distances(&p, k)
        .last()
        .map_or(0.0, |&(_, d2)| d2.sqrt());
    index.within_radius(&p, factor * radius)
}

/// The similar sets of every point, backed by a frozen descriptor table.
///
/// Membership is a pure function of the table and threshold, so holding the
/// table reproduces the sets exactly without materializing all of them.
#[derive(Debug, Clone)]
pub struct SimilarSets {
    table: DescriptorTable,
    theta: f64,
}

impl SimilarSets {
    pub fn new(table: DescriptorTable, theta: f64) -> Self {
        Self { table, theta }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn table(&self) -> &DescriptorTable {
        &self.table
    }

    pub fn members(&self, query_index: usize) -> Vec<usize> {
        self.table.search(self.table.get(query_index), self.theta)
    }

    pub fn get(&self, query_index: usize) -> SimilarSet {
        find_similar(query_index, &self.table, self.theta)
    }

    pub fn size(&self, query_index: usize) -> usize {
        self.table.count(self.table.get(query_index), self.theta)
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.size(i))
            .collect()
    }
}
