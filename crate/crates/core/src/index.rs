//! Static kd-tree for exact K-nearest-neighbor queries.
//!
//! Results are ordered by `(squared distance, point index)`, so ties at equal
//! distance always resolve toward the smaller index and match an exhaustive scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

/// Immutable spatial index over a point cloud.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    coords: Vec<[f64; 3]>,
    // Tree nodes live implicitly in `order`: the node of range [lo, hi) sits at
    // (lo + hi) / 2 and splits along `axis[mid]`.
    order: Vec<usize>,
    axis: Vec<u8>,
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyInput);
        }
        let coords: Vec<[f64; 3]> = cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect();
        let n = coords.len();
        let mut index = Self {
            coords,
            order: (0..n).collect(),
            axis: vec![0; n],
        };
        index.split(0, n);
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn split(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let mut lower = [f64::INFINITY; 3];
        let mut upper = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            for a in 0..3 {
                lower[a] = lower[a].min(self.coords[i][a]);
                upper[a] = upper[a].max(self.coords[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (upper[a] - lower[a]).total_cmp(&(upper[b] - lower[b])))
            .unwrap_or(0);
        let mid = (lo + hi) / 2;
        let coords = &self.coords;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&i, &j| {
            coords[i][axis].total_cmp(&coords[j][axis])
        });
        self.axis[mid] = axis as u8;
        self.split(lo, mid);
        self.split(mid + 1, hi);
    }

    #[inline]
    fn dist2(&self, i: usize, q: &[f64; 3]) -> f64 {
        let p = &self.coords[i];
        let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
        dx * dx + dy * dy + dz * dz
    }

    /// The `k` nearest point indices to `query`, nearest first.
    ///
    /// Returns all points when `k` exceeds the cloud size.
    pub fn query(&self, query: &Point3<f64>, k: usize) -> Vec<usize> {
        self.query_with_distances(query, k)
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    /// Like [`query`](Self::query) but also returns squared distances.
    pub fn query_with_distances(&self, query: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn(0, self.len(), &q, k, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.index, c.dist2))
            .collect()
    }

    fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, c: Candidate) {
        if heap.len() < k {
            heap.push(c);
        } else if let Some(top) = heap.peek() {
            if c < *top {
                heap.pop();
                heap.push(c);
            }
        }
    }

    fn knn(&self, lo: usize, hi: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                let c = Candidate {
                    dist2: self.dist2(i, q),
                    index: i,
                };
                Self::offer(heap, k, c);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        let axis = self.axis[mid] as usize;
        Self::offer(
            heap,
            k,
            Candidate {
                dist2: self.dist2(node, q),
                index: node,
            },
        );
        let diff = q[axis] - self.coords[node][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn(near.0, near.1, q, k, heap);
        // Equal plane distance must still be visited: a tied point may carry a smaller index.
        let visit_far = heap.len() < k || heap.peek().is_none_or(|top| diff * diff <= top.dist2);
        if visit_far {
            self.knn(far.0, far.1, q, k, heap);
        }
    }

    /// All points within `radius` of `query` (inclusive), nearest first.
    pub fn within_radius(&self, query: &Point3<f64>, radius: f64) -> Vec<usize> {
        let q = [query.x, query.y, query.z];
        let r2 = radius * radius;
        let mut found = Vec::new();
        self.radius(0, self.len(), &q, r2, &mut found);
        found.sort_unstable();
        found.into_iter().map(|c| c.index).collect()
    }

    fn radius(&self, lo: usize, hi: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Candidate>) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                let d = self.dist2(i, q);
                if d <= r2 {
                    out.push(Candidate { dist2: d, index: i });
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        let axis = self.axis[mid] as usize;
        let d = self.dist2(node, q);
        if d <= r2 {
            out.push(Candidate {
                dist2: d,
                index: node,
            });
        }
        let diff = q[axis] - self.coords[node][axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius(lo, mid, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius(mid + 1, hi, q, r2, out);
        }
    }
}
