//! Filtering passes and the two iteration schemes.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alignment::AlignmentTable;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::index::NeighborIndex;
use crate::rpca::RpcaParams;
use crate::similarity::{build_descriptor_table_with, SimilarSets};

/// How similar patches are obtained after the first iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Search similar patches again on every iteration (better on heavy noise).
    RefindEachIteration,
    /// Keep the first iteration's similar patches (faster, keeps features on light noise).
    ReuseFirstSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub k: usize,
    pub theta: f64,
    pub iterations: usize,
    pub scheme: Scheme,
    pub rpca: RpcaParams,
}

impl FilterParams {
    pub fn new(k: usize, theta: f64, iterations: usize, scheme: Scheme) -> Self {
        Self {
            k,
            theta,
            iterations,
            scheme,
            rpca: RpcaParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::invalid(format!(
                "K must be at least 3, got {}",
                self.k
            )));
        }
        if self.theta.is_nan() || self.theta <= 0.0 {
            return Err(Error::invalid(format!(
                "theta must be positive, got {}",
                self.theta
            )));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        self.rpca.validate()
    }
}

/// Wall time of one iteration. `step1` covers similar-patch finding (index,
/// descriptors, search), `step2` the position update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PassTiming {
    pub step1: Duration,
    pub step2: Duration,
}

impl PassTiming {
    pub fn subtotal(&self) -> Duration {
        self.step1 + self.step2
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterReport {
    pub iterations: Vec<PassTiming>,
    /// Similar-set size per point, from the most recent search.
    pub similar_sizes: Vec<usize>,
    /// Patch decompositions that hit the iteration cap, summed over searches.
    pub unconverged_decompositions: usize,
}

impl FilterReport {
    pub fn step1_total(&self) -> Duration {
        self.iterations.iter().map(|t| t.step1).sum()
    }

    pub fn step2_total(&self) -> Duration {
        self.iterations.iter().map(|t| t.step2).sum()
    }

    pub fn total(&self) -> Duration {
        self.step1_total() + self.step2_total()
    }

    /// Line-oriented text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.iterations.iter().enumerate() {
            out.push_str(&format!(
                "iteration={} step1_seconds={:.6} step2_seconds={:.6} subtotal_seconds={:.6}\n",
                i + 1,
                t.step1.as_secs_f64(),
                t.step2.as_secs_f64(),
                t.subtotal().as_secs_f64()
            ));
        }
        out.push_str(&format!(
            "total step1_seconds={:.6} step2_seconds={:.6} total_seconds={:.6}\n",
            self.step1_total().as_secs_f64(),
            self.step2_total().as_secs_f64(),
            self.total().as_secs_f64()
        ));
        out.push_str(&format!(
            "unconverged_decompositions={}\n",
            self.unconverged_decompositions
        ));
        if !self.similar_sizes.is_empty() {
            let n = self.similar_sizes.len();
            let min = self.similar_sizes.iter().min().copied().unwrap_or(0);
            let max = self.similar_sizes.iter().max().copied().unwrap_or(0);
            let mean = self.similar_sizes.iter().sum::<usize>() as f64 / n as f64;
            out.push_str(&format!(
                "similar_min={min} similar_mean={mean:.3} similar_max={max}\n"
            ));
            for (i, s) in self.similar_sizes.iter().enumerate() {
                out.push_str(&format!("point={i} similar={s}\n"));
            }
        }
        out
    }
}

/// Output of a single pass.
#[derive(Debug, Clone)]
pub struct PassOutput {
    pub cloud: PointCloud,
    pub sets: SimilarSets,
    pub timing: PassTiming,
    /// Present only when this pass ran the search.
    pub similar_sizes: Option<Vec<usize>>,
    pub unconverged: usize,
}

/// One filtering pass. With `cached` sets the search is skipped, and patches and
/// frames are rebuilt on the current cloud. All points are updated from the same
/// input snapshot.
pub fn filter_pass(
    cloud: &PointCloud,
    params: &FilterParams,
    cached: Option<&SimilarSets>,
) -> Result<PassOutput> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if params.k > cloud.len() {
        return Err(Error::PatchLargerThanCloud {
            k: params.k,
            n: cloud.len(),
        });
    }
    if let Some(sets) = cached {
        if sets.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "cached similar sets cover {} points, cloud has {}",
                sets.len(),
                cloud.len()
            )));
        }
    }

    let start = Instant::now();
    let (index, sets, sizes, unconverged) = match cached {
        Some(sets) => (None, sets.clone(), None, 0),
        None => {
            let index = NeighborIndex::build(cloud)?;
            let table = build_descriptor_table_with(cloud, params.k, &params.rpca, &index)?;
            let unconverged = table.unconverged();
            let sets = SimilarSets::new(table, params.theta);
            let sizes = sets.sizes();
            (Some(index), sets, Some(sizes), unconverged)
        }
    };
    let step1 = start.elapsed();

    let start = Instant::now();
    let index = match index {
        Some(index) => index,
        None => NeighborIndex::build(cloud)?,
    };
    let table = AlignmentTable::build(cloud, params.k, &index)?;
    let updated: Vec<_> = (0..cloud.len())
        .into_par_iter()
        .map(|i| table.update(i, &sets.members(i)))
        .collect();
    let out = PointCloud::new(updated)?;
    let step2 = start.elapsed();

    Ok(PassOutput {
        cloud: out,
        sets,
        timing: PassTiming { step1, step2 },
        similar_sizes: sizes,
        unconverged,
    })
}

/// Runs `params.iterations` passes according to the chosen scheme.
pub fn filter(cloud: &PointCloud, params: &FilterParams) -> Result<(PointCloud, FilterReport)> {
    params.validate()?;
    let mut report = FilterReport::default();
    let mut current = cloud.clone();
    let mut reused: Option<SimilarSets> = None;
    for iter in 0..params.iterations {
        let cached = match params.scheme {
            Scheme::RefindEachIteration => None,
            Scheme::ReuseFirstSearch => reused.as_ref(),
        };
        let pass = filter_pass(&current, params, cached)?;
        log::info!(
            "iteration {}: step1 {:.3}s step2 {:.3}s",
            iter + 1,
            pass.timing.step1.as_secs_f64(),
            pass.timing.step2.as_secs_f64()
        );
        report.iterations.push(pass.timing);
        report.unconverged_decompositions += pass.unconverged;
        if let Some(sizes) = pass.similar_sizes {
            report.similar_sizes = sizes;
        }
        if params.scheme == Scheme::ReuseFirstSearch && reused.is_none() {
            reused = Some(pass.sets);
        }
        current = pass.cloud;
    }
    Ok((current, report))
}

/// Uniform random selection of `round(fraction · N)` points (at least one),
/// returned in their original order together with their original indices.
pub fn subsample(cloud: &PointCloud, fraction: f64, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "sampling fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = cloud.len();
    if fraction == 1.0 {
        return Ok((cloud.clone(), (0..n).collect()));
    }
    let amount = ((fraction * n as f64).round() as usize).clamp(1.min(n), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, amount).into_vec();
    picked.sort_unstable();
    let selected = PointCloud::new(picked.iter().map(|&i| cloud.points()[i]).collect())?;
    Ok((selected, picked))
}

/// Filters a random subset of the points; the rest pass through unchanged.
pub fn filter_sampled(
    cloud: &PointCloud,
    params: &FilterParams,
    fraction: f64,
    seed: u64,
) -> Result<(PointCloud, FilterReport)> {
    let (selected, map) = subsample(cloud, fraction, seed)?;
    let (filtered, report) = filter(&selected, params)?;
    let mut points = cloud.points().to_vec();
    for (p, &i) in filtered.points().iter().zip(&map) {
        points[i] = *p;
    }
    Ok((PointCloud::new(points)?, report))
}
