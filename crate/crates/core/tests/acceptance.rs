//! Acceptance checks. Runs every criterion in sequence, prints one line each,
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3xX, Point3, Rotation3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlpf::alignment::{best_flip, CanonicalPatch, Flip};
use nlpf::pipeline::{filter, filter_sampled, FilterParams, Scheme};
use nlpf::rpca::{decompose, descriptor, RpcaParams};
use nlpf::similarity::{build_descriptor_table, SimilarSets};
use nlpf::{add_gaussian_noise, chamfer, extract_patch, mse, synthetic, NeighborIndex, PointCloud};

const RECOVERY_TOL: f64 = 1e-4;
const RECOVERY_BUDGET: Duration = Duration::from_secs(10);
const RESIDUAL_TOL: f64 = 1e-7;
const INVARIANCE_TOL: f64 = 1e-9;
const CD_RATIO_LOW_NOISE: f64 = 0.6;
const CD_RATIO_HIGH_NOISE: f64 = 0.8;
const MODEL_BUDGET: Duration = Duration::from_secs(15 * 60);
const SCHEME_TOL: f64 = 1e-12;
const STEP1_RATIO: f64 = 0.4;
const METRIC_TOL: f64 = 1e-12;
const SAMPLING_RATIO: f64 = 0.6;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. Planted low-rank plus sparse recovery.
fn rpca_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let params = RpcaParams::default();
    let start = Instant::now();
    let mut recovered = 0;
    let mut worst = 0.0f64;
    let trials = 100;
    for t in 0..trials {
        let rank = 1 + t % 2;
        let u = Matrix3xX::from_fn(rank, |_, _| rng.gen_range(-1.0..1.0));
        let v = Matrix3xX::from_fn(100, |_, _| rng.gen_range(-1.0..1.0));
        let plant = &u * v.rows(0, rank);
        let typical = plant.abs().mean();
        let mut m = plant.clone();
        let mut cells: Vec<usize> = (0..300).collect();
        cells.shuffle(&mut rng);
        for &c in cells.iter().take(30) {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            m[(c % 3, c / 3)] += sign * 10.0 * typical;
        }
        let d = decompose(&m, &params).expect("finite input");
        let err = (&d.low_rank - &plant).norm() / plant.norm();
        worst = worst.max(err);
        if err <= RECOVERY_TOL {
            recovered += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        recovered == trials && elapsed < RECOVERY_BUDGET,
        format!(
            "{recovered}/{trials} within {RECOVERY_TOL:e} (worst relative error {worst:.3e}), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_surface_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    let bumps = Vector3::new(
        rng.gen_range(0.0..0.5),
        rng.gen_range(0.0..0.5),
        rng.gen_range(1.0..6.0),
    );
    let pts = (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let z = bumps.x * (bumps.z * x).sin() + bumps.y * (y * y) + rng.gen_range(-0.02..0.02);
            Point3::new(x, y, z)
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

// 2. Residual bound on converged decompositions.
fn reconstruction_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let params = RpcaParams::default();
    let mut converged = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    let mut patches = 0;
    while patches < 1000 {
        let cloud = random_surface_cloud(&mut rng, 400);
        let index = NeighborIndex::build(&cloud).unwrap();
        for _ in 0..50 {
            let k = rng.gen_range(5..=80);
            let i = rng.gen_range(0..cloud.len());
            let patch = extract_patch(&cloud, i, k, &index).unwrap();
            let d = decompose(&patch.matrix, &params).unwrap();
            patches += 1;
            if d.converged {
                converged += 1;
                let rel = (&patch.matrix - &d.low_rank - &d.sparse).norm() / patch.matrix.norm();
                worst = worst.max(rel);
                if rel > RESIDUAL_TOL {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && converged > 0,
        format!("{converged}/{patches} converged, {violations} above {RESIDUAL_TOL:e} (worst {worst:.3e})"),
    )
}

// 3. Descriptor invariance under rotation and column permutation.
fn descriptor_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.gen_range(3..=100);
        let l = Matrix3xX::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
        let base = descriptor(&l);
        let axis = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let rot = Rotation3::new(axis * rng.gen_range(0.0..std::f64::consts::PI));
        let rotated = descriptor(&(rot.matrix() * &l));
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let permuted = descriptor(&Matrix3xX::from_fn(k, |r, c| l[(r, order[c])]));
        worst = worst
            .max((rotated.0 - base.0).abs().max())
            .max((permuted.0 - base.0).abs().max());
    }
    outcome(
        worst <= INVARIANCE_TOL,
        format!("1000 trials, worst deviation {worst:.3e} (limit {INVARIANCE_TOL:e})"),
    )
}

// 4. Similar-set laws and growth with the threshold.
fn similar_set_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut broken = Vec::new();
    for c in 0..50 {
        let n = rng.gen_range(100..=2000);
        let cloud = random_surface_cloud(&mut rng, n);
        let k = rng.gen_range(5..=30);
        let table = build_descriptor_table(&cloud, k, &RpcaParams::default()).unwrap();
        let theta = rng.gen_range(0.005..0.1);
        let narrow = SimilarSets::new(table.clone(), theta);
        let wide = SimilarSets::new(table, 2.0 * theta);
        let sets: Vec<Vec<usize>> = (0..n).map(|i| narrow.members(i)).collect();
        for i in 0..n {
            if sets[i].binary_search(&i).is_err() {
                broken.push(format!("cloud {c}: point {i} not in its own set"));
            }
            for &j in &sets[i] {
                if sets[j].binary_search(&i).is_err() {
                    broken.push(format!("cloud {c}: {i}~{j} not symmetric"));
                }
            }
            let superset = wide.members(i);
            if sets[i].iter().any(|j| superset.binary_search(j).is_err()) {
                broken.push(format!("cloud {c}: set of {i} shrinks as theta grows"));
            }
        }
    }

    let ridge = synthetic::ridged_plane(71, 0.2, 1.0);
    let table = build_descriptor_table(&ridge, 250, &RpcaParams::default()).unwrap();
    let counts: Vec<usize> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&t| SimilarSets::new(table.clone(), t).sizes().iter().sum())
        .collect();
    let increasing = counts.windows(2).all(|w| w[0] < w[1]);
    outcome(
        broken.is_empty() && increasing,
        format!(
            "50 clouds, {} law violations{}; ridge totals {:?} at theta 0.05/0.1/0.2",
            broken.len(),
            broken
                .first()
                .map(|b| format!(" (first: {b})"))
                .unwrap_or_default(),
            counts
        ),
    )
}

fn planted_patch(rng: &mut impl Rng) -> CanonicalPatch {
    let mut cols = Vec::new();
    for q in 0..8 {
        let sign = Vector3::new(
            if q & 1 == 0 { 1.0 } else { -1.0 },
            if q & 2 == 0 { 1.0 } else { -1.0 },
            if q & 4 == 0 { 1.0 } else { -1.0 },
        );
        let dir = Vector3::new(
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.1..1.0),
        );
        for _ in 0..rng.gen_range(3..8) {
            let t = rng.gen_range(0.2..1.0);
            let jitter = Vector3::new(
                rng.gen_range(0.0..0.05),
                rng.gen_range(0.0..0.05),
                rng.gen_range(0.0..0.05),
            );
            cols.push((dir * t + jitter + Vector3::repeat(0.01)).component_mul(&sign));
        }
    }
    CanonicalPatch {
        center: cols[0],
        matrix: Matrix3xX::from_columns(&cols),
    }
}

// 5. Flip recovery on planted asymmetric patches.
fn flip_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut misses = 0;
    for _ in 0..1000 {
        let reference = planted_patch(&mut rng);
        for flip in Flip::ALL {
            let flipped = flip.apply_patch(&reference);
            // Every flip is its own inverse.
            if best_flip(&flipped, &reference).flip != flip {
                misses += 1;
            }
        }
    }
    outcome(misses == 0, format!("8000 cases, {misses} misses"))
}

struct Case {
    name: &'static str,
    clean: PointCloud,
    level: f64,
    k: usize,
    theta: f64,
    bound: f64,
}

// 6. Chamfer reduction on the bundled models.
fn denoising_efficacy() -> Outcome {
    let cube = synthetic::cube_surface(57);
    let sphere = synthetic::fibonacci_sphere(20_000);
    let ridge = synthetic::ridged_plane(141, 0.2, 1.0);
    let cases = [
        Case {
            name: "cube",
            clean: cube.clone(),
            level: 0.005,
            k: 20,
            theta: 0.002,
            bound: CD_RATIO_LOW_NOISE,
        },
        Case {
            name: "cube",
            clean: cube,
            level: 0.01,
            k: 30,
            theta: 0.004,
            bound: CD_RATIO_HIGH_NOISE,
        },
        Case {
            name: "sphere",
            clean: sphere.clone(),
            level: 0.005,
            k: 50,
            theta: 0.01,
            bound: CD_RATIO_LOW_NOISE,
        },
        Case {
            name: "sphere",
            clean: sphere,
            level: 0.01,
            k: 50,
            theta: 0.01,
            bound: CD_RATIO_HIGH_NOISE,
        },
        Case {
            name: "ridge",
            clean: ridge.clone(),
            level: 0.005,
            k: 30,
            theta: 0.003,
            bound: CD_RATIO_LOW_NOISE,
        },
        Case {
            name: "ridge",
            clean: ridge,
            level: 0.01,
            k: 30,
            theta: 0.003,
            bound: CD_RATIO_HIGH_NOISE,
        },
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let noisy = add_gaussian_noise(&case.clean, case.level, 600 + i as u64).unwrap();
        let start = Instant::now();
        let params = FilterParams::new(case.k, case.theta, 1, Scheme::RefindEachIteration);
        let (filtered, _) = filter(&noisy, &params).unwrap();
        let elapsed = start.elapsed();
        let ratio =
            chamfer(&filtered, &case.clean).unwrap() / chamfer(&noisy, &case.clean).unwrap();
        let ok = ratio <= case.bound && elapsed < MODEL_BUDGET;
        pass &= ok;
        parts.push(format!(
            "{}@{}%: {ratio:.3} (<= {}) {:.1}s{}",
            case.name,
            case.level * 100.0,
            case.bound,
            elapsed.as_secs_f64(),
            if ok { "" } else { " FAIL" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn max_displacement(a: &PointCloud, b: &PointCloud) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p - q).abs().max())
        .fold(0.0, f64::max)
}

// 7. Scheme equivalence and step-1 savings.
fn scheme_contract() -> Outcome {
    let clean = synthetic::fibonacci_sphere(10_000);
    let noisy = add_gaussian_noise(&clean, 0.005, 700).unwrap();
    let one = |scheme, iterations| {
        filter(&noisy, &FilterParams::new(50, 0.01, iterations, scheme)).unwrap()
    };
    let (a, _) = one(Scheme::RefindEachIteration, 1);
    let (b, _) = one(Scheme::ReuseFirstSearch, 1);
    let gap = max_displacement(&a, &b);
    let (_, refind) = one(Scheme::RefindEachIteration, 3);
    let (_, reuse) = one(Scheme::ReuseFirstSearch, 3);
    let ratio = reuse.step1_total().as_secs_f64() / refind.step1_total().as_secs_f64();
    outcome(
        gap <= SCHEME_TOL && ratio < STEP1_RATIO,
        format!(
            "1-iteration gap {gap:.3e}; 3-iteration step-1 {:.2}s vs {:.2}s (ratio {ratio:.3} < {STEP1_RATIO})",
            reuse.step1_total().as_secs_f64(),
            refind.step1_total().as_secs_f64()
        ),
    )
}

fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let one_way = |from: &PointCloud, to: &PointCloud| {
        from.points()
            .iter()
            .map(|p| {
                to.points()
                    .iter()
                    .map(|q| (p - q).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

fn brute_mse(reference: &PointCloud, candidate: &PointCloud, k: usize) -> f64 {
    reference
        .points()
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = candidate
                .points()
                .iter()
                .map(|q| (p - q).norm_squared())
                .collect();
            d.sort_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .sum::<f64>()
        / reference.len() as f64
}

fn uniform_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect(),
    )
    .unwrap()
}

// 8. Metrics against exhaustive evaluation.
fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    let mut identity_ok = true;
    for _ in 0..200 {
        let na = rng.gen_range(10..=500);
        let nb = rng.gen_range(10..=500);
        let a = uniform_cloud(&mut rng, na);
        let b = uniform_cloud(&mut rng, nb);
        worst = worst
            .max((chamfer(&a, &b).unwrap() - brute_chamfer(&a, &b)).abs())
            .max((mse(&a, &b, 10).unwrap() - brute_mse(&a, &b, 10)).abs());
        identity_ok &= chamfer(&a, &a).unwrap() == 0.0;
        identity_ok &= mse(&a, &a, 1).unwrap() == 0.0;
    }
    outcome(
        worst <= METRIC_TOL && identity_ok,
        format!("200 pairs, worst gap {worst:.3e}; identity exact: {identity_ok}"),
    )
}

// 9. MSE reduction across noise levels.
fn noise_robustness() -> Outcome {
    let clean = synthetic::fibonacci_sphere(10_000);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, level) in [0.005, 0.01, 0.015].into_iter().enumerate() {
        let noisy = add_gaussian_noise(&clean, level, 900 + i as u64).unwrap();
        let (filtered, _) = filter(
            &noisy,
            &FilterParams::new(50, 0.01, 1, Scheme::RefindEachIteration),
        )
        .unwrap();
        let before = mse(&clean, &noisy, 10).unwrap();
        let after = mse(&clean, &filtered, 10).unwrap();
        pass &= after < before;
        parts.push(format!(
            "{}%: {:.4e} -> {:.4e}",
            level * 100.0,
            before,
            after
        ));
    }
    outcome(pass, parts.join("; "))
}

// 10. Sampling cost.
fn sampling_tradeoff() -> Outcome {
    let clean = synthetic::fibonacci_sphere(20_000);
    let noisy = add_gaussian_noise(&clean, 0.005, 1000).unwrap();
    let params = FilterParams::new(50, 0.01, 1, Scheme::RefindEachIteration);
    let start = Instant::now();
    filter(&noisy, &params).unwrap();
    let full = start.elapsed().as_secs_f64();
    let start = Instant::now();
    filter_sampled(&noisy, &params, 0.4, 1).unwrap();
    let sampled = start.elapsed().as_secs_f64();
    let ratio = sampled / full;
    outcome(
        ratio < SAMPLING_RATIO,
        format!(
            "40% sample {sampled:.2}s vs full {full:.2}s (ratio {ratio:.3} < {SAMPLING_RATIO})"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("rpca exact recovery", rpca_recovery),
        ("reconstruction residual", reconstruction_residual),
        ("descriptor invariance", descriptor_invariance),
        ("similar-set laws", similar_set_laws),
        ("flip recovery", flip_recovery),
        ("denoising efficacy", denoising_efficacy),
        ("iteration schemes", scheme_contract),
        ("metric oracles", metric_oracles),
        ("noise-level robustness", noise_robustness),
        ("sampling tradeoff", sampling_tradeoff),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        println!(
            "criterion {:>2} {:<24} {}  {} [{:.1}s]",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
