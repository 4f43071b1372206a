//! Deterministic test shapes with sharp and smooth features.

use std::f64::consts::PI;

use nalgebra::Point3;

use crate::geometry::PointCloud;

/// Surface of the unit cube `[-0.5, 0.5]^3`, sampled at cell centres of an
/// `n x n` grid on each face (`6 n^2` points).
pub fn cube_surface(n: usize) -> PointCloud {
    let mut pts = Vec::with_capacity(6 * n * n);
    let h = 1.0 / n as f64;
    for axis in 0..3 {
        for side in [-0.5, 0.5] {
            for i in 0..n {
                for j in 0..n {
                    let u = -0.5 + (i as f64 + 0.5) * h;
                    let v = -0.5 + (j as f64 + 0.5) * h;
                    let mut p = [0.0; 3];
                    p[axis] = side;
                    p[(axis + 1) % 3] = u;
                    p[(axis + 2) % 3] = v;
                    pts.push(Point3::from(p));
                }
            }
        }
    }
    PointCloud::new(pts).expect("finite by construction")
}

/// `n` points on the unit sphere along a Fibonacci spiral.
pub fn fibonacci_sphere(n: usize) -> PointCloud {
    let golden = PI * (3.0 - 5f64.sqrt());
    let pts = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Point3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect();
    PointCloud::new(pts).expect("finite by construction")
}

/// Unit square grid of `n x n` points with a roof-shaped ridge along the
/// y axis: `z = height * max(0, half_width - |x|)`.
pub fn ridged_plane(n: usize, half_width: f64, height: f64) -> PointCloud {
    let step = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = -0.5 + i as f64 * step;
            let y = -0.5 + j as f64 * step;
            let z = height * (half_width - x.abs()).max(0.0);
            pts.push(Point3::new(x, y, z));
        }
    }
    PointCloud::new(pts).expect("finite by construction")
}
