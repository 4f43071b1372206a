//! Low-rank plus sparse decomposition of patch matrices.
//!
//! Solves `min ‖L‖_* + λ‖S‖_1  s.t.  M = L + S` with the augmented Lagrange
//! multiplier iteration: singular value thresholding for `L`, element-wise
//! shrinkage for `S`, and a dual ascent step on `Y`.

use nalgebra::{Matrix3, Matrix3xX, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{gram, sym_eigen_desc};

/// Soft-thresholding: `sign(x)·max(|x| − τ, 0)`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Singular value thresholding of a 3-row matrix.
///
/// With `M = U Σ Vᵀ`, the result is `U shrink(Σ, τ) Vᵀ`, computed as
/// `U diag(shrink(σᵢ)/σᵢ) Uᵀ M` so only the 3×3 Gram matrix is decomposed.
pub fn svt(m: &Matrix3xX<f64>, tau: f64) -> Matrix3xX<f64> {
    if tau == 0.0 {
        return m.clone();
    }
    svt_projector(m, tau) * m
}

fn svt_projector(m: &Matrix3xX<f64>, tau: f64) -> Matrix3<f64> {
    let (lambda, u) = sym_eigen_desc(&gram(m));
    let mut p = Matrix3::zeros();
    for i in 0..3 {
        let sigma = lambda[i].max(0.0).sqrt();
        if sigma > tau {
            let ui = u.column(i);
            p += (1.0 - tau / sigma) * ui * ui.transpose();
        }
    }
    p
}

/// Solver settings. `lambda` and `mu` fall back to the standard defaults
/// (`1/√max(3, K)` and `3K / (4‖M‖₁)`) when left unset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpcaParams {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RpcaParams {
    fn default() -> Self {
        Self {
            lambda: None,
            mu: None,
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

impl RpcaParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: Option<f64>| v.is_none_or(|x| x > 0.0 && x.is_finite());
        if !positive(self.lambda) {
            return Err(Error::invalid("rpca lambda must be positive"));
        }
        if !positive(self.mu) {
            return Err(Error::invalid("rpca mu must be positive"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid("rpca tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("rpca max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn lambda_for(&self, k: usize) -> f64 {
        self.lambda
            .unwrap_or_else(|| 1.0 / (k.max(3) as f64).sqrt())
    }

    pub fn mu_for(&self, m: &Matrix3xX<f64>) -> f64 {
        self.mu.unwrap_or_else(|| {
            let l1: f64 = m.iter().map(|v| v.abs()).sum();
            (3 * m.ncols()) as f64 / (4.0 * l1)
        })
    }
}

/// Result of [`decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub low_rank: Matrix3xX<f64>,
    pub sparse: Matrix3xX<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖M − L − S‖_F / ‖M‖_F` at the returned iterate.
    pub residual: f64,
}

/// Splits `m` into low-rank and sparse parts.
///
/// Non-convergence is reported through [`Decomposition::converged`]; the
/// returned iterate is the one with the smallest residual.
pub fn decompose(m: &Matrix3xX<f64>, params: &RpcaParams) -> Result<Decomposition> {
    params.validate()?;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let k = m.ncols();
    let norm_m = m.norm();
    if norm_m == 0.0 {
        return Ok(Decomposition {
            low_rank: Matrix3xX::zeros(k),
            sparse: Matrix3xX::zeros(k),
            iterations: 1,
            converged: true,
            residual: 0.0,
        });
    }

    let lambda = params.lambda_for(k);
    let mu = params.mu_for(m);
    let inv_mu = 1.0 / mu;
    let shrink_tau = lambda * inv_mu;

    let mut sparse = Matrix3xX::<f64>::zeros(k);
    let mut dual = Matrix3xX::<f64>::zeros(k);
    let mut low_rank = Matrix3xX::<f64>::zeros(k);
    let mut work = Matrix3xX::<f64>::zeros(k);
    let mut best: Option<(f64, Matrix3xX<f64>, Matrix3xX<f64>)> = None;

    for iter in 1..=params.max_iter {
        // L' = D_{1/μ}(M − S + Y/μ)
        work.copy_from(m);
        work -= &sparse;
        work += &dual * inv_mu;
        let proj = svt_projector(&work, inv_mu);
        low_rank.gemm(1.0, &proj, &work, 0.0);

        // S' = S_{λ/μ}(M − L' + Y/μ), residual R = M − L' − S'
        let mut res2 = 0.0;
        for (((s, y), &mv), &lv) in sparse
            .iter_mut()
            .zip(dual.iter_mut())
            .zip(m.iter())
            .zip(low_rank.iter())
        {
            *s = shrink(mv - lv + inv_mu * *y, shrink_tau);
            let r = mv - lv - *s;
            *y += mu * r;
            res2 += r * r;
        }
        let residual = res2.sqrt() / norm_m;

        if residual <= params.tol {
            return Ok(Decomposition {
                low_rank,
                sparse,
                iterations: iter,
                converged: true,
                residual,
            });
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, low_rank.clone(), sparse.clone()));
        }
    }

    let (residual, low_rank, sparse) = best.expect("max_iter >= 1");
    Ok(Decomposition {
        low_rank,
        sparse,
        iterations: params.max_iter,
        converged: false,
        residual,
    })
}

/// Singular values of a 3-row matrix, sorted nonincreasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor(pub Vector3<f64>);

impl Descriptor {
    pub fn singular_values(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// The patch signature: singular values of the low-rank part.
pub fn descriptor(low_rank: &Matrix3xX<f64>) -> Descriptor {
    let (lambda, _) = sym_eigen_desc(&gram(low_rank));
    Descriptor(lambda.map(|l| l.max(0.0).sqrt()))
}
