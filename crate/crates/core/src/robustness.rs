//! Influence diagnostics for the posterior-mean functionals.
//!
//! Contaminating a data-generating law `g = vMF(η)` by a point mass at `y`
//! moves the posterior mean at rate `IF_n(y) = n Cov_π(ξ, k(ξ; y, g))`. The
//! covariance is estimated from WBB draws. `k` depends on `g` only through
//! normalizing constants evaluated at vector norms, so it is available in
//! closed form and is assembled here in log space.
//!
//! The standardized norm uses `S = J⁻¹ I J⁻¹` at `η` for the same loss.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::specfun::{a_over_kappa, ln_k};
use crate::vmf::{dot, norm, NaturalParam, SpherePoint};
use crate::wbb::PosteriorDraws;

/// Fewest converged draws accepted for a covariance estimate.
pub const MIN_DRAWS: usize = 200;

/// Location of the point-mass contamination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub y: SpherePoint,
}

impl ProbePoint {
    pub fn new(y: SpherePoint) -> Self {
        ProbePoint { y }
    }

    pub fn from_angle(theta: f64) -> Self {
        ProbePoint { y: SpherePoint::from_angle(theta) }
    }
}

/// `k` equally spaced probes on the circle, starting at angle 0.
pub fn probe_circle(k: usize) -> Vec<ProbePoint> {
    (0..k).map(|j| ProbePoint::from_angle(std::f64::consts::TAU * j as f64 / k as f64)).collect()
}

/// Influence vectors and standardized norms over a set of probes.
#[derive(Debug, Clone, PartialEq)]
pub struct SifField {
    pub probes: Vec<ProbePoint>,
    pub if_vectors: Vec<Vec<f64>>,
    pub sif_norms: Vec<f64>,
    pub standardizer: DMatrix<f64>,
}

/// `k(ξ; y, g)` for `g = vMF(η)`, with `y` given as raw coordinates.
fn k_raw(xi: &[f64], y: &[f64], eta: &[f64], spec: LossSpec) -> f64 {
    let p = xi.len();
    let eta_norm = norm(eta);
    let lk_eta = ln_k(p, eta_norm);
    // ln ∫ f_ξ^t g = ln K(‖tξ + η‖) − ln K(‖η‖) − t ln K(‖ξ‖), up to the normalization below
    let shifted = |t: f64| {
        let v: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| t * a + b).collect();
        ln_k(p, norm(&v)) - lk_eta
    };
    match spec {
        LossSpec::Kl => {
            let r = a_over_kappa(p, 1.0, eta_norm);
            xi.iter().zip(y).zip(eta).map(|((a, yy), e)| a * (yy - r * e)).sum()
        }
        LossSpec::Dpd { alpha } => {
            let base = alpha * ln_k(p, norm(xi));
            ((alpha * dot(xi, y) - base).exp() - (shifted(alpha) - base).exp()) / alpha
        }
        LossSpec::Gamma { gamma } => {
            let c = 1.0 + gamma;
            let base = gamma / c * ln_k(p, c * norm(xi));
            ((gamma * dot(xi, y) - base).exp() - (shifted(gamma) - base).exp()) / gamma
        }
    }
}

fn check_dims(xi: usize, y: usize, eta: usize) -> Result<()> {
    if xi != y || xi != eta {
        return Err(Error::Shape(format!("dimension mismatch: ξ has {xi}, y has {y}, η has {eta}")));
    }
    Ok(())
}

/// The `k` function for point contamination at `y` of the law `vMF(η)`.
pub fn k_function(xi: &NaturalParam, y: &ProbePoint, eta: &NaturalParam, spec: LossSpec) -> Result<f64> {
    let spec = spec.validated()?;
    check_dims(xi.dim(), y.y.dim(), eta.dim())?;
    Ok(k_raw(xi.as_slice(), y.y.coords(), eta.as_slice(), spec))
}

/// Upper bound on `|k|` over the sphere for the robust losses; `None` for KL.
pub fn k_bound(xi: &NaturalParam, eta: &NaturalParam, spec: LossSpec) -> Result<Option<f64>> {
    let spec = spec.validated()?;
    check_dims(xi.dim(), xi.dim(), eta.dim())?;
    let p = xi.dim();
    let kappa = xi.kappa();
    let integral = |t: f64| {
        let v: Vec<f64> = xi.as_slice().iter().zip(eta.as_slice()).map(|(a, b)| t * a + b).collect();
        ln_k(p, norm(&v)) - ln_k(p, eta.kappa())
    };
    Ok(match spec {
        LossSpec::Kl => None,
        LossSpec::Dpd { alpha } => {
            let base = alpha * ln_k(p, kappa);
            Some(((alpha * kappa - base).exp() + (integral(alpha) - base).exp()) / alpha)
        }
        LossSpec::Gamma { gamma } => {
            let base = gamma / (1.0 + gamma) * ln_k(p, (1.0 + gamma) * kappa);
            Some(((gamma * kappa - base).exp() + (integral(gamma) - base).exp()) / gamma)
        }
    })
}

/// `n · Cov(ξ, k(ξ))` over the converged draws, for an arbitrary `k`.
pub fn influence_with<F>(draws: &PosteriorDraws, n: usize, k: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let rows: Vec<&[f64]> = draws.converged().collect();
    if rows.len() < MIN_DRAWS {
        return Err(Error::InsufficientDraws { needed: MIN_DRAWS, available: rows.len() });
    }
    let p = draws.dim();
    let m = rows.len() as f64;
    let ks: Vec<f64> = rows.iter().map(|r| k(r)).collect();
    let k_mean = ks.iter().sum::<f64>() / m;
    let mut xi_mean = vec![0.0; p];
    for r in &rows {
        for (acc, v) in xi_mean.iter_mut().zip(r.iter()) {
            *acc += v / m;
        }
    }
    let mut cov = vec![0.0; p];
    for (r, kv) in rows.iter().zip(&ks) {
        let dk = kv - k_mean;
        for ((acc, v), mu) in cov.iter_mut().zip(r.iter()).zip(&xi_mean) {
            *acc += (v - mu) * dk;
        }
    }
    let scale = n as f64 / (m - 1.0);
    Ok(cov.into_iter().map(|c| c * scale).collect())
}

/// Influence of point contamination at `y` on the posterior mean, for the loss the draws came from.
pub fn influence(draws: &PosteriorDraws, y: &ProbePoint, eta: &NaturalParam, n: usize) -> Result<Vec<f64>> {
    let spec = draws.loss.validated()?;
    check_dims(draws.dim(), y.y.dim(), eta.dim())?;
    influence_with(draws, n, |xi| k_raw(xi, y.y.coords(), eta.as_slice(), spec))
}

fn factor(s: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(s.clone()).ok_or(Error::Conditioning { condition: f64::INFINITY })
}

/// `√(vᵀ S⁻¹ v)` for a symmetric positive definite `S`.
pub fn standardized_norm(v: &[f64], s: &DMatrix<f64>) -> Result<f64> {
    if v.len() != s.nrows() || !s.is_square() {
        return Err(Error::Shape(format!("vector of length {} against a {}×{} matrix", v.len(), s.nrows(), s.ncols())));
    }
    let chol = factor(s)?;
    Ok(quad_norm(&chol, v))
}

fn quad_norm(chol: &Cholesky<f64, Dyn>, v: &[f64]) -> f64 {
    let b = DVector::from_column_slice(v);
    let x = chol.solve(&b);
    b.dot(&x).max(0.0).sqrt()
}

/// IF vectors and SIF norms for every probe.
pub fn sif_field(draws: &PosteriorDraws, probes: &[ProbePoint], eta: &NaturalParam, n: usize) -> Result<SifField> {
    if probes.is_empty() {
        return Err(Error::Argument("at least one probe point is required".into()));
    }
    let spec = draws.loss.validated()?;
    let standardizer = asymptotics::sandwich_cov(eta, spec)?;
    let chol = factor(&standardizer)?;
    let if_vectors: Vec<Vec<f64>> =
        probes.par_iter().map(|probe| influence(draws, probe, eta, n)).collect::<Result<_>>()?;
    let sif_norms = if_vectors.iter().map(|v| quad_norm(&chol, v)).collect();
    Ok(SifField { probes: probes.to_vec(), if_vectors, sif_norms, standardizer })
}
