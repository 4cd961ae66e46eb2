//! Information matrices, sandwich covariances and asymptotic relative efficiency.
//!
//! At the model `X ~ vM_p(ξ)` every matrix here has the form
//! `s·(a₁ I + a₂ μμᵀ)` with `μ = ξ/κ`, so it has eigenvalue `s·a₁` with
//! multiplicity `p − 1` and `s·(a₁ + a₂)` along `μ`. With `c = 1 + t` and
//! `A_k = A_p(kκ)`, writing `Σ_k` for the covariance of `vM_p(kξ)`:
//!
//! * KL: `I = J = Σ_1`
//! * DPD(α): `I = K((2α+1)ξ)/K(ξ)^{2α+1} · [Σ_{2α+1} + (A_{2α+1} − A_1)² μμᵀ]
//!   − K(cξ)²/K(ξ)^{2c} · (A_c − A_1)² μμᵀ`,
//!   `J = K(cξ)/K(ξ)^c · [Σ_c + (A_c − A_1)² μμᵀ]`
//! * γ(γ): `I = K((2γ+1)ξ)/(K(ξ) K(cξ)^{2γ/c}) · [Σ_{2γ+1} + (A_{2γ+1} − A_c)² μμᵀ]`,
//!   `J = K(cξ)^{1/c}/K(ξ) · Σ_c`
//!
//! and `Σ_k = A_k/(kκ)·I + (1 − A_k² − p A_k/(kκ))·μμᵀ`.
//!
//! For both robust losses `det J² / (det I · det I_KL)` carries the common
//! prefactor `K(cξ)² / (K(ξ) K((2t+1)ξ))`, which gives the ARE in closed form.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::specfun;
use crate::vmf::NaturalParam;

/// Largest condition number accepted for `J` in [`sandwich_cov`].
pub const MAX_CONDITION: f64 = 1e12;
/// Lower end of the tuning bracket in [`select_tuning`].
pub const TUNING_MIN: f64 = 1e-6;
/// Cap on the upper end of the tuning bracket.
pub const TUNING_MAX: f64 = 64.0;

/// `exp(log_scale)·(a1·I + a2·μμᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Structured {
    pub log_scale: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Structured {
    /// `ln det` from the two eigenvalues.
    pub fn log_det(&self, p: usize) -> f64 {
        p as f64 * self.log_scale + (p as f64 - 1.0) * self.a1.ln() + (self.a1 + self.a2).ln()
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let s = self.log_scale.exp();
        (s * self.a1, s * (self.a1 + self.a2))
    }

    pub fn condition(&self) -> f64 {
        let (a, b) = (self.a1, self.a1 + self.a2);
        a.max(b) / a.min(b)
    }

    pub fn to_matrix(&self, xi: &[f64]) -> DMatrix<f64> {
        let p = xi.len();
        let s = self.log_scale.exp();
        let mut m = DMatrix::identity(p, p) * (s * self.a1);
        let kappa = crate::vmf::norm(xi);
        if kappa > 0.0 {
            let mu = DVector::from_iterator(p, xi.iter().map(|x| x / kappa));
            m += &mu * mu.transpose() * (s * self.a2);
        }
        m
    }
}

/// Coefficients of `Σ_k`: `(A(kκ)/(kκ), 1 − A(kκ)² − pA(kκ)/(kκ), A(kκ))`.
fn cov_coeffs(p: usize, k: f64, kappa: f64) -> (f64, f64, f64) {
    let a1 = specfun::a_over_kappa(p, k, kappa) / k;
    let a2 = kappa * kappa * specfun::cov_radial_coeff(p, k, kappa);
    (a1, a2, specfun::ratio_a(p, k * kappa))
}

/// Closed-form `(I, J)` in structured form.
pub fn structured_info(p: usize, kappa: f64, spec: LossSpec) -> (Structured, Structured) {
    let lk = |t: f64| specfun::ln_k(p, t * kappa);
    let (k1, k2, a0) = cov_coeffs(p, 1.0, kappa);
    match spec {
        LossSpec::Kl => {
            let m = Structured { log_scale: 0.0, a1: k1, a2: k2 };
            (m, m)
        }
        LossSpec::Dpd { alpha } => {
            let c = 1.0 + alpha;
            let d = 2.0 * alpha + 1.0;
            let (b1, b2, ac) = cov_coeffs(p, c, kappa);
            let (a1, a2, ad) = cov_coeffs(p, d, kappa);
            let ln_kd = lk(d) - d * lk(1.0);
            // K(cξ)² / (K(ξ) K((2α+1)ξ))
            let ratio = (2.0 * lk(c) - lk(1.0) - lk(d)).exp();
            let i = Structured { log_scale: ln_kd, a1, a2: a2 + (ad - a0).powi(2) - ratio * (ac - a0).powi(2) };
            let j = Structured { log_scale: lk(c) - c * lk(1.0), a1: b1, a2: b2 + (ac - a0).powi(2) };
            (i, j)
        }
        LossSpec::Gamma { gamma } => {
            let c = 1.0 + gamma;
            let d = 2.0 * gamma + 1.0;
            let (b1, b2, ac) = cov_coeffs(p, c, kappa);
            let (a1, a2, ad) = cov_coeffs(p, d, kappa);
            let i = Structured {
                log_scale: lk(d) - lk(1.0) - 2.0 * gamma / c * lk(c),
                a1,
                a2: a2 + (ad - ac).powi(2),
            };
            let j = Structured { log_scale: lk(c) / c - lk(1.0), a1: b1, a2: b2 };
            (i, j)
        }
    }
}

/// `I(ξ)`, `J(ξ)` for a loss at the model.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoPair {
    pub i: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub spec: LossSpec,
}

pub fn info_matrices(xi: &NaturalParam, spec: LossSpec) -> Result<InfoPair> {
    let spec = spec.validated()?;
    let (i, j) = structured_info(xi.dim(), xi.kappa(), spec);
    let i = i.to_matrix(xi.as_slice());
    let j = if spec == LossSpec::Kl { i.clone() } else { j.to_matrix(xi.as_slice()) };
    Ok(InfoPair { i, j, spec })
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let condition = condition_number(m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition });
    }
    Cholesky::new(m.clone()).ok_or(Error::Conditioning { condition: f64::INFINITY })
}

/// `J⁻¹ I J⁻¹` by two Cholesky solves.
pub fn sandwich_from(pair: &InfoPair) -> Result<DMatrix<f64>> {
    let chol = cholesky(&pair.j)?;
    let left = chol.solve(&pair.i);
    let v = chol.solve(&left.transpose());
    Ok((&v + v.transpose()) * 0.5)
}

/// Asymptotic covariance `J⁻¹ I J⁻¹` of the estimator under `spec`.
pub fn sandwich_cov(xi: &NaturalParam, spec: LossSpec) -> Result<DMatrix<f64>> {
    sandwich_from(&info_matrices(xi, spec)?)
}

fn check_pilot(xi: &NaturalParam) -> Result<f64> {
    let kappa = xi.kappa();
    if kappa > 0.0 {
        Ok(kappa)
    } else {
        Err(Error::Domain("efficiency needs a parameter with positive concentration".into()))
    }
}

/// `(det V_KL / det V_spec)^{1/p}` in closed form.
pub fn are(spec: LossSpec, xi: &NaturalParam) -> Result<f64> {
    let spec = spec.validated()?;
    let kappa = check_pilot(xi)?;
    let p = xi.dim();
    let (i, j) = structured_info(p, kappa, spec);
    if !(j.condition() <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition: j.condition() });
    }
    let (kl, _) = structured_info(p, kappa, LossSpec::Kl);
    let log_are = (2.0 * j.log_det(p) - i.log_det(p) - kl.log_det(p)) / p as f64;
    Ok(log_are.exp())
}

/// The same ratio as [`are`] from full matrices and generic determinants.
pub fn are_from_matrices(spec: LossSpec, xi: &NaturalParam) -> Result<f64> {
    check_pilot(xi)?;
    let v = sandwich_cov(xi, spec)?;
    let v_kl = sandwich_cov(xi, LossSpec::Kl)?;
    let ln_det = |m: &DMatrix<f64>| -> Result<f64> {
        let l = cholesky(m)?.l();
        Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
    };
    Ok(((ln_det(&v_kl)? - ln_det(&v)?) / xi.dim() as f64).exp())
}

/// Robust loss family whose tuning parameter is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuningKind {
    Dpd,
    Gamma,
}

impl TuningKind {
    pub fn spec(self, t: f64) -> LossSpec {
        match self {
            TuningKind::Dpd => LossSpec::Dpd { alpha: t },
            TuningKind::Gamma => LossSpec::Gamma { gamma: t },
        }
    }
}

impl std::str::FromStr for TuningKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dpd" => Ok(TuningKind::Dpd),
            "gamma" => Ok(TuningKind::Gamma),
            _ => Err(Error::Argument(format!("unknown loss family `{s}` (expected dpd or gamma)"))),
        }
    }
}

/// A point on an ARE curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreCurvePoint {
    pub tuning: f64,
    pub are: f64,
}

pub fn are_curve(kind: TuningKind, xi: &NaturalParam, tunings: &[f64]) -> Result<Vec<AreCurvePoint>> {
    tunings.iter().map(|&t| Ok(AreCurvePoint { tuning: t, are: are(kind.spec(t), xi)? })).collect()
}

/// Tuning `t` with `ARE(t) = target` at the pilot `ξ`, by bisection.
///
/// The bracket starts at `(10⁻⁶, 1]` and its upper end doubles up to 64. If the
/// ARE is already below the target at the lower end, the lower end is returned.
pub fn select_tuning(kind: TuningKind, xi_pilot: &NaturalParam, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Argument(format!("target efficiency must lie in (0, 1), got {target}")));
    }
    check_pilot(xi_pilot)?;
    let f = |t: f64| are(kind.spec(t), xi_pilot).map(|a| a - target);
    let mut lo = TUNING_MIN;
    if f(lo)? <= 0.0 {
        return Ok(lo);
    }
    let mut hi = 1.0;
    while f(hi)? > 0.0 {
        if hi >= TUNING_MAX {
            return Err(Error::NoSolution { target, upper: TUNING_MAX });
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
