//! Per-observation losses for the vMF model and their derivatives in `ξ`.
//!
//! With `f = f(· | ξ)`, `K = K_p(‖ξ‖)` and `c = 1 + α` or `1 + γ`:
//!
//! * KL: `ℓ(x, ξ) = −ξᵀx + ln K`
//! * DPD: `ℓ_α(x, ξ) = −f(x)^α/α + ∫f^{1+α}/(1+α)`
//!   `= −exp(αξᵀx − α ln K)/α + exp(ln K_p(cκ) − c ln K)/c`
//! * γ-divergence: `ℓ_γ(x, ξ) = −exp(γξᵀx − (γ/c) ln K_p(cκ))/γ + 1/γ`
//!
//! Every exponential is assembled from log-normalizers so nothing overflows
//! for large `κ` or `p`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun;
use crate::vmf::{dot, Dataset, NaturalParam, SpherePoint};

/// Which per-observation loss to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec {
    /// Negative log-likelihood.
    Kl,
    /// Density power divergence with tuning `α > 0`.
    Dpd { alpha: f64 },
    /// γ-divergence with tuning `γ > 0`.
    Gamma { gamma: f64 },
}

impl LossSpec {
    pub fn dpd(alpha: f64) -> Result<Self> {
        LossSpec::Dpd { alpha }.validated()
    }

    pub fn gamma(gamma: f64) -> Result<Self> {
        LossSpec::Gamma { gamma }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self.tuning() {
            Some(t) if !(t.is_finite() && t > 0.0) => {
                Err(Error::Domain(format!("tuning parameter must be positive and finite, got {t}")))
            }
            _ => Ok(self),
        }
    }

    pub fn tuning(&self) -> Option<f64> {
        match *self {
            LossSpec::Kl => None,
            LossSpec::Dpd { alpha } => Some(alpha),
            LossSpec::Gamma { gamma } => Some(gamma),
        }
    }

    /// Same family with a different tuning parameter (KL is returned unchanged).
    pub fn with_tuning(&self, t: f64) -> Self {
        match self {
            LossSpec::Kl => LossSpec::Kl,
            LossSpec::Dpd { .. } => LossSpec::Dpd { alpha: t },
            LossSpec::Gamma { .. } => LossSpec::Gamma { gamma: t },
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            LossSpec::Kl => "kl",
            LossSpec::Dpd { .. } => "dpd",
            LossSpec::Gamma { .. } => "gamma",
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tuning() {
            None => write!(f, "{}", self.family()),
            Some(t) => write!(f, "{}:{}", self.family(), t),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    /// `kl`, `dpd:<alpha>` or `gamma:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, tuning) = match s.split_once(':') {
            Some((f, t)) => (f, Some(t)),
            None => (s, None),
        };
        let parse = |t: Option<&str>| -> Result<f64> {
            let t = t.ok_or_else(|| Error::Argument(format!("loss `{s}` needs a tuning value, e.g. `{family}:0.5`")))?;
            t.parse::<f64>().map_err(|_| Error::Argument(format!("bad tuning value `{t}` in `{s}`")))
        };
        match family.to_ascii_lowercase().as_str() {
            "kl" if tuning.is_none() => Ok(LossSpec::Kl),
            "dpd" => LossSpec::dpd(parse(tuning)?),
            "gamma" => LossSpec::gamma(parse(tuning)?),
            _ => Err(Error::Argument(format!("unknown loss `{s}` (expected kl, dpd:<a> or gamma:<g>)"))),
        }
    }
}

/// Nonnegative observation weights summing to `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Shape("empty weight vector".into()));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let n = w.len() as f64;
        let total: f64 = w.iter().sum();
        if (total - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Domain(format!("weights sum to {total}, expected {n}")));
        }
        Ok(WeightVector(w))
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    /// `w_i = n·e_i / Σe_j` for nonnegative `e` with a positive sum.
    pub fn from_unnormalized(e: &[f64]) -> Result<Self> {
        let total: f64 = e.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate("weights sum to zero".into()));
        }
        let n = e.len() as f64;
        WeightVector::new(e.iter().map(|x| n * x / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The `x`-independent pieces of a loss at a fixed `ξ`.
///
/// Building one costs a handful of Bessel evaluations; evaluating it at a
/// point costs O(p).
#[derive(Debug, Clone)]
pub struct LossKernel {
    spec: LossSpec,
    xi: Vec<f64>,
    /// `ln K_p(κ)`
    lk: f64,
    /// `A_p(κ)/κ`
    r1: f64,
    /// `1 + tuning`
    c: f64,
    /// `A_p(cκ)/κ`
    rc: f64,
    /// DPD: `ln ∫f^{1+α} = ln K_p(cκ) − c ln K_p(κ)`; γ: `(γ/c) ln K_p(cκ)`.
    log_const: f64,
}

impl LossKernel {
    pub fn new(xi: &[f64], spec: LossSpec) -> Self {
        let p = xi.len();
        let kappa = crate::vmf::norm(xi);
        let lk = specfun::ln_k(p, kappa);
        let r1 = specfun::a_over_kappa(p, 1.0, kappa);
        let (c, rc, log_const) = match spec {
            LossSpec::Kl => (1.0, r1, 0.0),
            LossSpec::Dpd { alpha } => {
                let c = 1.0 + alpha;
                (c, specfun::a_over_kappa(p, c, kappa), specfun::ln_k(p, c * kappa) - c * lk)
            }
            LossSpec::Gamma { gamma } => {
                let c = 1.0 + gamma;
                (c, specfun::a_over_kappa(p, c, kappa), gamma / c * specfun::ln_k(p, c * kappa))
            }
        };
        LossKernel { spec, xi: xi.to_vec(), lk, r1, c, rc, log_const }
    }

    pub fn spec(&self) -> LossSpec {
        self.spec
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let t = dot(&self.xi, x);
        match self.spec {
            LossSpec::Kl => -t + self.lk,
            LossSpec::Dpd { alpha } => {
                -(alpha * (t - self.lk)).exp() / alpha + self.log_const.exp() / self.c
            }
            LossSpec::Gamma { gamma } => -(gamma * t - self.log_const).exp_m1() / gamma,
        }
    }

    /// Adds `w·∇ℓ(x, ξ)` to `grad` and returns `ℓ(x, ξ)`.
    pub fn accumulate(&self, x: &[f64], w: f64, grad: &mut [f64]) -> f64 {
        let t = dot(&self.xi, x);
        match self.spec {
            LossSpec::Kl => {
                // −(x − r₁ξ)
                for ((g, xj), sj) in grad.iter_mut().zip(x).zip(&self.xi) {
                    *g -= w * (xj - self.r1 * sj);
                }
                -t + self.lk
            }
            LossSpec::Dpd { alpha } => {
                // −E(x − r₁ξ) + R(r_c − r₁)ξ
                let e = (alpha * (t - self.lk)).exp();
                let r = self.log_const.exp();
                let coef = -e * -self.r1 + r * (self.rc - self.r1);
                for ((g, xj), sj) in grad.iter_mut().zip(x).zip(&self.xi) {
                    *g += w * (-e * xj + coef * sj);
                }
                -e / alpha + r / self.c
            }
            LossSpec::Gamma { gamma } => {
                // −E_γ(x − r_cξ)
                let arg = gamma * t - self.log_const;
                let e = arg.exp();
                for ((g, xj), sj) in grad.iter_mut().zip(x).zip(&self.xi) {
                    *g -= w * e * (xj - self.rc * sj);
                }
                -arg.exp_m1() / gamma
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.accumulate(x, 1.0, &mut g);
        g
    }

    /// Analytic Hessian `∇²ℓ(x, ξ)`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let p = x.len();
        let kappa = crate::vmf::norm(&self.xi);
        let xi = nalgebra::DVector::from_column_slice(&self.xi);
        let xv = nalgebra::DVector::from_column_slice(x);
        let outer_xi = &xi * xi.transpose();
        let eye = DMatrix::<f64>::identity(p, p);
        // Hessian of ln K_p(‖ξ‖) and of ln K_p(c‖ξ‖)/c.
        let h1 = &eye * self.r1 + &outer_xi * specfun::cov_radial_coeff(p, 1.0, kappa);
        let hc = |c: f64| &eye * self.rc + &outer_xi * (c * specfun::cov_radial_coeff(p, c, kappa));
        let t = xv.dot(&xi);
        match self.spec {
            LossSpec::Kl => h1,
            LossSpec::Dpd { alpha } => {
                let e = (alpha * (t - self.lk)).exp();
                let r = self.log_const.exp();
                let u = &xv - &xi * self.r1;
                let d = self.rc - self.r1;
                let mut h = &u * u.transpose() * (-alpha * e) + &h1 * e;
                h += &outer_xi * (self.c * r * d * d);
                h += (hc(self.c) - &h1) * r;
                h
            }
            LossSpec::Gamma { gamma } => {
                let e = (gamma * t - self.log_const).exp();
                let u = &xv - &xi * self.rc;
                &u * u.transpose() * (-gamma * e) + hc(self.c) * e
            }
        }
    }
}

fn check_pair(x: &SpherePoint, xi: &NaturalParam) -> Result<()> {
    if x.dim() != xi.dim() {
        return Err(Error::Shape(format!("point has dimension {}, parameter {}", x.dim(), xi.dim())));
    }
    Ok(())
}

/// `ℓ(x, ξ)` for the chosen loss.
pub fn loss_at(x: &SpherePoint, xi: &NaturalParam, spec: LossSpec) -> Result<f64> {
    check_pair(x, xi)?;
    let spec = spec.validated()?;
    Ok(LossKernel::new(xi.as_slice(), spec).value(x.coords()))
}

/// `∇_ξ ℓ(x, ξ)`; at `κ = 0` the ratios `A_p(cκ)/κ` take their limits `c/p`.
pub fn grad_loss(x: &SpherePoint, xi: &NaturalParam, spec: LossSpec) -> Result<Vec<f64>> {
    check_pair(x, xi)?;
    let spec = spec.validated()?;
    Ok(LossKernel::new(xi.as_slice(), spec).gradient(x.coords()))
}

/// `∇²_ξ ℓ(x, ξ)`.
pub fn hessian_loss(x: &SpherePoint, xi: &NaturalParam, spec: LossSpec) -> Result<DMatrix<f64>> {
    check_pair(x, xi)?;
    let spec = spec.validated()?;
    Ok(LossKernel::new(xi.as_slice(), spec).hessian(x.coords()))
}

fn check_data(data: &Dataset, xi: &NaturalParam, weights: Option<&WeightVector>) -> Result<()> {
    if data.p() != xi.dim() {
        return Err(Error::Shape(format!("data have dimension {}, parameter {}", data.p(), xi.dim())));
    }
    if let Some(w) = weights {
        if w.len() != data.n() {
            return Err(Error::Shape(format!("{} weights for {} points", w.len(), data.n())));
        }
    }
    Ok(())
}

/// `Σ_i w_i ℓ(x_i, ξ)` with unit weights when `weights` is `None`.
pub fn empirical_loss(data: &Dataset, xi: &NaturalParam, spec: LossSpec, weights: Option<&WeightVector>) -> Result<f64> {
    check_data(data, xi, weights)?;
    let kernel = LossKernel::new(xi.as_slice(), spec.validated()?);
    Ok(match weights {
        None => data.rows().map(|x| kernel.value(x)).sum(),
        Some(w) => data.rows().zip(w.as_slice()).map(|(x, wi)| wi * kernel.value(x)).sum(),
    })
}

/// Gradient of [`empirical_loss`] in `ξ`.
pub fn empirical_gradient(data: &Dataset, xi: &NaturalParam, spec: LossSpec, weights: Option<&WeightVector>) -> Result<Vec<f64>> {
    check_data(data, xi, weights)?;
    let kernel = LossKernel::new(xi.as_slice(), spec.validated()?);
    let mut g = vec![0.0; data.p()];
    weighted_value_and_gradient(&kernel, data, weights.map(|w| w.as_slice()), &mut g);
    Ok(g)
}

/// `Σ w_i ℓ_i` with its gradient written to `grad`; no shape checks.
pub(crate) fn weighted_value_and_gradient(kernel: &LossKernel, data: &Dataset, weights: Option<&[f64]>, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    match weights {
        None => data.rows().map(|x| kernel.accumulate(x, 1.0, grad)).sum(),
        Some(w) => data.rows().zip(w).map(|(x, &wi)| wi * kernel.accumulate(x, wi, grad)).sum(),
    }
}
