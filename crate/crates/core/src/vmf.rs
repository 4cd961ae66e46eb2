//! The von Mises–Fisher model in natural parametrization.
//!
//! The density of `X ~ vM_p(ξ)` on the unit sphere `S_p ⊂ ℝ^p` is
//! `f(x | ξ) = exp(ξᵀx − ln K_p(‖ξ‖))`. Writing `ξ = κμ`, `κ = ‖ξ‖` is the
//! concentration and `μ` the mean direction, and `E[X] = A_p(κ)μ`.

use rand::Rng as RandRng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun;

/// Tolerance on `‖x‖ − 1` for a valid point.
pub const UNIT_TOL: f64 = 1e-9;
/// Upper bound on the moment estimate of `κ`.
pub const KAPPA_MAX: f64 = 1e5;

/// A point on the unit sphere `S_p`, `p ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Shape(format!("sphere points need at least 2 coordinates, got {}", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Domain(format!("point is not on the unit sphere (norm {norm})")));
        }
        Ok(SpherePoint(coords))
    }

    /// Scales a nonzero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let r = norm(&coords);
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Degenerate("cannot normalize a zero or non-finite vector".into()));
        }
        coords.iter_mut().for_each(|c| *c /= r);
        SpherePoint::new(coords)
    }

    /// `(cos θ, sin θ)` on the circle.
    pub fn from_angle(theta: f64) -> Self {
        SpherePoint(vec![theta.cos(), theta.sin()])
    }

    /// Polar angle in `(−π, π]` of the first two coordinates.
    pub fn angle(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpherePoint::new(v)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

/// Natural parameter `ξ = κμ ∈ ℝ^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NaturalParam(Vec<f64>);

impl NaturalParam {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 {
            return Err(Error::Shape(format!("parameter needs at least 2 coordinates, got {}", xi.len())));
        }
        if xi.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite parameter entry".into()));
        }
        Ok(NaturalParam(xi))
    }

    pub fn zeros(p: usize) -> Self {
        NaturalParam(vec![0.0; p.max(2)])
    }

    /// `κμ` for `κ ≥ 0`.
    pub fn from_polar(kappa: f64, mu: &SpherePoint) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Domain(format!("concentration must be nonnegative, got {kappa}")));
        }
        NaturalParam::new(mu.coords().iter().map(|m| kappa * m).collect())
    }

    pub fn kappa(&self) -> f64 {
        norm(&self.0)
    }

    /// `ξ/‖ξ‖`, or `None` at the origin.
    pub fn mean_direction(&self) -> Option<SpherePoint> {
        let k = self.kappa();
        (k > 0.0).then(|| SpherePoint(self.0.iter().map(|x| x / k).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for NaturalParam {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        NaturalParam::new(v)
    }
}

impl From<NaturalParam> for Vec<f64> {
    fn from(p: NaturalParam) -> Self {
        p.0
    }
}

/// `n` observations on a common sphere, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    data: Vec<f64>,
}

impl Dataset {
    pub fn new(points: &[SpherePoint]) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::Shape("dataset must contain at least one point".into()))?;
        let p = first.dim();
        let mut data = Vec::with_capacity(p * points.len());
        for (i, pt) in points.iter().enumerate() {
            if pt.dim() != p {
                return Err(Error::Input { row: i, message: format!("expected {p} coordinates, got {}", pt.dim()) });
            }
            data.extend_from_slice(pt.coords());
        }
        Ok(Dataset { p, data })
    }

    /// Builds a dataset from `n·p` row-major values, validating every row.
    pub fn from_flat(p: usize, data: Vec<f64>) -> Result<Self> {
        if p < 2 || data.is_empty() || !data.len().is_multiple_of(p) {
            return Err(Error::Shape(format!("{} values do not form rows of length {p}", data.len())));
        }
        for (i, row) in data.chunks_exact(p).enumerate() {
            let r = norm(row);
            if !r.is_finite() || (r - 1.0).abs() > UNIT_TOL {
                return Err(Error::Input { row: i, message: format!("not a unit vector (norm {r})") });
            }
        }
        Ok(Dataset { p, data })
    }

    pub(crate) fn from_flat_unchecked(p: usize, data: Vec<f64>) -> Self {
        debug_assert!(p >= 2 && !data.is_empty() && data.len().is_multiple_of(p));
        Dataset { p, data }
    }

    /// Points at angles `θ_i` on the circle.
    pub fn from_angles(thetas: &[f64]) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::Shape("dataset must contain at least one point".into()));
        }
        if let Some(i) = thetas.iter().position(|t| !t.is_finite()) {
            return Err(Error::Input { row: i, message: "non-finite angle".into() });
        }
        Ok(Dataset { p: 2, data: thetas.iter().flat_map(|t| [t.cos(), t.sin()]).collect() })
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.p
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.p)
    }

    pub fn point(&self, i: usize) -> SpherePoint {
        SpherePoint(self.row(i).to_vec())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows taken in the given order (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let data = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Dataset { p: self.p, data }
    }

    /// Stacks two datasets of the same dimension.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.p != self.p {
            return Err(Error::Shape(format!("cannot stack dimension {} onto {}", other.p, self.p)));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Dataset { p: self.p, data })
    }

    /// Sample mean vector `x̄`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for row in self.rows() {
            m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        let n = self.n() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln f(x | ξ) = ξᵀx − ln K_p(‖ξ‖)`.
pub fn log_density(x: &SpherePoint, xi: &NaturalParam) -> Result<f64> {
    if x.dim() != xi.dim() {
        return Err(Error::Shape(format!("point has dimension {}, parameter {}", x.dim(), xi.dim())));
    }
    Ok(dot(xi.as_slice(), x.coords()) - specfun::ln_k(xi.dim(), xi.kappa()))
}

/// Exact vMF sampler (Wood's rejection scheme on the cosine `w = μᵀx`).
#[derive(Debug, Clone)]
pub struct VmfSampler {
    p: usize,
    kappa: f64,
    mu: Vec<f64>,
    b: f64,
    x0: f64,
    c: f64,
    beta: Option<Beta<f64>>,
}

impl VmfSampler {
    pub fn new(xi: &NaturalParam) -> Self {
        let p = xi.dim();
        let kappa = xi.kappa();
        let pm1 = (p - 1) as f64;
        let mu = match xi.mean_direction() {
            Some(m) => m.into_inner(),
            None => vec![0.0; p],
        };
        let b = pm1 / (2.0 * kappa + (4.0 * kappa * kappa + pm1 * pm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        // 1 − x0² = 4b / (1 + b)²
        let c = kappa * x0 + pm1 * (4.0 * b).ln() - 2.0 * pm1 * (1.0 + b).ln();
        let beta = (kappa > 0.0).then(|| Beta::new(pm1 / 2.0, pm1 / 2.0).expect("positive shape"));
        VmfSampler { p, kappa, mu, b, x0, c, beta }
    }

    /// Writes one draw into `out` (length `p`).
    pub fn draw_into<R: RandRng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let Some(beta) = &self.beta else {
            uniform_into(rng, out);
            return;
        };
        let pm1 = (self.p - 1) as f64;
        let (w, sin_w) = loop {
            let z: f64 = beta.sample(rng);
            let u: f64 = rng.random();
            let den = 1.0 - (1.0 - self.b) * z;
            let w = (1.0 - (1.0 + self.b) * z) / den;
            let accept = self.kappa * w + pm1 * (1.0 - self.x0 * w).ln() - self.c;
            if accept >= u.ln() {
                let one_minus_w2 = 4.0 * self.b * z * (1.0 - z) / (den * den);
                break (w, one_minus_w2.max(0.0).sqrt());
            }
        };
        // Uniform direction orthogonal to μ.
        loop {
            for v in out.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let proj = dot(out, &self.mu);
            out.iter_mut().zip(&self.mu).for_each(|(v, m)| *v -= proj * m);
            let r = norm(out);
            if r > 1e-8 {
                out.iter_mut().zip(&self.mu).for_each(|(v, m)| *v = w * m + sin_w * *v / r);
                break;
            }
        }
        // Guard against accumulated rounding so every draw is a valid point.
        let r = norm(out);
        out.iter_mut().for_each(|v| *v /= r);
    }

    pub fn draw<R: RandRng + ?Sized>(&self, rng: &mut R) -> SpherePoint {
        let mut out = vec![0.0; self.p];
        self.draw_into(rng, &mut out);
        SpherePoint(out)
    }

    pub fn sample<R: RandRng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let mut data = vec![0.0; n * self.p];
        for row in data.chunks_exact_mut(self.p) {
            self.draw_into(rng, row);
        }
        Dataset { p: self.p, data }
    }
}

fn uniform_into<R: RandRng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let r = norm(out);
        if r > 1e-8 {
            out.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}

/// `n` independent draws from `vM_p(ξ)`.
pub fn sample<R: RandRng + ?Sized>(xi: &NaturalParam, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    Ok(VmfSampler::new(xi).sample(n, rng))
}

/// `n` uniform draws on `S_p`.
pub fn sample_uniform<R: RandRng + ?Sized>(p: usize, n: usize, rng: &mut R) -> Result<Dataset> {
    sample(&NaturalParam::zeros(p), n, rng)
}

/// Moment initializer `κ̂ x̄/‖x̄‖` with `κ̂ = R̄(p − R̄²)/(1 − R̄²)`, capped at [`KAPPA_MAX`].
pub fn moment_estimate(data: &Dataset) -> Result<NaturalParam> {
    moment_from_mean(data.p(), data.mean())
}

/// Moment initializer for a weighted sample (weights need not be normalized).
pub fn weighted_moment_estimate(data: &Dataset, weights: &[f64]) -> Result<NaturalParam> {
    if weights.len() != data.n() {
        return Err(Error::Shape(format!("{} weights for {} points", weights.len(), data.n())));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("weights sum to zero".into()));
    }
    let mut m = vec![0.0; data.p()];
    for (row, w) in data.rows().zip(weights) {
        m.iter_mut().zip(row).for_each(|(a, b)| *a += w * b);
    }
    m.iter_mut().for_each(|a| *a /= total);
    moment_from_mean(data.p(), m)
}

fn moment_from_mean(p: usize, mean: Vec<f64>) -> Result<NaturalParam> {
    let r = norm(&mean);
    if !(r > 1e-14) {
        return Err(Error::Degenerate("sample mean resultant is zero".into()));
    }
    let r_bar = r.min(1.0);
    let one_minus = 1.0 - r_bar * r_bar;
    let kappa = if one_minus <= 0.0 {
        KAPPA_MAX
    } else {
        (r_bar * (p as f64 - r_bar * r_bar) / one_minus).min(KAPPA_MAX)
    };
    NaturalParam::new(mean.iter().map(|m| kappa * m / r).collect())
}
