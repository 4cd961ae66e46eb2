//! Modified Bessel functions of the first kind, evaluated in log space.
//!
//! Everything the von Mises–Fisher model needs reduces to three quantities of
//! the concentration `κ`:
//!
//! * `ln I_ν(x)` for `ν = (p − 2)/2` (and its neighbours),
//! * the ratio `A_p(x) = I_{p/2}(x) / I_{(p−2)/2}(x)` and its derivative,
//! * the log-normalizer `ln K_p(κ) = (p/2) ln 2π + ln I_ν(κ) − ν ln κ`.
//!
//! `ln I_ν` is computed from the ascending power series for `x ≤ 200`, from the
//! Hankel large-argument expansion for larger `x` at small order (`ν < 10`),
//! and from the Debye uniform expansion otherwise. All three branches are
//! assembled in log space so nothing overflows for `x` up to `10⁴` and `ν` up to
//! `10³`. The ratio `A_p` comes from the Gauss continued fraction for moderate
//! arguments, which is accurate to a few ulps and smooth in `x`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const SERIES_MAX_X: f64 = 200.0;
const DEBYE_MIN_ORDER: f64 = 10.0;
/// Below this argument `A_p` and its derivative use their Taylor expansions.
pub const SMALL_X: f64 = 1e-6;
const CF_MAX_X: f64 = 1000.0;
const DEBYE_TERMS: usize = 16;

/// Order `ν ≥ 0` of a modified Bessel function.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu >= 0.0 {
            Ok(BesselOrder(nu))
        } else {
            Err(Error::Domain(format!("Bessel order must be finite and nonnegative, got {nu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Ambient dimension `p ≥ 2` of the sphere `S_p ⊂ ℝ^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(p: usize) -> Result<Self> {
        if p >= 2 {
            Ok(Dimension(p))
        } else {
            Err(Error::Domain(format!("dimension must be at least 2, got {p}")))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Order `(p − 2)/2` of the Bessel function in the normalizer.
    pub fn nu(self) -> f64 {
        (self.0 as f64 - 2.0) / 2.0
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Shift up once; the Lanczos sum is tuned for Re(z) ≥ 1/2.
        return ln_gamma(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// `ln` of the surface area of `S_p`, `2π^{p/2} / Γ(p/2)`.
pub fn log_sphere_area(p: Dimension) -> f64 {
    ln_sphere_area(p.get())
}

pub(crate) fn ln_sphere_area(p: usize) -> f64 {
    let half = p as f64 / 2.0;
    std::f64::consts::LN_2 + half * PI.ln() - ln_gamma(half)
}

/// `ln I_ν(x)`.
///
/// Returns `0` at `x = ν = 0` and `−∞` at `x = 0 < ν`.
pub fn log_bessel_i(nu: BesselOrder, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(ln_i(nu.0, x))
}

/// `A_p(x) = I_{p/2}(x) / I_{(p−2)/2}(x)`, in `[0, 1)`.
pub fn bessel_ratio_a(p: Dimension, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(ratio_a(p.get(), x))
}

/// `A_p'(x) = 1 − A_p(x)² − ((p − 1)/x) A_p(x)`, with the limit `1/p` at zero.
pub fn bessel_ratio_a_prime(p: Dimension, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(ratio_a_prime(p.get(), x))
}

/// `ln K_p(κ)`, the log of the reciprocal vMF normalizing constant.
pub fn log_k(p: Dimension, kappa: f64) -> Result<f64> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::Domain(format!("concentration must be finite and nonnegative, got {kappa}")));
    }
    Ok(ln_k(p.get(), kappa))
}

fn check_argument(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument must be finite and nonnegative, got {x}")))
    }
}

pub(crate) fn ln_i(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x <= SERIES_MAX_X {
        nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + ln_series_sum(nu, x)
    } else {
        ln_i_scaled(nu, x) + x
    }
}

/// `ln I_ν(x) − x`, which stays O(ln x) for large arguments.
pub(crate) fn ln_i_scaled(nu: f64, x: f64) -> f64 {
    if x <= SERIES_MAX_X {
        return ln_i(nu, x) - x;
    }
    if nu < DEBYE_MIN_ORDER {
        if let Some(v) = ln_hankel_scaled(nu, x) {
            return v;
        }
        return nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + ln_series_sum(nu, x) - x;
    }
    ln_debye_scaled(nu, x)
}

/// `ln(I_ν(x) / x^ν)`, finite down to `x = 0`.
pub(crate) fn ln_i_over_pow(nu: f64, x: f64) -> f64 {
    if x <= SERIES_MAX_X {
        -nu * std::f64::consts::LN_2 - ln_gamma(nu + 1.0) + ln_series_sum(nu, x)
    } else {
        ln_i(nu, x) - nu * x.ln()
    }
}

/// `ln Σ_k (x²/4)^k / (k! (ν+1)_k)`, rescaled on the fly so it cannot overflow.
fn ln_series_sum(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut log_scale = 0.0_f64;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        term *= q / (k * (nu + k));
        sum += term;
        if sum > 1e280 {
            sum *= 1e-280;
            term *= 1e-280;
            log_scale += 280.0 * std::f64::consts::LN_10;
        }
        if term <= sum * 1e-17 || k > 1e6 {
            break;
        }
    }
    sum.ln() + log_scale
}

/// Hankel expansion `I_ν(x) ~ e^x / √(2πx) · Σ (−1)^k a_k(ν) / x^k`, scaled by `e^{−x}`.
///
/// Returns `None` if the terms start growing before reaching double precision.
fn ln_hankel_scaled(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut previous = f64::INFINITY;
    for k in 1..400 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * x);
        sum += term;
        let size = term.abs();
        if size <= 1e-17 * sum.abs() {
            return Some(sum.ln() - 0.5 * (2.0 * PI * x).ln());
        }
        if size > previous && k as f64 > nu {
            return None;
        }
        previous = size;
    }
    None
}

/// Debye uniform expansion of `I_ν(νz)` for large order, scaled by `e^{−x}`.
fn ln_debye_scaled(nu: f64, x: f64) -> f64 {
    let r = nu.hypot(x);
    let t = nu / r;
    // ν·η(z) − x with η = √(1+z²) + ln(z / (1 + √(1+z²))), rearranged to avoid cancellation.
    let eta_minus_x = nu * nu / (r + x) - nu * (nu / x).asinh();
    let polys = debye_polynomials();
    let mut sum = 1.0;
    let mut inv_pow = 1.0;
    for poly in polys.iter().skip(1) {
        inv_pow /= nu;
        let term = horner(poly, t) * inv_pow;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    eta_minus_x - 0.5 * (2.0 * PI).ln() - 0.5 * r.ln() + sum.ln()
}

fn horner(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Coefficients (in powers of t) of the Debye polynomials `u_0 … u_{K−1}`.
///
/// Built from `u_{k+1}(t) = ½t²(1−t²)u_k'(t) + ⅛∫₀ᵗ(1−5s²)u_k(s)ds`.
fn debye_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &polys[k];
            let mut next = vec![0.0; 3 * (k + 1) + 1];
            // ½ t² (1 − t²) u'(t)
            for (j, c) in u.iter().enumerate().skip(1) {
                let d = j as f64 * c;
                next[j + 1] += 0.5 * d;
                next[j + 3] -= 0.5 * d;
            }
            // ⅛ ∫₀ᵗ (1 − 5 s²) u(s) ds
            for (j, c) in u.iter().enumerate() {
                next[j + 1] += c / (8.0 * (j + 1) as f64);
                next[j + 3] -= 5.0 * c / (8.0 * (j + 3) as f64);
            }
            polys.push(next);
        }
        polys
    })
}

/// `I_{ν+1}(x) / I_ν(x)` from the Gauss continued fraction (modified Lentz).
fn ratio_cf(nu: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    let mut j = 1.0;
    loop {
        let b = 2.0 * (nu + j) / x;
        d += b;
        if d == 0.0 {
            d = TINY;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 || j > 1e6 {
            break;
        }
        j += 1.0;
    }
    f
}

/// `(A_p(x), 1 − A_p(x))`, each to full relative precision.
pub(crate) fn ratio_a_parts(p: usize, x: f64) -> (f64, f64) {
    let pf = p as f64;
    if x < SMALL_X {
        let a = x / pf - x * x * x / (pf * pf * (pf + 2.0));
        return (a, 1.0 - a);
    }
    let nu = (pf - 2.0) / 2.0;
    if x <= CF_MAX_X {
        let a = ratio_cf(nu, x);
        (a, 1.0 - a)
    } else {
        let d = ln_i_scaled(nu + 1.0, x) - ln_i_scaled(nu, x);
        (d.exp(), -d.exp_m1())
    }
}

pub(crate) fn ratio_a(p: usize, x: f64) -> f64 {
    ratio_a_parts(p, x).0
}

pub(crate) fn ratio_a_prime(p: usize, x: f64) -> f64 {
    let pf = p as f64;
    if x < SMALL_X {
        return 1.0 / pf - 3.0 * x * x / (pf * pf * (pf + 2.0));
    }
    let (a, one_minus_a) = ratio_a_parts(p, x);
    one_minus_a * (1.0 + a) - (pf - 1.0) * a / x
}

/// `A_p(c·κ) / κ`, with its limit `c/p` at `κ = 0`.
pub(crate) fn a_over_kappa(p: usize, c: f64, kappa: f64) -> f64 {
    let y = c * kappa;
    if y < SMALL_X {
        let pf = p as f64;
        return c / pf * (1.0 - y * y / (pf * (pf + 2.0)));
    }
    ratio_a(p, y) / kappa
}

/// `(1 − A_p(cκ)² − p·A_p(cκ)/(cκ)) / κ²`, the ξξᵀ coefficient of the vMF covariance.
///
/// Tends to `−2c²/(p²(p+2))` at `κ = 0`.
pub(crate) fn cov_radial_coeff(p: usize, c: f64, kappa: f64) -> f64 {
    let pf = p as f64;
    let y = c * kappa;
    if y < 1e-3 {
        let y2 = y * y;
        return c * c * (-2.0 / (pf * pf * (pf + 2.0)) + 8.0 * y2 / (pf * pf * pf * (pf + 2.0) * (pf + 4.0)));
    }
    let (a, one_minus_a) = ratio_a_parts(p, y);
    (one_minus_a * (1.0 + a) - pf * a / y) / (kappa * kappa)
}

pub(crate) fn ln_k(p: usize, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return ln_sphere_area(p);
    }
    let pf = p as f64;
    let nu = (pf - 2.0) / 2.0;
    0.5 * pf * (2.0 * PI).ln() + ln_i_over_pow(nu, kappa)
}
