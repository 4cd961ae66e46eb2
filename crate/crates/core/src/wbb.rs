//! Weighted Bayesian bootstrap for loss-based posteriors.
//!
//! Replicate `m` draws `e_i ~ Exp(1)`, sets `w_i = n e_i / Σe_j`, draws
//! `w_0 ~ Exp(1)` and minimizes `Σ w_i ℓ(x_i, ξ) + λ w_0 φ(ξ)`. The minimizers
//! are draws from the generalized posterior. Objectives are divided by `n`
//! before optimization so gradient tolerances are meaningful for any sample
//! size; this does not move the minimizer.

use rand::Rng as RandRng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{self, LossKernel, LossSpec};
use crate::solver::{self, Objective, SolveReport, SolverOptions};
use crate::vmf::{self, norm, Dataset, NaturalParam, SpherePoint};

/// Share of non-converged replicates above which a warning is attached.
pub const FAILURE_WARN_FRACTION: f64 = 0.05;
/// Minimum converged draws for interval summaries.
pub const MIN_DRAWS_FOR_INTERVALS: usize = 100;

/// Prior, entering the objective as the penalty `λ w_0 φ(ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Flat prior: no penalty.
    #[default]
    Uniform,
    /// `φ(ξ) = ‖ξ − mean‖² / (2 scale²)`.
    GaussianOnXi { lambda: f64, mean: Vec<f64>, scale: f64 },
}

impl PriorSpec {
    pub fn gaussian(lambda: f64, mean: Vec<f64>, scale: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Domain(format!("prior weight must be nonnegative, got {lambda}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!("prior scale must be positive, got {scale}")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("prior mean must be finite".into()));
        }
        Ok(PriorSpec::GaussianOnXi { lambda, mean, scale })
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            PriorSpec::GaussianOnXi { mean, .. } if mean.len() != p => {
                Err(Error::Shape(format!("prior mean has dimension {}, data {p}", mean.len())))
            }
            _ => Ok(()),
        }
    }

    /// `λ φ(ξ)`, adding `factor·λ∇φ(ξ)` to `grad`.
    fn accumulate(&self, xi: &[f64], factor: f64, grad: &mut [f64]) -> f64 {
        match self {
            PriorSpec::Uniform => 0.0,
            PriorSpec::GaussianOnXi { lambda, mean, scale } => {
                let s2 = scale * scale;
                let mut total = 0.0;
                for ((g, x), m) in grad.iter_mut().zip(xi).zip(mean) {
                    let d = x - m;
                    total += d * d;
                    *g += factor * lambda * d / s2;
                }
                lambda * total / (2.0 * s2)
            }
        }
    }
}

/// The scaled weighted objective `(Σ w_i ℓ_i + λ w_0 φ) / n`.
struct WeightedObjective<'a> {
    data: &'a Dataset,
    spec: LossSpec,
    weights: Option<&'a [f64]>,
    prior: &'a PriorSpec,
    w0: f64,
}

impl Objective for WeightedObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; x.len()];
        self.value_and_gradient(x, &mut scratch)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let kernel = LossKernel::new(x, self.spec);
        let mut f = losses::weighted_value_and_gradient(&kernel, self.data, self.weights, grad);
        f += self.w0 * self.prior.accumulate(x, self.w0, grad);
        let inv_n = 1.0 / self.data.n() as f64;
        grad.iter_mut().for_each(|g| *g *= inv_n);
        f * inv_n
    }
}

fn start_point(data: &Dataset, weights: Option<&[f64]>) -> Vec<f64> {
    let est = match weights {
        None => vmf::moment_estimate(data),
        Some(w) => vmf::weighted_moment_estimate(data, w),
    };
    match est {
        Ok(xi) => xi.into_inner(),
        Err(_) => vec![0.0; data.p()],
    }
}

/// Minimizer of the unweighted empirical loss, with the solver report.
pub fn point_estimate_report(data: &Dataset, spec: LossSpec, options: &SolverOptions) -> Result<SolveReport> {
    let spec = spec.validated()?;
    if data.n() < data.p() {
        log::warn!("only {} observations in dimension {}; the estimate may be poorly determined", data.n(), data.p());
    }
    let objective = WeightedObjective { data, spec, weights: None, prior: &PriorSpec::Uniform, w0: 0.0 };
    solver::minimize(&objective, &start_point(data, None), options)
}

/// Minimizer of `Σ ℓ(x_i, ξ)` from the moment start.
///
/// A non-converged solve is an error carrying the last iterate.
pub fn point_estimate(data: &Dataset, spec: LossSpec) -> Result<NaturalParam> {
    let report = point_estimate_report(data, spec, &SolverOptions::default())?;
    if !report.converged {
        return Err(Error::Numerical {
            message: format!(
                "point estimate did not converge (gradient norm {:.3e} after {} iterations)",
                report.gradient_norm, report.iterations
            ),
            last_iterate: Some(report.minimizer),
        });
    }
    NaturalParam::new(report.minimizer)
}

/// Settings for [`wbb_sample_with`].
#[derive(Debug, Clone)]
pub struct WbbConfig {
    pub draws: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Replace the random weights by ones (and `w_0` by 1); for testing.
    #[doc(hidden)]
    pub unit_weights: bool,
}

impl WbbConfig {
    pub fn new(draws: usize, seed: u64) -> Self {
        WbbConfig { draws, seed, solver: SolverOptions::default(), unit_weights: false }
    }
}

/// Posterior draws with per-replicate solver reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    /// One row per replicate, in replicate order.
    pub draws: Vec<Vec<f64>>,
    pub loss: LossSpec,
    pub prior: PriorSpec,
    pub seed: u64,
    pub reports: Vec<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn n_failed(&self) -> usize {
        self.reports.iter().filter(|r| !r.converged).count()
    }

    /// Rows whose solve converged.
    pub fn converged(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.iter().zip(&self.reports).filter(|(_, r)| r.converged).map(|(d, _)| d.as_slice())
    }
}

/// `M` WBB posterior draws with default solver settings.
pub fn wbb_sample(data: &Dataset, spec: LossSpec, prior: &PriorSpec, m: usize, seed: u64) -> Result<PosteriorDraws> {
    wbb_sample_with(data, spec, prior, &WbbConfig::new(m, seed))
}

pub fn wbb_sample_with(data: &Dataset, spec: LossSpec, prior: &PriorSpec, config: &WbbConfig) -> Result<PosteriorDraws> {
    let spec = spec.validated()?;
    prior.check_dim(data.p())?;
    if config.draws == 0 {
        return Err(Error::Argument("number of posterior draws must be at least 1".into()));
    }
    let n = data.n();
    let replicates: Vec<(Vec<f64>, SolveReport)> = (0..config.draws)
        .into_par_iter()
        .map(|m| {
            let mut rng = crate::rng_for(config.seed, m as u64);
            let (weights, w0) = if config.unit_weights {
                (vec![1.0; n], 1.0)
            } else {
                let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = e.iter().sum();
                let w = e.iter().map(|x| n as f64 * x / total).collect();
                (w, rng.sample::<f64, _>(Exp1))
            };
            let objective = WeightedObjective { data, spec, weights: Some(&weights), prior, w0 };
            let start = start_point(data, (!config.unit_weights).then_some(weights.as_slice()));
            match solver::minimize(&objective, &start, &config.solver) {
                Ok(report) => (report.minimizer.clone(), report),
                Err(e) => {
                    let last = match &e {
                        Error::Numerical { last_iterate: Some(x), .. } => x.clone(),
                        _ => start.clone(),
                    };
                    let failed = SolveReport {
                        minimizer: last.clone(),
                        objective: f64::NAN,
                        gradient_norm: f64::NAN,
                        iterations: 0,
                        converged: false,
                        restarts_used: config.solver.max_restarts,
                        history: Vec::new(),
                    };
                    (last, failed)
                }
            }
        })
        .collect();
    let (draws, reports): (Vec<_>, Vec<_>) = replicates.into_iter().unzip();
    let failed = reports.iter().filter(|r| !r.converged).count();
    if failed == config.draws {
        return Err(Error::numerical(format!("all {failed} bootstrap replicates failed to converge")));
    }
    let warning = (failed as f64 > FAILURE_WARN_FRACTION * config.draws as f64).then(|| {
        let msg = format!("{failed} of {} replicates did not converge and were excluded", config.draws);
        log::warn!("{msg}");
        msg
    });
    Ok(PosteriorDraws { draws, loss: spec, prior: prior.clone(), seed: config.seed, reports, warning })
}

/// Posterior summaries over the converged draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_draws: usize,
    pub n_excluded: usize,
    pub level: f64,
    pub mean_xi: Vec<f64>,
    /// Normalized average of the draw directions; absent if they cancel.
    pub mean_direction: Option<SpherePoint>,
    pub mean_kappa: f64,
    pub resultant_length: f64,
    /// Angle of `mean_direction` (circle only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub angle_ci: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa_ci: Option<(f64, f64)>,
}

/// Summarizes converged draws; intervals need at least
/// [`MIN_DRAWS_FOR_INTERVALS`] of them.
pub fn summarize(draws: &PosteriorDraws, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument(format!("credible level must lie in (0, 1), got {level}")));
    }
    let rows: Vec<&[f64]> = draws.converged().collect();
    let count = rows.len();
    if count == 0 {
        return Err(Error::InsufficientDraws { needed: 1, available: 0 });
    }
    let p = rows[0].len();
    let mut mean_xi = vec![0.0; p];
    let mut mean_mu = vec![0.0; p];
    let mut kappas = Vec::with_capacity(count);
    let mut directions = 0usize;
    for row in &rows {
        let k = norm(row);
        kappas.push(k);
        mean_xi.iter_mut().zip(row.iter()).for_each(|(a, b)| *a += b);
        if k > 0.0 {
            mean_mu.iter_mut().zip(row.iter()).for_each(|(a, b)| *a += b / k);
            directions += 1;
        }
    }
    mean_xi.iter_mut().for_each(|a| *a /= count as f64);
    if directions > 0 {
        mean_mu.iter_mut().for_each(|a| *a /= directions as f64);
    }
    let resultant_length = norm(&mean_mu).min(1.0);
    let mean_direction = SpherePoint::normalized(mean_mu).ok();
    let mean_kappa = kappas.iter().sum::<f64>() / count as f64;
    let mean_angle = match (&mean_direction, p) {
        (Some(d), 2) => Some(d.angle()),
        _ => None,
    };
    let (lo_q, hi_q) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut kappa_ci = None;
    let mut angle_ci = None;
    if count >= MIN_DRAWS_FOR_INTERVALS {
        kappas.sort_by(f64::total_cmp);
        kappa_ci = Some((quantile_sorted(&kappas, lo_q), quantile_sorted(&kappas, hi_q)));
        if let Some(center) = mean_angle {
            let mut angles: Vec<f64> = rows
                .iter()
                .filter(|r| norm(r) > 0.0)
                .map(|r| unwrap_angle(r[1].atan2(r[0]), center))
                .collect();
            angles.sort_by(f64::total_cmp);
            angle_ci = Some((quantile_sorted(&angles, lo_q), quantile_sorted(&angles, hi_q)));
        }
    }
    Ok(PosteriorSummary {
        n_draws: count,
        n_excluded: draws.len() - count,
        level,
        mean_xi,
        mean_direction,
        mean_kappa,
        resultant_length,
        mean_angle,
        angle_ci,
        kappa_ci,
    })
}

/// Representative of `theta` in `(center − π, center + π]`.
pub fn unwrap_angle(theta: f64, center: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut d = (theta - center).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    center + d
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_for;
    use crate::specfun;
    use crate::vmf::sample;

    fn vmf_data(p: usize, kappa: f64, n: usize, seed: u64) -> Dataset {
        let mut mu = vec![0.0; p];
        mu[0] = 1.0;
        let xi = NaturalParam::from_polar(kappa, &SpherePoint::new(mu).unwrap()).unwrap();
        sample(&xi, n, &mut rng_for(seed, 0)).unwrap()
    }

    #[test]
    fn kl_point_estimate_solves_likelihood_equation() {
        let data = vmf_data(3, 5.0, 500, 31);
        let xi = point_estimate(&data, LossSpec::Kl).unwrap();
        let k = xi.kappa();
        let a = specfun::ratio_a(3, k);
        for (m, s) in data.mean().iter().zip(xi.as_slice()) {
            assert!((m - a * s / k).abs() < 1e-6);
        }
    }

    #[test]
    fn small_alpha_matches_kl() {
        let data = vmf_data(2, 3.0, 300, 32);
        let kl = point_estimate(&data, LossSpec::Kl).unwrap();
        let dpd = point_estimate(&data, LossSpec::Dpd { alpha: 1e-6 }).unwrap();
        for (a, b) in kl.as_slice().iter().zip(dpd.as_slice()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn dpd_resists_antipodal_cluster() {
        // 10% of the points sit in a tight cluster opposite the mean direction.
        let kappa = 10.0;
        let clean = vmf_data(2, kappa, 180, 33);
        let far = NaturalParam::new(vec![-200.0, 0.0]).unwrap();
        let outliers = sample(&far, 20, &mut rng_for(33, 1)).unwrap();
        let data = clean.concat(&outliers).unwrap();
        let kl = point_estimate(&data, LossSpec::Kl).unwrap().kappa();
        let dpd = point_estimate(&data, LossSpec::Dpd { alpha: 0.5 }).unwrap().kappa();
        assert!((dpd - kappa).abs() < 0.2 * kappa, "dpd kappa {dpd}");
        assert!(kl < 0.7 * kappa, "kl kappa {kl}");
    }

    #[test]
    fn unit_weight_replicate_equals_point_estimate() {
        let data = vmf_data(3, 4.0, 120, 34);
        for spec in [LossSpec::Kl, LossSpec::Gamma { gamma: 0.3 }] {
            let config = WbbConfig { unit_weights: true, ..WbbConfig::new(1, 9) };
            let draws = wbb_sample_with(&data, spec, &PriorSpec::Uniform, &config).unwrap();
            let point = point_estimate(&data, spec).unwrap();
            assert_eq!(draws.draws[0], point.into_inner());
        }
    }

    #[test]
    fn uniform_prior_ignores_lambda_and_gaussian_prior_shrinks() {
        let data = vmf_data(2, 4.0, 60, 35);
        let a = wbb_sample(&data, LossSpec::Kl, &PriorSpec::Uniform, 20, 5).unwrap();
        let b = wbb_sample(&data, LossSpec::Kl, &PriorSpec::Uniform, 20, 5).unwrap();
        assert_eq!(a, b);
        let weak = PriorSpec::gaussian(1.0, vec![0.0, 0.0], 1e6).unwrap();
        let c = wbb_sample(&data, LossSpec::Kl, &weak, 20, 5).unwrap();
        for (x, y) in a.draws.iter().flatten().zip(c.draws.iter().flatten()) {
            assert!((x - y).abs() < 1e-4);
        }
        let strong = PriorSpec::gaussian(1.0, vec![0.0, 0.0], 0.1).unwrap();
        let d = wbb_sample(&data, LossSpec::Kl, &strong, 20, 5).unwrap();
        let ka = summarize(&a, 0.95).unwrap().mean_kappa;
        let kd = summarize(&d, 0.95).unwrap().mean_kappa;
        assert!(kd < ka);
        assert!(wbb_sample(&data, LossSpec::Kl, &PriorSpec::gaussian(1.0, vec![0.0; 3], 1.0).unwrap(), 5, 1).is_err());
    }

    #[test]
    fn summary_of_identical_draws() {
        let xi = vec![3.0, 4.0];
        let report = SolveReport {
            minimizer: xi.clone(),
            objective: 0.0,
            gradient_norm: 0.0,
            iterations: 1,
            converged: true,
            restarts_used: 0,
            history: vec![],
        };
        let draws = PosteriorDraws {
            draws: vec![xi.clone(); 150],
            loss: LossSpec::Kl,
            prior: PriorSpec::Uniform,
            seed: 0,
            reports: vec![report; 150],
            warning: None,
        };
        let s = summarize(&draws, 0.95).unwrap();
        assert!((s.resultant_length - 1.0).abs() < 1e-12);
        assert!((s.mean_kappa - 5.0).abs() < 1e-14);
        let (lo, hi) = s.kappa_ci.unwrap();
        assert_eq!(lo, hi);
        let (lo, hi) = s.angle_ci.unwrap();
        assert!((hi - lo).abs() < 1e-15);
    }

    #[test]
    fn reflected_draws_point_along_axis() {
        let mut rows = Vec::new();
        for k in 1..=60 {
            let t = 0.01 * k as f64;
            rows.push(vec![2.0 * t.cos(), 2.0 * t.sin()]);
            rows.push(vec![2.0 * t.cos(), -2.0 * t.sin()]);
        }
        let report = SolveReport { minimizer: vec![], objective: 0.0, gradient_norm: 0.0, iterations: 1, converged: true, restarts_used: 0, history: vec![] };
        let draws = PosteriorDraws { reports: vec![report; rows.len()], draws: rows, loss: LossSpec::Kl, prior: PriorSpec::Uniform, seed: 0, warning: None };
        let s = summarize(&draws, 0.9).unwrap();
        let d = s.mean_direction.unwrap();
        assert!((d.coords()[0] - 1.0).abs() < 1e-12 && d.coords()[1].abs() < 1e-12);
        let (lo, hi) = s.angle_ci.unwrap();
        assert!((lo + hi).abs() < 1e-12);
    }

    #[test]
    fn angle_interval_straddles_the_cut() {
        // Draws around θ = π: naive quantiles would span almost the whole circle.
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|k| {
                let t = std::f64::consts::PI + 0.1 * ((k as f64) / 199.0 - 0.5);
                vec![t.cos(), t.sin()]
            })
            .collect();
        let report = SolveReport { minimizer: vec![], objective: 0.0, gradient_norm: 0.0, iterations: 1, converged: true, restarts_used: 0, history: vec![] };
        let draws = PosteriorDraws { reports: vec![report; rows.len()], draws: rows, loss: LossSpec::Kl, prior: PriorSpec::Uniform, seed: 0, warning: None };
        let s = summarize(&draws, 0.95).unwrap();
        let (lo, hi) = s.angle_ci.unwrap();
        assert!(hi - lo < 0.1);
    }

    #[test]
    fn too_few_draws_omit_intervals() {
        let data = vmf_data(2, 4.0, 50, 36);
        let draws = wbb_sample(&data, LossSpec::Kl, &PriorSpec::Uniform, 10, 1).unwrap();
        let s = summarize(&draws, 0.95).unwrap();
        assert!(s.kappa_ci.is_none() && s.angle_ci.is_none());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((unwrap_angle(-3.1, 3.0) - (2.0 * std::f64::consts::PI - 3.1)).abs() < 1e-12);
    }
}
