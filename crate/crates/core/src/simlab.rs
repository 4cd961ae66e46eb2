//! Contamination studies.
//!
//! Data come from the mixture `(1 − ε) vMF(ξ) + ε u`, each loss is fitted on
//! the same replicate dataset, and the fits are scored by
//!
//! * `Σ‖ξ̂_j − ξ‖² / (R p)`
//! * `Σ (1 − μ̂_jᵀ μ) / R`
//! * `Σ (κ̂_j − κ)² / R`
//!
//! Replicates run in parallel but every replicate owns its random stream and
//! results are reduced in replicate order, so a study is bit-reproducible.

use rand::{Rng as _, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::vmf::{dot, norm, Dataset, NaturalParam, SpherePoint, VmfSampler};
use crate::wbb::{self, PriorSpec};

/// The contaminating law `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contamination {
    UniformSphere,
    PointMass { y: SpherePoint },
    VmfAt { eta: NaturalParam },
}

/// How each replicate is turned into an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// WBB posterior means.
    #[default]
    Wbb,
    /// Plain loss minimizer; much faster.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub n: usize,
    pub epsilon: f64,
    pub true_xi: NaturalParam,
    pub contamination: Contamination,
    pub replications: usize,
    pub losses: Vec<LossSpec>,
    pub seed: u64,
    pub wbb_m: usize,
    #[serde(default)]
    pub estimator: Estimator,
}

impl SimConfig {
    /// Desk-scale defaults: 100 replications of size 100, `M = 300`.
    pub fn new(true_xi: NaturalParam, epsilon: f64, losses: Vec<LossSpec>, seed: u64) -> Self {
        SimConfig {
            p: true_xi.dim(),
            n: 100,
            epsilon,
            true_xi,
            contamination: Contamination::UniformSphere,
            replications: 100,
            losses,
            seed,
            wbb_m: 300,
            estimator: Estimator::Wbb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.true_xi.dim() != self.p {
            return Err(Error::Shape(format!("true_xi has {} coordinates but p = {}", self.true_xi.dim(), self.p)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Domain(format!("contamination ratio must lie in [0, 1), got {}", self.epsilon)));
        }
        if self.n == 0 || self.replications == 0 {
            return Err(Error::Argument("n and replications must be at least 1".into()));
        }
        if self.losses.is_empty() {
            return Err(Error::Argument("at least one loss is required".into()));
        }
        if self.estimator == Estimator::Wbb && self.wbb_m == 0 {
            return Err(Error::Argument("wbb_m must be at least 1".into()));
        }
        for spec in &self.losses {
            spec.validated()?;
        }
        let dim = match &self.contamination {
            Contamination::UniformSphere => self.p,
            Contamination::PointMass { y } => y.dim(),
            Contamination::VmfAt { eta } => eta.dim(),
        };
        if dim != self.p {
            return Err(Error::Shape(format!("contamination lives in dimension {dim}, data in {}", self.p)));
        }
        Ok(())
    }
}

/// Replicate dataset and the number of contaminated rows in it.
fn generate(config: &SimConfig, rng: &mut crate::Rng) -> (Dataset, usize) {
    let p = config.p;
    let clean = VmfSampler::new(&config.true_xi);
    let dirty = match &config.contamination {
        Contamination::UniformSphere => Some(VmfSampler::new(&NaturalParam::zeros(p))),
        Contamination::VmfAt { eta } => Some(VmfSampler::new(eta)),
        Contamination::PointMass { .. } => None,
    };
    let mut flat = vec![0.0; config.n * p];
    let mut contaminated = 0;
    for row in flat.chunks_exact_mut(p) {
        if rng.random::<f64>() < config.epsilon {
            contaminated += 1;
            match (&dirty, &config.contamination) {
                (Some(s), _) => s.draw_into(rng, row),
                (None, Contamination::PointMass { y }) => row.copy_from_slice(y.coords()),
                _ => unreachable!(),
            }
        } else {
            clean.draw_into(rng, row);
        }
    }
    (Dataset::from_flat_unchecked(p, flat), contaminated)
}

/// Dataset for replicate `replicate`, from its own stream of `config.seed`.
pub fn gen_contaminated(config: &SimConfig, replicate: usize) -> Result<Dataset> {
    config.validate()?;
    Ok(generate(config, &mut crate::rng_for(config.seed, replicate as u64)).0)
}

/// One fitted replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub xi: Vec<f64>,
    pub mu: Vec<f64>,
    pub kappa: f64,
}

impl Estimate {
    /// From a point value of `ξ`: `μ̂ = ξ̂/‖ξ̂‖`, `κ̂ = ‖ξ̂‖`.
    pub fn from_xi(xi: Vec<f64>) -> Result<Self> {
        let kappa = norm(&xi);
        if kappa == 0.0 {
            return Err(Error::Degenerate("estimate has no direction".into()));
        }
        let mu = xi.iter().map(|v| v / kappa).collect();
        Ok(Estimate { xi, mu, kappa })
    }
}

/// The three study metrics `(ξ, μ, κ)` over `R` estimates.
pub fn mse_metrics(estimates: &[Estimate], truth: &NaturalParam) -> Result<(f64, f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::Argument("no estimates to score".into()));
    }
    let p = truth.dim();
    let mu = truth
        .mean_direction()
        .ok_or_else(|| Error::Degenerate("true parameter has no direction".into()))?;
    let kappa = truth.kappa();
    let r = estimates.len() as f64;
    let (mut sx, mut sm, mut sk) = (0.0, 0.0, 0.0);
    for e in estimates {
        if e.xi.len() != p || e.mu.len() != p {
            return Err(Error::Shape(format!("estimate of dimension {} against truth of dimension {p}", e.xi.len())));
        }
        sx += e.xi.iter().zip(truth.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        sm += 1.0 - dot(&e.mu, mu.coords());
        sk += (e.kappa - kappa).powi(2);
    }
    Ok((sx / (r * p as f64), (sm / r).max(0.0), sk / r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Xi,
    Mu,
    Kappa,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Xi => "xi",
            Metric::Mu => "mu",
            Metric::Kappa => "kappa",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: usize,
    pub epsilon: f64,
    pub loss: String,
    pub metric: Metric,
    pub value: f64,
    /// Replicates that entered the average.
    pub replications: usize,
    /// Replicates dropped because some loss failed on them.
    pub dropped: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTable {
    pub rows: Vec<MseRow>,
}

impl MseTable {
    pub fn get(&self, loss: &LossSpec, metric: Metric) -> Option<f64> {
        let name = loss.to_string();
        self.rows.iter().find(|r| r.loss == name && r.metric == metric).map(|r| r.value)
    }
}

fn fit(data: &Dataset, spec: LossSpec, config: &SimConfig, wbb_seed: u64) -> Result<Estimate> {
    match config.estimator {
        Estimator::Point => Estimate::from_xi(wbb::point_estimate(data, spec)?.into_inner()),
        Estimator::Wbb => {
            let draws = wbb::wbb_sample(data, spec, &PriorSpec::Uniform, config.wbb_m, wbb_seed)?;
            let s = wbb::summarize(&draws, 0.95)?;
            let mu = s
                .mean_direction
                .ok_or_else(|| Error::Degenerate("posterior draws have no mean direction".into()))?;
            Ok(Estimate { xi: s.mean_xi, mu: mu.into_inner(), kappa: s.mean_kappa })
        }
    }
}

/// Fits every loss on replicate `j`; `None` if any fit fails.
fn replicate(config: &SimConfig, j: usize) -> Option<Vec<Estimate>> {
    let mut rng = crate::rng_for(config.seed, j as u64);
    let (data, _) = generate(config, &mut rng);
    let wbb_seed = rng.next_u64();
    let mut out = Vec::with_capacity(config.losses.len());
    for &spec in &config.losses {
        match fit(&data, spec, config, wbb_seed) {
            Ok(e) => out.push(e),
            Err(e) => {
                log::warn!("replicate {j}: {spec} failed: {e}");
                return None;
            }
        }
    }
    Some(out)
}

/// Runs the study; a replicate failing under any loss is dropped for all of them.
pub fn run_study(config: &SimConfig) -> Result<MseTable> {
    config.validate()?;
    let fits: Vec<Option<Vec<Estimate>>> = (0..config.replications).into_par_iter().map(|j| replicate(config, j)).collect();
    let kept: Vec<Vec<Estimate>> = fits.into_iter().flatten().collect();
    let dropped = config.replications - kept.len();
    if kept.is_empty() {
        return Err(Error::numerical(format!("all {} replicates failed", config.replications)));
    }
    if dropped > 0 {
        log::warn!("{dropped} of {} replicates dropped", config.replications);
    }
    let mut rows = Vec::with_capacity(3 * config.losses.len());
    for (l, spec) in config.losses.iter().enumerate() {
        let ests: Vec<Estimate> = kept.iter().map(|r| r[l].clone()).collect();
        let (x, m, k) = mse_metrics(&ests, &config.true_xi)?;
        for (metric, value) in [(Metric::Xi, x), (Metric::Mu, m), (Metric::Kappa, k)] {
            rows.push(MseRow {
                n: config.n,
                epsilon: config.epsilon,
                loss: spec.to_string(),
                metric,
                value,
                replications: kept.len(),
                dropped,
                seed: config.seed,
            });
        }
    }
    Ok(MseTable { rows })
}
