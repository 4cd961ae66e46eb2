//! Limited-memory BFGS with a backtracking Armijo line search.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vmf::{dot, norm};

/// A smooth objective on `ℝ^p`.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Value at `x`, writing the gradient into `grad`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.value(x)
    }
}

/// An [`Objective`] from a value closure and a gradient closure.
pub struct FnObjective<F, G> {
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(f: F, g: G) -> Self {
        FnObjective { f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.g)(x, grad)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Converged when `‖∇f‖ ≤ grad_tol · max(1, ‖x0‖)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_restarts: usize,
    pub max_backtracks: usize,
    /// Keep the objective value after every accepted step.
    #[serde(default)]
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { memory: 10, grad_tol: 1e-7, max_iter: 500, max_restarts: 3, max_backtracks: 60, record_history: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    pub gradient_norm: f64,
    /// Iterations summed over all attempts.
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<f64>,
}

const C1: f64 = 1e-4;
const RESTART_SEED: u64 = 0x5eed_0b5e;

/// Minimizes `objective` from `x0`.
///
/// Deterministic: restarts use a fixed sequence of perturbation directions.
pub fn minimize<O: Objective + ?Sized>(objective: &O, x0: &[f64], options: &SolverOptions) -> Result<SolveReport> {
    if x0.is_empty() {
        return Err(Error::Shape("empty starting point".into()));
    }
    let tol = options.grad_tol * norm(x0).max(1.0);
    let mut total_iterations = 0;
    let mut best: Option<SolveReport> = None;
    let mut last_error = None;
    for attempt in 0..=options.max_restarts {
        let start = if attempt == 0 { x0.to_vec() } else { perturbed_start(x0, attempt) };
        match run(objective, &start, tol, options) {
            Ok(mut report) => {
                total_iterations += report.iterations;
                report.restarts_used = attempt;
                let better = match &best {
                    None => true,
                    Some(b) => report.objective < b.objective,
                };
                let done = report.converged;
                if done || better {
                    best = Some(report);
                }
                if done {
                    break;
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    match best {
        Some(mut report) => {
            report.iterations = total_iterations;
            Ok(report)
        }
        None => Err(last_error.unwrap_or_else(|| Error::numerical("solver made no attempt"))),
    }
}

/// Convenience wrapper around [`minimize`] for closures.
pub fn minimize_fn<F, G>(f: F, g: G, x0: &[f64], options: &SolverOptions) -> Result<SolveReport>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    minimize(&FnObjective::new(f, g), x0, options)
}

fn perturbed_start(x0: &[f64], attempt: usize) -> Vec<f64> {
    let mut rng = crate::rng_for(RESTART_SEED, attempt as u64);
    let mut dir: Vec<f64> = (0..x0.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = norm(&dir).max(f64::MIN_POSITIVE);
    let scale = 0.1 * (norm(x0) + 1.0);
    dir.iter_mut().zip(x0).for_each(|(d, x)| *d = x + scale * *d / r);
    dir
}

fn run<O: Objective + ?Sized>(objective: &O, x0: &[f64], tol: f64, options: &SolverOptions) -> Result<SolveReport> {
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; p];
    let mut f = objective.value_and_gradient(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical { message: "objective or gradient not finite at the start".into(), last_iterate: Some(x) });
    }
    let mut history = Vec::new();
    if options.record_history {
        history.push(f);
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(options.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(options.memory);
    let mut rho_hist: Vec<f64> = Vec::with_capacity(options.memory);
    let mut x_new = vec![0.0; p];
    let mut g_new = vec![0.0; p];
    let mut iterations = 0;
    let mut gnorm = norm(&g);

    while gnorm > tol && iterations < options.max_iter {
        iterations += 1;
        let mut d = two_loop(&g, &s_hist, &y_hist, &rho_hist);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = if s_hist.is_empty() { (1.0 / norm(&d)).min(1.0) } else { 1.0 };

        // Backtracking with safeguarded quadratic interpolation.
        let mut accepted = None;
        let mut fallback: Option<(f64, f64, f64)> = None; // (step, f, ‖g‖) with f ≤ current
        let mut saw_finite = false;
        for _ in 0..options.max_backtracks {
            x_new.iter_mut().zip(&x).zip(&d).for_each(|((xn, xi), di)| *xn = xi + step * di);
            let f_trial = objective.value_and_gradient(&x_new, &mut g_new);
            let finite = f_trial.is_finite() && g_new.iter().all(|v| v.is_finite());
            if finite {
                saw_finite = true;
                if f_trial <= f + C1 * step * slope {
                    accepted = Some(f_trial);
                    break;
                }
                if f_trial <= f {
                    let gn = norm(&g_new);
                    if fallback.is_none_or(|(_, _, best)| gn < best) {
                        fallback = Some((step, f_trial, gn));
                    }
                }
                let denom = 2.0 * (f_trial - f - slope * step);
                let trial = if denom > 0.0 { -slope * step * step / denom } else { 0.5 * step };
                step = trial.clamp(0.1 * step, 0.5 * step);
            } else {
                step *= 0.5;
            }
        }
        let f_next = match accepted {
            Some(v) => v,
            None => match fallback {
                // Rounding can defeat the Armijo test near a minimum; take a
                // non-increasing step if it reduced the gradient.
                Some((st, fv, gn)) if gn < gnorm => {
                    x_new.iter_mut().zip(&x).zip(&d).for_each(|((xn, xi), di)| *xn = xi + st * di);
                    objective.gradient(&x_new, &mut g_new);
                    fv
                }
                _ if !saw_finite => {
                    return Err(Error::Numerical {
                        message: "objective not finite along the search direction".into(),
                        last_iterate: Some(x),
                    });
                }
                _ => break,
            },
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if s_hist.len() == options.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_next;
        gnorm = norm(&g);
        if options.record_history {
            history.push(f);
        }
    }

    Ok(SolveReport {
        minimizer: x,
        objective: f,
        gradient_norm: gnorm,
        iterations,
        converged: gnorm <= tol,
        restarts_used: 0,
        history,
    })
}

/// `−H·g` from the stored curvature pairs.
fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], rho: &[f64]) -> Vec<f64> {
    let m = s_hist.len();
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; m];
    for i in (0..m).rev() {
        alpha[i] = rho[i] * dot(&s_hist[i], &q);
        q.iter_mut().zip(&y_hist[i]).for_each(|(qj, yj)| *qj -= alpha[i] * yj);
    }
    if let Some(last) = m.checked_sub(1) {
        let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..m {
        let beta = rho[i] * dot(&y_hist[i], &q);
        q.iter_mut().zip(&s_hist[i]).for_each(|(qj, sj)| *qj += (alpha[i] - beta) * sj);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
