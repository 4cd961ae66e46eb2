//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with
//! `cargo test --release --test acceptance`.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use robvmf::asymptotics::{self, TuningKind};
use robvmf::cli::{self, DataArgs, FitArgs, InputFormat, LossRequest, PriorKind};
use robvmf::losses::{grad_loss, hessian_loss, loss_at};
use robvmf::robustness;
use robvmf::simlab::{self, Contamination, Metric, SimConfig};
use robvmf::specfun::{bessel_ratio_a, bessel_ratio_a_prime, log_bessel_i, log_k, BesselOrder, Dimension};
use robvmf::vmf::{self, VmfSampler};
use robvmf::wbb::{self, PriorSpec};
use robvmf::{rng_for, LossSpec, NaturalParam, SpherePoint};

enum Verdict {
    Pass(String),
    Fail(String),
    NotEvaluated(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, title: &str, budget: Duration, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = f();
        let took = start.elapsed();
        let slow = took > budget;
        let timing = format!("{:.1}s of {}s", took.as_secs_f64(), budget.as_secs());
        let line = match v {
            Verdict::Pass(d) if !slow => format!("PASS criterion {id} ({title}): {d} [{timing}]"),
            Verdict::Pass(d) => {
                self.failures += 1;
                format!("FAIL criterion {id} ({title}): over time budget; {d} [{timing}]")
            }
            Verdict::Fail(d) => {
                self.failures += 1;
                format!("FAIL criterion {id} ({title}): {d} [{timing}]")
            }
            Verdict::NotEvaluated(d) => format!("NOT EVALUATED criterion {id} ({title}): {d}"),
        };
        println!("{line}");
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn random_unit(p: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / r).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// 1 ------------------------------------------------------------------------

fn special_functions() -> Verdict {
    let mut worst = 0.0f64;
    let mut worst_at = (0.0, 0.0);
    let table = common::bessel_reference();
    for &(nu, x, want) in &table {
        let got = log_bessel_i(BesselOrder::new(nu).unwrap(), x).unwrap();
        // |Δ ln I| is the relative error of I to first order
        let rel = (got - want).abs();
        if rel > worst {
            worst = rel;
            worst_at = (nu, x);
        }
    }
    let mut worst_d = 0.0f64;
    for p in 2..=20 {
        let dim = Dimension::new(p).unwrap();
        for e in -12..=12 {
            let x = 10f64.powf(e as f64 / 4.0);
            let h = 1e-4 * x.max(1e-2);
            let fd = (bessel_ratio_a(dim, x + h).unwrap() - bessel_ratio_a(dim, x - h).unwrap()) / (2.0 * h);
            let an = bessel_ratio_a_prime(dim, x).unwrap();
            worst_d = worst_d.max((fd - an).abs() / an.abs());
        }
    }
    verdict(
        worst < 1e-10 && worst_d < 1e-6 && table.len() == 101 * 25,
        format!(
            "{} reference points, max relative error of I {worst:.2e} at (nu, x) = {worst_at:?}; max A' relative gap {worst_d:.2e}",
            table.len()
        ),
    )
}

// 2 ------------------------------------------------------------------------

/// Loss written directly from `ln K_p`, shifted by the constant `1/γ` for the
/// gamma loss so that finite differences do not cancel when it saturates.
fn oracle_loss(x: &[f64], xi: &[f64], spec: LossSpec) -> f64 {
    let d = Dimension::new(xi.len()).unwrap();
    let lk = |k: f64| log_k(d, k).unwrap();
    let kappa = norm(xi);
    let t: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
    match spec {
        LossSpec::Kl => lk(kappa) - t,
        LossSpec::Dpd { alpha } => {
            let c = 1.0 + alpha;
            -(alpha * (t - lk(kappa))).exp() / alpha + (lk(c * kappa) - c * lk(kappa)).exp() / c
        }
        LossSpec::Gamma { gamma } => {
            let c = 1.0 + gamma;
            -(gamma * t - gamma / c * lk(c * kappa)).exp() / gamma
        }
    }
}

fn oracle_shift(spec: LossSpec) -> f64 {
    match spec {
        LossSpec::Gamma { gamma } => 1.0 / gamma,
        _ => 0.0,
    }
}

fn derivatives() -> Verdict {
    let mut rng = rng_for(2024, 2);
    let dims = [2usize, 3, 5];
    let tunings = [0.15, 0.5, 1.0];
    let (mut worst_g, mut worst_h, mut worst_v) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..100 {
        let p = dims[trial % 3];
        let kappa = 0.1 + 49.9 * rng.random::<f64>();
        let t = tunings[(trial / 3) % 3];
        let spec = match trial % 3 {
            0 => LossSpec::Kl,
            1 => LossSpec::Dpd { alpha: t },
            _ => LossSpec::Gamma { gamma: t },
        };
        let xi: Vec<f64> = random_unit(p, &mut rng).into_iter().map(|m| kappa * m).collect();
        // observation near the mode half of the time so the robust weights are not negligible
        let x = if rng.random::<bool>() {
            VmfSampler::new(&NaturalParam::new(xi.clone()).unwrap()).draw(&mut rng)
        } else {
            SpherePoint::new(random_unit(p, &mut rng)).unwrap()
        };
        let at = |v: &[f64]| NaturalParam::new(v.to_vec()).unwrap();
        let g = grad_loss(&x, &at(&xi), spec).unwrap();
        let hmat = hessian_loss(&x, &at(&xi), spec).unwrap();
        let h = 1e-5 * (1.0 + kappa);
        let mut fd_g = vec![0.0; p];
        let mut fd_h = DMatrix::zeros(p, p);
        for j in 0..p {
            let mut up = xi.clone();
            let mut dn = xi.clone();
            up[j] += h;
            dn[j] -= h;
            fd_g[j] = (oracle_loss(x.coords(), &up, spec) - oracle_loss(x.coords(), &dn, spec)) / (2.0 * h);
            let gu = grad_loss(&x, &at(&up), spec).unwrap();
            let gd = grad_loss(&x, &at(&dn), spec).unwrap();
            for i in 0..p {
                fd_h[(i, j)] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        let value = loss_at(&x, &at(&xi), spec).unwrap();
        let want = oracle_loss(x.coords(), &xi, spec) + oracle_shift(spec);
        worst_v = worst_v.max((value - want).abs() / want.abs().max(1.0));
        let gscale = norm(&g).max(1e-300);
        let gerr = norm(&g.iter().zip(&fd_g).map(|(a, b)| a - b).collect::<Vec<_>>()) / gscale;
        let herr = (&hmat - &fd_h).norm() / hmat.norm().max(1e-300);
        worst_g = worst_g.max(gerr);
        worst_h = worst_h.max(herr);
    }
    verdict(
        worst_g < 1e-6 && worst_h < 1e-5 && worst_v < 1e-12,
        format!("100 configurations, max relative gradient gap {worst_g:.2e}, Hessian gap {worst_h:.2e}, loss value gap {worst_v:.2e}"),
    )
}

// 3 ------------------------------------------------------------------------

fn limits() -> Verdict {
    let mut rng = rng_for(3, 0);
    let mut worst_grad = 0.0f64;
    for p in [2usize, 3, 5] {
        for _ in 0..10 {
            let kappa = 0.5 + 20.0 * rng.random::<f64>();
            let xi = NaturalParam::new(random_unit(p, &mut rng).into_iter().map(|m| kappa * m).collect()).unwrap();
            let x = SpherePoint::new(random_unit(p, &mut rng)).unwrap();
            let kl = grad_loss(&x, &xi, LossSpec::Kl).unwrap();
            for spec in [LossSpec::Dpd { alpha: 1e-6 }, LossSpec::Gamma { gamma: 1e-6 }] {
                let g = grad_loss(&x, &xi, spec).unwrap();
                for (a, b) in g.iter().zip(&kl) {
                    worst_grad = worst_grad.max((a - b).abs());
                }
            }
        }
    }
    let mut worst_info = 0.0f64;
    let mut worst_are = 0.0f64;
    for (p, kappa) in [(2usize, 5.0), (3, 1.0), (5, 20.0)] {
        let mut v = vec![0.0; p];
        v[0] = kappa * 0.6;
        v[1] = kappa * 0.8;
        let xi = NaturalParam::new(v).unwrap();
        let base = asymptotics::info_matrices(&xi, LossSpec::Kl).unwrap();
        for spec in [LossSpec::Dpd { alpha: 1e-8 }, LossSpec::Gamma { gamma: 1e-8 }] {
            let m = asymptotics::info_matrices(&xi, spec).unwrap();
            worst_info = worst_info
                .max((&m.i - &base.i).norm() / base.i.norm())
                .max((&m.j - &base.j).norm() / base.j.norm());
            worst_are = worst_are.max((asymptotics::are(spec, &xi).unwrap() - 1.0).abs());
        }
    }
    verdict(
        worst_grad < 1e-4 && worst_info < 1e-6 && worst_are < 1e-6,
        format!("max score gap {worst_grad:.2e}, info-matrix gap {worst_info:.2e}, |ARE - 1| {worst_are:.2e}"),
    )
}

// 4 ------------------------------------------------------------------------

fn info_oracle() -> Verdict {
    let cases: [(usize, f64, LossSpec); 5] = [
        (2, 5.0, LossSpec::Dpd { alpha: 0.3 }),
        (3, 2.0, LossSpec::Gamma { gamma: 0.5 }),
        (5, 10.0, LossSpec::Dpd { alpha: 0.15 }),
        (2, 1.0, LossSpec::Kl),
        (3, 20.0, LossSpec::Gamma { gamma: 1.0 }),
    ];
    let draws = 1_000_000usize;
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for (c, &(p, kappa, spec)) in cases.iter().enumerate() {
        let mut rng = rng_for(44, c as u64);
        let mu = random_unit(p, &mut rng);
        let xi = NaturalParam::new(mu.iter().map(|m| kappa * m).collect()).unwrap();
        let pair = asymptotics::info_matrices(&xi, spec).unwrap();
        let sampler = VmfSampler::new(&xi);
        let k = p * p;
        let (mut s_i, mut ss_i, mut s_j, mut ss_j) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for _ in 0..draws {
            let x = sampler.draw(&mut rng);
            let g = grad_loss(&x, &xi, spec).unwrap();
            let h = hessian_loss(&x, &xi, spec).unwrap();
            for a in 0..p {
                for b in 0..p {
                    let gi = g[a] * g[b];
                    let hj = h[(a, b)];
                    s_i[a * p + b] += gi;
                    ss_i[a * p + b] += gi * gi;
                    s_j[a * p + b] += hj;
                    ss_j[a * p + b] += hj * hj;
                }
            }
        }
        let nf = draws as f64;
        let mut case_worst = 0.0f64;
        for a in 0..p {
            for b in 0..p {
                for (s, ss, want) in [(&s_i, &ss_i, pair.i[(a, b)]), (&s_j, &ss_j, pair.j[(a, b)])] {
                    let mean = s[a * p + b] / nf;
                    let var = (ss[a * p + b] / nf - mean * mean).max(0.0);
                    // the KL Hessian does not depend on x; its only spread is the
                    // rounding of a running sum of 10^6 terms
                    let se = (var / nf).sqrt().max(nf * f64::EPSILON * want.abs()).max(1e-15);
                    case_worst = case_worst.max((mean - want).abs() / se);
                }
            }
        }
        notes.push(format!("p={p} {spec}: {case_worst:.2}"));
        worst = worst.max(case_worst);
    }
    verdict(
        worst < 4.0,
        format!("10^6 draws per case, max |MC - closed form| in standard errors: {}", notes.join(", ")),
    )
}

// 5 ------------------------------------------------------------------------

fn quadrature() -> Verdict {
    let mut rng = rng_for(5, 0);
    let d2 = Dimension::new(2).unwrap();
    let lk = |k: f64| log_k(d2, k).unwrap();
    let grid = 20_000;
    let step = std::f64::consts::TAU / grid as f64;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let xi: Vec<f64> = (0..2).map(|_| 8.0 * rng.random::<f64>() - 4.0).collect();
        let eta: Vec<f64> = (0..2).map(|_| 8.0 * rng.random::<f64>() - 4.0).collect();
        let alpha = 0.05 + rng.random::<f64>();
        let gamma = 0.05 + rng.random::<f64>();
        let (lk_xi, lk_eta) = (lk(norm(&xi)), lk(norm(&eta)));
        let integrate = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
            (0..grid).map(|j| {
                let t = j as f64 * step;
                f(&[t.cos(), t.sin()])
            }).sum::<f64>() * step
        };
        let dot = |a: &[f64], b: &[f64]| a[0] * b[0] + a[1] * b[1];
        let shifted = |t: f64| norm(&[t * xi[0] + eta[0], t * xi[1] + eta[1]]);
        let q1 = integrate(&|x| ((1.0 + alpha) * (dot(&xi, x) - lk_xi)).exp());
        let c1 = (lk((1.0 + alpha) * norm(&xi)) - (1.0 + alpha) * lk_xi).exp();
        let q2 = integrate(&|x| (gamma * (dot(&xi, x) - lk_xi) + dot(&eta, x) - lk_eta).exp());
        let c2 = (lk(shifted(gamma)) - lk_eta - gamma * lk_xi).exp();
        let q3 = integrate(&|x| (alpha * (dot(&xi, x) - lk_xi) + dot(&eta, x) - lk_eta).exp());
        let c3 = (lk(shifted(alpha)) - lk_eta - alpha * lk_xi).exp();
        for (q, c) in [(q1, c1), (q2, c2), (q3, c3)] {
            worst = worst.max((q - c).abs());
        }
    }
    verdict(worst < 1e-7, format!("10 random configurations, max |quadrature - closed form| {worst:.2e}"))
}

// 6 ------------------------------------------------------------------------

fn wbb_asymptotics() -> Verdict {
    let n = 2000;
    let m = 1000;
    let xi0 = NaturalParam::new(vec![2.0, -1.0, 1.5]).unwrap();
    let data = vmf::sample(&xi0, n, &mut rng_for(66, 0)).unwrap();
    let hat = wbb::point_estimate(&data, LossSpec::Kl).unwrap();
    let draws = wbb::wbb_sample(&data, LossSpec::Kl, &PriorSpec::Uniform, m, 7).unwrap();
    let rows: Vec<&[f64]> = draws.converged().collect();
    let p = 3;
    let mf = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in &rows {
        for j in 0..p {
            mean[j] += r[j] / mf;
        }
    }
    // covariance of t = √n (ξ − ξ̂)
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for r in &rows {
        for a in 0..p {
            for b in 0..p {
                cov[(a, b)] += n as f64 * (r[a] - mean[a]) * (r[b] - mean[b]) / (mf - 1.0);
            }
        }
    }
    let j = asymptotics::info_matrices(&hat, LossSpec::Kl).unwrap().j;
    let jinv = j.try_inverse().unwrap();
    let rel = (&cov - &jinv).norm() / jinv.norm();
    // posterior SE is the posterior standard deviation; the Monte Carlo SE of
    // the mean is reported too, where O(1/n) bootstrap bias becomes visible
    let (mut worst_post, mut worst_mc) = (0.0f64, 0.0f64);
    for a in 0..p {
        let post_se = (cov[(a, a)] / n as f64).sqrt();
        let gap = (mean[a] - hat.as_slice()[a]).abs();
        worst_post = worst_post.max(gap / post_se);
        worst_mc = worst_mc.max(gap / (post_se / mf.sqrt()));
    }
    verdict(
        rel < 0.15 && worst_post < 3.0,
        format!(
            "covariance gap {:.1}% (Frobenius, vs J^-1); posterior mean - estimate at most {worst_post:.3} posterior SE ({worst_mc:.2} Monte Carlo SE)",
            100.0 * rel
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn robustness_ordering() -> Verdict {
    let truth = NaturalParam::new(vec![20.0, 0.0]).unwrap();
    let dpd = TuningKind::Dpd.spec(asymptotics::select_tuning(TuningKind::Dpd, &truth, 0.95).unwrap());
    let gam = TuningKind::Gamma.spec(asymptotics::select_tuning(TuningKind::Gamma, &truth, 0.95).unwrap());
    let losses = vec![LossSpec::Kl, dpd, gam];
    let study = |n: usize, eps: f64| {
        let mut c = SimConfig::new(truth.clone(), eps, losses.clone(), 7070);
        c.n = n;
        c.contamination = Contamination::UniformSphere;
        simlab::run_study(&c).unwrap()
    };
    let dirty = study(100, 0.10);
    let k = |t: &simlab::MseTable, s: &LossSpec, m: Metric| t.get(s, m).unwrap();
    let (kl, dp, ga) = (k(&dirty, &losses[0], Metric::Kappa), k(&dirty, &dpd, Metric::Kappa), k(&dirty, &gam, Metric::Kappa));
    let ordering = kl > 2.0 * dp && kl > 2.0 * ga;
    let small = study(100, 0.0);
    let large = study(400, 0.0);
    let mut consistent = true;
    let mut worst = String::new();
    for s in &losses {
        for m in [Metric::Xi, Metric::Mu, Metric::Kappa] {
            let (a, b) = (k(&small, s, m), k(&large, s, m));
            if b >= a {
                consistent = false;
                worst = format!("; {s} {m} did not shrink ({a:.4} -> {b:.4})");
            }
        }
    }
    verdict(
        ordering && consistent,
        format!(
            "kappa = 20, {dpd}, {gam}: MSE_kappa KL {kl:.2}, DPD {dp:.2} (ratio {:.1}), gamma {ga:.2} (ratio {:.1}); clean MSEs shrink from n = 100 to 400: {consistent}{worst}",
            kl / dp,
            kl / ga
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn fit_args(data: &Path, format: InputFormat, header: bool, losses: Vec<LossRequest>, draws: usize) -> FitArgs {
    FitArgs {
        input: DataArgs { data: Some(data.to_path_buf()), format, header },
        losses,
        prior: PriorKind::Uniform,
        prior_lambda: 1.0,
        prior_mean: None,
        prior_scale: 10.0,
        draws,
        seed: 2001,
        level: 0.95,
        out: Some(std::env::temp_dir().join(format!("robvmf-acceptance-{}.json", std::process::id()))),
        draws_out: None,
    }
}

fn wind() -> Verdict {
    let path = common::fixture("wind.csv");
    if !path.exists() {
        return Verdict::NotEvaluated("wind fixture missing".into());
    }
    let losses = ["kl", "dpd:auto", "gamma:auto"].map(|s| s.parse().unwrap()).to_vec();
    let doc = cli::cmd_fit(&fit_args(&path, InputFormat::AnglesRadians, true, losses, 1000), false).unwrap();
    let targets = [(0.29, 1.78, (0.20, 0.39)), (0.17, 2.99, (0.10, 0.25)), (0.16, 3.69, (0.09, 0.24))];
    let mut ok = true;
    let mut parts = Vec::new();
    for (fit, (angle, kappa, ci)) in doc["fits"].as_array().unwrap().iter().zip(targets) {
        let s = &fit["summary"];
        let a = s["mean_angle"].as_f64().unwrap();
        let k = s["mean_kappa"].as_f64().unwrap();
        let lo = s["angle_ci"][0].as_f64().unwrap();
        let hi = s["angle_ci"][1].as_f64().unwrap();
        let good_a = common::angle_gap(a, angle) <= 0.02;
        let good_k = (k - kappa).abs() <= 0.1 * kappa;
        let good_ci = lo <= ci.1 && hi >= ci.0;
        ok &= good_a && good_k && good_ci;
        parts.push(format!(
            "{}: angle {a:.3} (want {angle}{}) kappa {k:.2} (want {kappa}{}) CI ({lo:.2}, {hi:.2}){}",
            fit["loss"].as_str().unwrap(),
            if good_a { "" } else { ", MISS" },
            if good_k { "" } else { ", MISS" },
            if good_ci { "" } else { " no overlap" },
        ));
    }
    let _ = std::fs::remove_file(std::env::temp_dir().join(format!("robvmf-acceptance-{}.json", std::process::id())));
    verdict(ok, parts.join("; "))
}

// 9 ------------------------------------------------------------------------

fn gene() -> Verdict {
    let path = common::fixture("gene_expression.csv");
    if !path.exists() {
        return Verdict::NotEvaluated("tests/fixtures/gene_expression.csv is not shipped (see tests/fixtures/README.md)".into());
    }
    let losses = ["kl", "dpd:0.15", "gamma:0.15"].map(|s| s.parse().unwrap()).to_vec();
    let doc = cli::cmd_fit(&fit_args(&path, InputFormat::RawRowsNormalize, false, losses, 1000), false).unwrap();
    let fits = doc["fits"].as_array().unwrap();
    let kappas: Vec<f64> = fits.iter().map(|f| f["summary"]["mean_kappa"].as_f64().unwrap()).collect();
    let dirs: Vec<Vec<f64>> = fits
        .iter()
        .map(|f| f["summary"]["mean_direction"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect())
        .collect();
    let angle = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0).acos();
    let pairs = [angle(&dirs[0], &dirs[1]), angle(&dirs[0], &dirs[2]), angle(&dirs[1], &dirs[2])];
    let want_k = [3.3450, 177.0471, 159.6273];
    let want_a = [0.1823, 0.1721, 0.1742];
    let ok = kappas.iter().zip(want_k).all(|(k, w)| (k - w).abs() <= 0.1 * w)
        && pairs.iter().zip(want_a).all(|(a, w)| (a - w).abs() <= 0.02);
    verdict(ok, format!("kappa {kappas:.4?} (want {want_k:?}); pair angles {pairs:.4?} (want {want_a:?})"))
}

// 10 -----------------------------------------------------------------------

fn sif_reproduction() -> Verdict {
    let eta = NaturalParam::new(vec![5.0, 0.0]).unwrap();
    let n = 500;
    let data = vmf::sample(&eta, n, &mut rng_for(1010, 0)).unwrap();
    let probes = robustness::probe_circle(36);
    let field = |spec: LossSpec| {
        let draws = wbb::wbb_sample(&data, spec, &PriorSpec::Uniform, 2000, 11).unwrap();
        robustness::sif_field(&draws, &probes, &eta, n).unwrap()
    };
    let max_of = |f: &robustness::SifField| {
        f.sif_norms.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
    };
    let (kl_at, kl_max) = max_of(&field(LossSpec::Kl));
    let (_, dpd_max) = max_of(&field(LossSpec::Dpd { alpha: 0.15 }));
    let (_, gam_max) = max_of(&field(LossSpec::Gamma { gamma: 0.15 }));
    let antipode = 18;
    verdict(
        kl_at == antipode && kl_max > 2.0 * dpd_max && kl_max > 2.0 * gam_max,
        format!(
            "KL max SIF {kl_max:.2} at probe angle {:.3} rad; DPD max {dpd_max:.2} (ratio {:.2}), gamma max {gam_max:.2} (ratio {:.2})",
            probes[kl_at].y.angle(),
            kl_max / dpd_max,
            kl_max / gam_max
        ),
    )
}

// 11 -----------------------------------------------------------------------

fn determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_robvmf");
    let wind = common::fixture("wind.csv");
    let wind = wind.to_str().unwrap();
    let run_all = |threads: &str| -> Vec<(String, Vec<u8>)> {
        let dir = tempfile::tempdir().unwrap();
        let d = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
        let cfg = d("study.json");
        std::fs::write(&cfg, r#"{"true_xi": [4, 0], "n": [40], "epsilon": [0.1], "replications": 4, "wbb_m": 40, "losses": ["kl", "dpd:0.3"]}"#)
            .unwrap();
        let commands: Vec<Vec<String>> = vec![
            vec!["sample", "--xi", "3,-1,2", "--n", "200", "--seed", "5", "--out", &d("sample.csv")],
            vec![
                "fit", "--data", wind, "--format", "angles_radians", "--header", "--loss", "kl", "--loss", "gamma:auto",
                "--draws", "200", "--seed", "9", "--out", &d("fit.json"), "--draws-out", &d("draws.csv"),
            ],
            vec!["tune", "--data", wind, "--format", "angles_radians", "--header", "--kind", "dpd", "--out", &d("tune.json")],
            vec!["sif", "--sample-n", "150", "--eta", "5,0", "--loss", "dpd:0.15", "--draws", "300", "--seed", "3", "--out", &d("sif.csv")],
            vec!["simulate", "--config", &cfg, "--out", &d("mse")],
        ]
        .into_iter()
        .map(|c| c.into_iter().map(String::from).collect())
        .collect();
        for args in &commands {
            let status = Command::new(exe).args(args).args(["--no-timing", "--threads", threads]).status().unwrap();
            assert!(status.success(), "{args:?} failed");
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        // the manifests echo the temporary paths, which differ between runs
        files
            .into_iter()
            .map(|(name, bytes)| {
                let text = String::from_utf8(bytes).unwrap().replace(dir.path().to_str().unwrap(), "<dir>");
                (name, text.into_bytes())
            })
            .collect()
    };
    let a = run_all("1");
    let b = run_all("1");
    let c = run_all("4");
    let same = a == b && a == c;
    let differing: Vec<&str> =
        a.iter().zip(&c).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    verdict(
        same,
        format!("{} output files from sample/fit/tune/sif/simulate identical across repeated and 1- vs 4-thread runs{}", a.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }),
    )
}

fn main() {
    let mut suite = Suite { failures: 0 };
    suite.run(1, "special functions", secs(5), special_functions);
    suite.run(2, "loss derivatives", secs(10), derivatives);
    suite.run(3, "small-tuning limits", secs(10), limits);
    suite.run(4, "information matrices vs Monte Carlo", secs(60), info_oracle);
    suite.run(5, "circle quadrature", secs(5), quadrature);
    suite.run(6, "WBB asymptotics", secs(180), wbb_asymptotics);
    suite.run(7, "contamination study ordering", secs(900), robustness_ordering);
    suite.run(8, "wind data", secs(120), wind);
    suite.run(9, "gene data", secs(300), gene);
    suite.run(10, "SIF field", secs(120), sif_reproduction);
    suite.run(11, "determinism", secs(600), determinism);
    if suite.failures > 0 {
        println!("{} criterion(s) failed", suite.failures);
        std::process::exit(1);
    }
}
