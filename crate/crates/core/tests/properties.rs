//! Invariants checked on random inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;
use robvmf::asymptotics::{are, info_matrices};
use robvmf::losses::{grad_loss, hessian_loss, loss_at};
use robvmf::vmf::VmfSampler;
use robvmf::{rng_for, LossSpec, NaturalParam, SpherePoint};

fn spec_strategy() -> impl Strategy<Value = LossSpec> {
    prop_oneof![
        Just(LossSpec::Kl),
        (0.01f64..2.0).prop_map(|alpha| LossSpec::Dpd { alpha }),
        (0.01f64..2.0).prop_map(|gamma| LossSpec::Gamma { gamma }),
    ]
}

fn xi_strategy() -> impl Strategy<Value = Vec<f64>> {
    (2usize..6).prop_flat_map(|p| prop::collection::vec(-15.0f64..15.0, p)).prop_filter("nonzero", |v| {
        v.iter().map(|x| x * x).sum::<f64>() > 1e-2
    })
}

/// Rotation in the plane of the first two coordinates.
fn rotate(v: &[f64], theta: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    out[0] = theta.cos() * v[0] - theta.sin() * v[1];
    out[1] = theta.sin() * v[0] + theta.cos() * v[1];
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hessian_is_symmetric(xi in xi_strategy(), spec in spec_strategy(), seed in any::<u64>()) {
        let xi = NaturalParam::new(xi).unwrap();
        let x = VmfSampler::new(&NaturalParam::zeros(xi.dim())).draw(&mut rng_for(seed, 0));
        let h = hessian_loss(&x, &xi, spec).unwrap();
        prop_assert!((&h - h.transpose()).norm() <= 1e-12 * h.norm().max(1.0));
    }

    #[test]
    fn loss_is_rotation_invariant(xi in xi_strategy(), spec in spec_strategy(), seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
        let x = VmfSampler::new(&NaturalParam::zeros(xi.len())).draw(&mut rng_for(seed, 1));
        let a = loss_at(&x, &NaturalParam::new(xi.clone()).unwrap(), spec).unwrap();
        let rx = SpherePoint::normalized(rotate(x.coords(), theta)).unwrap();
        let b = loss_at(&rx, &NaturalParam::new(rotate(&xi, theta)).unwrap(), spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        // and the gradient rotates with it
        let g = grad_loss(&x, &NaturalParam::new(xi.clone()).unwrap(), spec).unwrap();
        let rg = grad_loss(&rx, &NaturalParam::new(rotate(&xi, theta)).unwrap(), spec).unwrap();
        let want = rotate(&g, theta);
        for (u, v) in rg.iter().zip(&want) {
            prop_assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn information_matrices_are_positive_definite(xi in xi_strategy(), spec in spec_strategy()) {
        let xi = NaturalParam::new(xi).unwrap();
        let pair = info_matrices(&xi, spec).unwrap();
        for m in [&pair.i, &pair.j] {
            let eig = m.clone().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e > 0.0));
        }
    }

    #[test]
    fn are_never_exceeds_one(xi in xi_strategy(), spec in spec_strategy()) {
        let xi = NaturalParam::new(xi).unwrap();
        let e = are(spec, &xi).unwrap();
        prop_assert!(e > 0.0 && e <= 1.0 + 1e-12, "ARE {}", e);
    }

    #[test]
    fn sampler_draws_unit_vectors(xi in xi_strategy(), seed in any::<u64>()) {
        let s = VmfSampler::new(&NaturalParam::new(xi.clone()).unwrap());
        let mut rng = rng_for(seed, 0);
        for _ in 0..20 {
            let x = s.draw(&mut rng);
            let r: f64 = x.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_requests_round_trip(t in 0.001f64..10.0, kind in 0usize..3) {
        use robvmf::cli::LossRequest;
        let s = match kind { 0 => "kl".to_string(), 1 => format!("dpd:{t}"), _ => format!("gamma:{t}") };
        let r: LossRequest = s.parse().unwrap();
        prop_assert_eq!(r.to_string().parse::<LossRequest>().unwrap(), r);
    }
}

#[test]
fn kl_information_is_the_fisher_information() {
    // J = I for the KL loss at the model
    let xi = NaturalParam::new(vec![1.0, 2.0, 2.0]).unwrap();
    let pair = info_matrices(&xi, LossSpec::Kl).unwrap();
    let d: DMatrix<f64> = &pair.i - &pair.j;
    assert_eq!(d.norm(), 0.0);
}
