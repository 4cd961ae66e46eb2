//! Draw from a von Mises-Fisher law and recover its parameters.
//!
//! `cargo run --release --example sample_vmf`

use robvmf::vmf::{self, VmfSampler};
use robvmf::{rng_for, NaturalParam, SpherePoint};

fn main() -> robvmf::Result<()> {
    let mu = SpherePoint::normalized(vec![1.0, 2.0, -2.0])?;
    let xi = NaturalParam::from_polar(8.0, &mu)?;
    let mut rng = rng_for(42, 0);

    let data = vmf::sample(&xi, 5000, &mut rng)?;
    let mean = data.mean();
    let rbar = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("n = {}, p = {}, mean resultant length {rbar:.4}", data.n(), data.p());

    let hat = vmf::moment_estimate(&data)?;
    let dir = hat.mean_direction().expect("non-degenerate sample");
    println!("true mu   {:?}", mu.coords());
    println!("fitted mu {:?}", dir.coords());
    println!("true kappa 8, moment estimate {:.3}", hat.kappa());

    // one draw at a time, and the log density at it
    let sampler = VmfSampler::new(&xi);
    let x = sampler.draw(&mut rng);
    println!("draw {:?} has log density {:.4}", x.coords(), vmf::log_density(&x, &xi)?);
    Ok(())
}
