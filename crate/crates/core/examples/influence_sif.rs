//! Influence functions on the circle: the KL field is unbounded in the
//! direction away from the mode while the robust ones stay flat.
//!
//! `cargo run --release --example influence_sif`

use robvmf::robustness::{probe_circle, sif_field};
use robvmf::vmf;
use robvmf::wbb::{self, PriorSpec};
use robvmf::{rng_for, LossSpec, NaturalParam};

fn main() -> robvmf::Result<()> {
    let eta = NaturalParam::new(vec![5.0, 0.0])?;
    let n = 300;
    let data = vmf::sample(&eta, n, &mut rng_for(3, 0))?;
    let probes = probe_circle(12);
    let specs = [LossSpec::Kl, LossSpec::dpd(0.15)?, LossSpec::gamma(0.15)?];
    let mut fields = Vec::new();
    for spec in specs {
        let draws = wbb::wbb_sample(&data, spec, &PriorSpec::Uniform, 400, 9)?;
        fields.push(sif_field(&draws, &probes, &eta, n)?);
    }
    println!("{:>7} {:>9} {:>9} {:>9}", "angle", "KL", "DPD", "gamma");
    for (j, probe) in probes.iter().enumerate() {
        println!(
            "{:>7.3} {:>9.3} {:>9.3} {:>9.3}",
            probe.y.angle(),
            fields[0].sif_norms[j],
            fields[1].sif_norms[j],
            fields[2].sif_norms[j]
        );
    }
    Ok(())
}
