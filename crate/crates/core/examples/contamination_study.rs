//! A small contamination study: MSE of the WBB posterior mean under
//! uniform outliers.
//!
//! `cargo run --release --example contamination_study`

use robvmf::simlab::{run_study, Contamination, Metric, SimConfig};
use robvmf::{LossSpec, NaturalParam};

fn main() -> robvmf::Result<()> {
    let truth = NaturalParam::new(vec![10.0, 0.0])?;
    let losses = vec![LossSpec::Kl, LossSpec::dpd(0.3)?, LossSpec::gamma(0.3)?];
    println!("{:>5} {:<10} {:>9} {:>9} {:>9}", "eps", "loss", "xi", "mu", "kappa");
    for eps in [0.0, 0.1] {
        let mut config = SimConfig::new(truth.clone(), eps, losses.clone(), 11);
        config.replications = 20;
        config.wbb_m = 100;
        config.contamination = Contamination::UniformSphere;
        let table = run_study(&config)?;
        for spec in &losses {
            let get = |m| table.get(spec, m).unwrap_or(f64::NAN);
            println!(
                "{eps:>5} {:<10} {:>9.4} {:>9.4} {:>9.4}",
                spec.to_string(),
                get(Metric::Xi),
                get(Metric::Mu),
                get(Metric::Kappa)
            );
        }
    }
    Ok(())
}
