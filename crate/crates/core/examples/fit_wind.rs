//! Posterior summaries for the wind-direction data under KL, DPD and
//! gamma losses, with ARE-chosen tunings.
//!
//! `cargo run --release --example fit_wind`

use std::path::Path;

use robvmf::asymptotics::{select_tuning, TuningKind};
use robvmf::cli::{ingest, InputFormat};
use robvmf::wbb::{self, PriorSpec};
use robvmf::LossSpec;

fn main() -> robvmf::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wind.csv");
    let data = ingest(&path, InputFormat::AnglesRadians, true)?.data;
    let pilot = wbb::point_estimate(&data, LossSpec::Kl)?;
    println!("n = {}, KL point estimate kappa {:.3}", data.n(), pilot.kappa());

    let losses = [
        LossSpec::Kl,
        TuningKind::Dpd.spec(select_tuning(TuningKind::Dpd, &pilot, 0.95)?),
        TuningKind::Gamma.spec(select_tuning(TuningKind::Gamma, &pilot, 0.95)?),
        LossSpec::dpd(0.5)?,
        LossSpec::gamma(0.5)?,
    ];
    println!("{:<14} {:>8} {:>8} {:>18}", "loss", "angle", "kappa", "95% angle CI");
    for spec in losses {
        let draws = wbb::wbb_sample(&data, spec, &PriorSpec::Uniform, 1000, 1)?;
        let s = wbb::summarize(&draws, 0.95)?;
        let (lo, hi) = s.angle_ci.unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:<14} {:>8.3} {:>8.3}   ({lo:.3}, {hi:.3})",
            match spec.tuning() {
                Some(t) => format!("{}:{t:.3}", spec.family()),
                None => spec.to_string(),
            },
            s.mean_angle.unwrap_or(f64::NAN),
            s.mean_kappa
        );
    }
    Ok(())
}
