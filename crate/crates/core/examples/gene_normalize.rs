//! Raw expression profiles become unit vectors by centering and scaling each
//! row, so that cosine similarity equals Pearson correlation. A synthetic
//! matrix with a few aberrant profiles stands in for real data here.
//!
//! `cargo run --release --example gene_normalize`

use rand::Rng;
use robvmf::cli::ingest::{ingest_reader, InputFormat};
use robvmf::wbb::{self, PriorSpec};
use robvmf::{rng_for, LossSpec};

fn main() -> robvmf::Result<()> {
    let mut rng = rng_for(8, 0);
    let pattern = [0.0, 1.0, 2.5, 3.0, 2.0, 0.5, -0.5, -1.0];
    let mut csv = String::new();
    for g in 0..200 {
        let row: Vec<String> = pattern
            .iter()
            .enumerate()
            .map(|(k, v)| {
                // every tenth gene follows an unrelated profile
                let base = if g % 10 == 0 { (k as f64 * 1.7).sin() * 3.0 } else { *v };
                format!("{:.4}", 5.0 + base + 0.4 * rng.random::<f64>())
            })
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let data = ingest_reader(csv.as_bytes(), InputFormat::RawRowsNormalize, false)?.data;
    println!("{} profiles on the sphere in R^{}", data.n(), data.p());

    let mut dirs = Vec::new();
    for spec in [LossSpec::Kl, LossSpec::dpd(0.15)?, LossSpec::gamma(0.15)?] {
        let draws = wbb::wbb_sample(&data, spec, &PriorSpec::Uniform, 200, 4)?;
        let s = wbb::summarize(&draws, 0.95)?;
        println!("{spec:<11} kappa {:.2}", s.mean_kappa);
        dirs.push(s.mean_direction.expect("concentrated sample").into_inner());
    }
    let angle = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0).acos();
    println!(
        "angle KL-DPD {:.4}, KL-gamma {:.4}, DPD-gamma {:.4}",
        angle(&dirs[0], &dirs[1]),
        angle(&dirs[0], &dirs[2]),
        angle(&dirs[1], &dirs[2])
    );
    Ok(())
}
