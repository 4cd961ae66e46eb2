//! Closed-form I and J matrices and the sandwich covariance.
//!
//! `cargo run --release --example info_matrices`

use robvmf::asymptotics::{are, info_matrices, sandwich_cov};
use robvmf::{LossSpec, NaturalParam};

fn main() -> robvmf::Result<()> {
    let xi = NaturalParam::new(vec![3.0, 4.0])?;
    for spec in [LossSpec::Kl, LossSpec::dpd(0.3)?, LossSpec::gamma(0.3)?] {
        let pair = info_matrices(&xi, spec)?;
        println!("{spec}");
        println!("  I = {:.5}", pair.i);
        println!("  J = {:.5}", pair.j);
        println!("  J^-1 I J^-1 = {:.5}", sandwich_cov(&xi, spec)?);
        println!("  ARE = {:.5}", are(spec, &xi)?);
    }
    Ok(())
}
