//! Log-scale Bessel functions, the mean resultant length A_p and ln K_p.
//!
//! `cargo run --release --example special_functions`

use robvmf::specfun::{bessel_ratio_a, bessel_ratio_a_prime, log_bessel_i, log_k, BesselOrder, Dimension};

fn main() -> robvmf::Result<()> {
    println!("{:>6} {:>8} {:>22}", "nu", "x", "ln I_nu(x)");
    for nu in [0.0, 0.5, 1.0, 12.5, 50.0] {
        for x in [1e-3, 1.0, 30.0, 1e3] {
            println!("{nu:>6} {x:>8} {:>22.15e}", log_bessel_i(BesselOrder::new(nu)?, x)?);
        }
    }

    println!("\n{:>3} {:>8} {:>12} {:>12} {:>14}", "p", "kappa", "A_p", "A_p'", "ln K_p");
    for p in [2, 3, 10] {
        let d = Dimension::new(p)?;
        for kappa in [0.1, 5.0, 500.0] {
            println!(
                "{p:>3} {kappa:>8} {:>12.8} {:>12.4e} {:>14.8}",
                bessel_ratio_a(d, kappa)?,
                bessel_ratio_a_prime(d, kappa)?,
                log_k(d, kappa)?
            );
        }
    }
    Ok(())
}
