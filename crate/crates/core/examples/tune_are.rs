//! ARE curves and tuning selection.
//!
//! `cargo run --release --example tune_are`

use robvmf::asymptotics::{are_curve, select_tuning, TuningKind};
use robvmf::NaturalParam;

fn main() -> robvmf::Result<()> {
    let tunings = [0.05, 0.1, 0.2, 0.3, 0.5, 1.0];
    for kappa in [1.0, 5.0, 20.0] {
        let xi = NaturalParam::new(vec![kappa, 0.0, 0.0])?;
        println!("p = 3, kappa = {kappa}");
        for kind in [TuningKind::Dpd, TuningKind::Gamma] {
            let curve = are_curve(kind, &xi, &tunings)?;
            let row: Vec<String> = curve.iter().map(|c| format!("{:.3}", c.are)).collect();
            let pick = select_tuning(kind, &xi, 0.95)?;
            println!("  {kind:?}: ARE at {tunings:?} = [{}]; ARE 0.95 at {pick:.4}", row.join(", "));
        }
    }
    Ok(())
}
