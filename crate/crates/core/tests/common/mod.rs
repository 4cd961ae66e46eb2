#![allow(dead_code)]

use std::path::PathBuf;

use robvmf::cli::ingest::{ingest, InputFormat};
use robvmf::Dataset;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn wind() -> Dataset {
    ingest(&fixture("wind.csv"), InputFormat::AnglesRadians, true).expect("wind fixture").data
}

/// Rows of the log-Bessel reference table: (nu, x, ln I_nu(x)).
pub fn bessel_reference() -> Vec<(f64, f64, f64)> {
    let mut r = csv::Reader::from_path(fixture("log_bessel_reference.csv")).expect("bessel fixture");
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].parse().unwrap(), rec[2].parse().unwrap())
        })
        .collect()
}

/// Angle of the shorter arc between two planar angles.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}
