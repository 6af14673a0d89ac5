//! Independent oracles and property checkers: spectral calculus for
//! matrices, the Bessel solution of the scalar extension, a brute-force
//! solver for small discrete problems, and the complete-contraction test.

mod bessel;
mod brute;
mod complete;
mod spectral;

use std::path::Path;

use serde::Serialize;

pub use bessel::{
    bessel_k, bessel_k_scaled, bessel_ode_residual, bessel_ode_transport, bessel_scalar_extension,
    frac_constant, BesselValue,
};
pub use brute::{brute_force_bvp, BruteForceSolution};
pub use complete::{
    check_complete_contraction, check_map_complete_contraction, sample_pairs,
    CompleteContractionReport, MarginRecord, NormalContraction,
};
pub use spectral::spectral_frac_power;

use crate::error::Result;

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub instances: usize,
    /// Smallest `tolerance − error` (or `bound − measured`) over the instances.
    pub worst_margin: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Record for errors that must stay below `tolerance`.
    pub fn from_errors(check: &str, errors: &[f64], tolerance: f64) -> Self {
        let worst = errors.iter().fold(f64::NEG_INFINITY, |m, e| m.max(*e));
        let worst_margin = if errors.is_empty() {
            tolerance
        } else {
            tolerance - worst
        };
        Self {
            check: check.to_string(),
            instances: errors.len(),
            worst_margin,
            pass: worst_margin >= 0.0 && errors.iter().all(|e| e.is_finite()),
        }
    }

    pub fn from_margin(check: &str, instances: usize, worst_margin: f64, pass: bool) -> Self {
        Self {
            check: check.to_string(),
            instances,
            worst_margin,
            pass,
        }
    }
}

pub fn write_report(path: &Path, records: &[CheckRecord]) -> Result<()> {
    let text = serde_json::to_string_pretty(records)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
