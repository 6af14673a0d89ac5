use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `V diag(λ_i^s) Vᵀ` for a symmetric positive-semidefinite `M`.
pub fn spectral_frac_power(m: &DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::param("M", "must be square and nonempty"));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::param("s", format!("must be nonnegative, got {s}")));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::param("M", format!("asymmetry {asym:.3e}")));
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.min() < -1e-10 * scale {
        return Err(Error::param("M", "not positive semidefinite"));
    }
    let d = eig.eigenvalues.map(|l| {
        if l <= 0.0 {
            if s == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            l.powf(s)
        }
    });
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&d) * v.transpose())
}
