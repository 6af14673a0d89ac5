//! Finite-dimensional Hilbert-space primitives and weighted norms on grids.
//!
//! Points of the state space are plain [`nalgebra::DVector`]s; every
//! binary operation checks dimensions and returns an error on mismatch.
//! A [`GridFunction`] attaches one state vector to each node of a
//! one-dimensional grid (an extension-variable mesh or its image in `t`).
//!
//! The weighted norms are the Haar-measure norms
//!
//! ```text
//! ‖z^w f‖_{L²_*} = ( ∫₀^∞ ‖z^w f(z)‖² dz/z )^{1/2}
//! ```
//!
//! evaluated with the trapezoidal rule in `log z`, with an analytic first
//! cell when the grid starts at zero.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A point of the finite-dimensional state space.
pub type HVector = DVector<f64>;

pub fn check_dim(a: &HVector, b: &HVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn check_finite(v: &HVector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Euclidean inner product with dimension checking.
pub fn inner(a: &HVector, b: &HVector) -> Result<f64> {
    check_dim(a, b)?;
    Ok(a.dot(b))
}

pub fn norm(a: &HVector) -> f64 {
    a.norm()
}

/// Distance `‖a − b‖`.
pub fn dist(a: &HVector, b: &HVector) -> Result<f64> {
    check_dim(a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Values of a state-space valued function at the nodes of a 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<HVector>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<HVector>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: nodes.len(),
                found: values.len(),
            });
        }
        if nodes.is_empty() {
            return Err(Error::param(
                "nodes",
                "grid function needs at least one node",
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("nodes", "grid must be strictly increasing"));
        }
        let dim = values[0].len();
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            check_finite(v, "grid function value")?;
        }
        Ok(Self { nodes, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(nodes: Vec<f64>, mut f: impl FnMut(f64) -> HVector) -> Result<Self> {
        let values = nodes.iter().map(|&z| f(z)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[HVector] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Largest node-wise distance to another function on the same grid.
    pub fn max_dist(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let mut worst = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            worst = worst.max(dist(a, b)?);
        }
        Ok(worst)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.nodes.len() != other.nodes.len()
            || self
                .nodes
                .iter()
                .zip(&other.nodes)
                .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
        {
            return Err(Error::MeshMismatch(
                "grid functions live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// `‖z^w f‖_{L²_*}` by trapezoidal quadrature in `log z`.
///
/// A grid starting at `z₀ = 0` has its first cell treated separately:
/// trapezoid in `z` when the integrand `z^{2w−1}‖f‖²` is bounded, otherwise
/// the exact integral of `z^{2w−1}` against the cell-averaged `‖f‖²`.
pub fn weighted_l2_star_norm(f: &GridFunction, weight_exponent: f64) -> Result<f64> {
    Ok(weighted_l2_star_sq(f, weight_exponent)?.sqrt())
}

pub(crate) fn weighted_l2_star_sq(f: &GridFunction, w: f64) -> Result<f64> {
    let z = f.nodes();
    let sq: Vec<f64> = f.values().iter().map(|v| v.norm_squared()).collect();
    if z.len() < 2 || sq.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    if z[0] < 0.0 {
        return Err(Error::param(
            "nodes",
            "Haar-measure grids must be nonnegative",
        ));
    }
    let mut total = 0.0;
    let mut start = 0;
    if z[0] == 0.0 {
        let z1 = z[1];
        let e = 2.0 * w - 1.0;
        total += if e > 0.0 {
            0.5 * z1.powf(e) * sq[1] * z1
        } else if e == 0.0 {
            0.5 * (sq[0] + sq[1]) * z1
        } else if w > 0.0 {
            z1.powf(2.0 * w) / (2.0 * w) * 0.5 * (sq[0] + sq[1])
        } else if sq[0] == 0.0 && w > -1.0 {
            // f vanishes at the origin: integrate assuming linear growth.
            z1.powf(2.0 * w) / (2.0 * w + 2.0) * sq[1]
        } else {
            return Err(Error::Singular(format!(
                "weight exponent {w} with nonzero value at z = 0"
            )));
        };
        start = 1;
    }
    for i in start..z.len() - 1 {
        let g0 = z[i].powf(2.0 * w) * sq[i];
        let g1 = z[i + 1].powf(2.0 * w) * sq[i + 1];
        total += 0.5 * (g0 + g1) * (z[i + 1] / z[i]).ln();
    }
    Ok(total)
}

/// Mixed-weight first-order norm `(‖z^{w1} f‖² + ‖z^{w2} f′‖²)^{1/2}`.
pub fn sobolev_mixed_norm(f: &GridFunction, df: &GridFunction, w1: f64, w2: f64) -> Result<f64> {
    f.check_same_grid(df)?;
    Ok((weighted_l2_star_sq(f, w1)? + weighted_l2_star_sq(df, w2)?).sqrt())
}
