//! Fractional parameters, graded meshes in the extension variable `z`, and
//! the change of variable `z = (t/2s)^{2s}`.

use crate::error::{Error, Result};
use crate::hilbert::GridFunction;

/// The exponent `s` with the derived constants used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    pub s: f64,
    /// `1 − 2s`.
    pub alpha: f64,
    /// `(1 − 2s)/s`, the exponent of the weight in `v″ = z^{(1−2s)/s} A v`.
    pub zexp: f64,
    /// `(1 − s)/(2s)`.
    pub underline_s: f64,
    /// `(3s − 1)/(2s)`.
    pub overline_s: f64,
    /// `(2s)^{1−2s}`, relating `t^{1−2s}u′(t)` to `v′(z)`.
    pub trace_const: f64,
}

impl FracParams {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::param("s", format!("must lie in (0, 1), got {s}")));
        }
        let alpha = 1.0 - 2.0 * s;
        Ok(Self {
            s,
            alpha,
            zexp: alpha / s,
            underline_s: (1.0 - s) / (2.0 * s),
            overline_s: (3.0 * s - 1.0) / (2.0 * s),
            trace_const: if alpha == 0.0 {
                1.0
            } else {
                (2.0 * s).powf(alpha)
            },
        })
    }

    /// `z = (t/2s)^{2s}`.
    pub fn z_of_t(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::param("t", format!("must be nonnegative, got {t}")));
        }
        Ok((t / (2.0 * self.s)).powf(2.0 * self.s))
    }

    /// `t = 2s·z^{1/(2s)}`.
    pub fn t_of_z(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::param("z", format!("must be nonnegative, got {z}")));
        }
        Ok(2.0 * self.s * z.powf(1.0 / (2.0 * self.s)))
    }

    /// `dz/dt` expressed in `z`: `z^{(2s−1)/(2s)}`.
    pub fn dz_dt(&self, z: f64) -> f64 {
        z.powf(-self.alpha / (2.0 * self.s))
    }

    /// Grading exponent `max(2, 1/(2s))`.
    pub fn default_grading(&self) -> f64 {
        f64::max(2.0, 1.0 / (2.0 * self.s))
    }

    /// Truncation radius with `exp(−√λ_min · t(Z)) ≤ 1e−10`.
    pub fn auto_z(&self, lambda_min: f64) -> Result<f64> {
        if !(lambda_min > 0.0) || !lambda_min.is_finite() {
            return Err(Error::param(
                "lambda_min",
                format!("must be positive, got {lambda_min}"),
            ));
        }
        let t = 10.0 * std::f64::consts::LN_10 / lambda_min.sqrt();
        self.z_of_t(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarBc {
    /// `v(Z) = y`, the known zero of the operator.
    DirichletAtZero,
    /// `v′(Z) = 0`.
    HomogeneousNeumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZMesh {
    nodes: Vec<f64>,
    grading: f64,
    pub far_bc: FarBc,
}

/// `z_i = Z (i/N)^γ`, `i = 0..=N`.
pub fn graded_zmesh(n: usize, z_max: f64, grading: f64) -> Result<ZMesh> {
    if n < 8 {
        return Err(Error::param(
            "N",
            format!("at least 8 cells required, got {n}"),
        ));
    }
    if !(z_max > 0.0) || !z_max.is_finite() {
        return Err(Error::param("Z", format!("must be positive, got {z_max}")));
    }
    if !(grading >= 1.0) || !grading.is_finite() {
        return Err(Error::param(
            "grading",
            format!("must be at least 1, got {grading}"),
        ));
    }
    let mut nodes: Vec<f64> = (0..=n)
        .map(|i| z_max * (i as f64 / n as f64).powf(grading))
        .collect();
    nodes[n] = z_max;
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "grading",
            "mesh nodes collapse in floating point",
        ));
    }
    Ok(ZMesh {
        nodes,
        grading,
        far_bc: FarBc::DirichletAtZero,
    })
}

impl ZMesh {
    pub fn with_far_bc(mut self, far_bc: FarBc) -> Self {
        self.far_bc = far_bc;
        self
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn z_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn widths(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Per-cell moments `(∫ z^q ψ_left, ∫ z^q ψ_right)` of the two hat halves on each cell.
    pub fn hat_moments(&self, q: f64) -> Vec<(f64, f64)> {
        self.nodes
            .windows(2)
            .map(|w| hat_moment(q, w[0], w[1]))
            .collect()
    }

    /// Lumped node weights `ω_i = ∫ z^q φ_i dz`.
    pub fn node_weights(&self, q: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (k, (l, r)) in self.hat_moments(q).into_iter().enumerate() {
            w[k] += l;
            w[k + 1] += r;
        }
        w
    }

    /// The image of the nodes under `t = 2s z^{1/(2s)}`.
    pub fn t_nodes(&self, p: &FracParams) -> Vec<f64> {
        self.nodes.iter().map(|&z| p.t_of_z(z).unwrap()).collect()
    }

    pub fn same_as(&self, other: &ZMesh) -> bool {
        self.far_bc == other.far_bc
            && self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * (1.0 + a.abs()))
    }
}

const GAUSS8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn hat_moment(q: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    if a > 0.0 && h / a < 0.5 {
        let (mid, half) = (0.5 * (a + b), 0.5 * h);
        let (mut l, mut r) = (0.0, 0.0);
        for &(x, w) in &GAUSS8 {
            for z in [mid - half * x, mid + half * x] {
                let f = w * half * z.powf(q);
                l += f * (b - z) / h;
                r += f * (z - a) / h;
            }
        }
        return (l, r);
    }
    let i0 = (b.powf(q + 1.0) - a.powf(q + 1.0)) / (q + 1.0);
    let i1 = (b.powf(q + 2.0) - a.powf(q + 2.0)) / (q + 2.0);
    ((b * i0 - i1) / h, (i1 - a * i0) / h)
}

/// Transports `v(z)` to `u(t) = v(z(t))`: same values, nodes mapped to `t`.
pub fn pullback_to_t(p: &FracParams, f: &GridFunction) -> Result<GridFunction> {
    let nodes = f
        .nodes()
        .iter()
        .map(|&z| p.t_of_z(z))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(nodes, f.values().to_vec())
}

/// Transports `v′(z)` to `u′(t) = v′(z)·z^{(2s−1)/(2s)}`.
///
/// For `s < 1/2` the factor is infinite at `z = 0`; that node is then
/// dropped unless `v′` vanishes there.
pub fn pullback_derivative(p: &FracParams, df: &GridFunction) -> Result<GridFunction> {
    let e = -p.alpha / (2.0 * p.s);
    let mut nodes = Vec::with_capacity(df.len());
    let mut values = Vec::with_capacity(df.len());
    for (&z, v) in df.nodes().iter().zip(df.values()) {
        let t = p.t_of_z(z)?;
        if z == 0.0 {
            if e > 0.0 || v.amax() == 0.0 {
                nodes.push(t);
                values.push(v * 0.0);
            } else if e == 0.0 {
                nodes.push(t);
                values.push(v.clone());
            }
            continue;
        }
        nodes.push(t);
        values.push(v * z.powf(e));
    }
    GridFunction::new(nodes, values)
}
