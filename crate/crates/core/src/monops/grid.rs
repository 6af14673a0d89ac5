//! Discrete Leray–Lions operators `−div a(x, ∇u)` on structured 1D/2D grids.
//!
//! Unknowns sit at grid nodes with spacing `h`; each edge carries the flux
//! `a(x_e, d·e)·e` of the difference quotient `d` along its axis, so the
//! operator is a sum of monotone edge terms and its Jacobian is a
//! symmetric banded matrix.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MonotoneOp, INNER_TOL};
use crate::error::{Error, Result};
use crate::hilbert::HVector;
use crate::linalg::BandedSpd;

/// Smoothing of `|ξ|^{p−2}` inside Newton Jacobians.
const FLUX_EPS: f64 = 1e-12;
const NEWTON_MAX: usize = 200;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum FluxKind {
    /// `a(x, ξ) = |ξ|^{p−2} ξ`.
    PLaplace,
    /// `a(x, ξ) = c(x) |ξ|^{p−2} ξ` with `c ≥ η`.
    Weighted(ScalarField),
    /// Arbitrary flux `a(x, ξ)`; its edge derivative is taken by finite differences.
    General(VectorField),
}

impl fmt::Debug for FluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxKind::PLaplace => write!(f, "PLaplace"),
            FluxKind::Weighted(_) => write!(f, "Weighted(<fn>)"),
            FluxKind::General(_) => write!(f, "General(<fn>)"),
        }
    }
}

#[derive(Clone)]
pub enum LateralBc {
    /// Zero values beyond the grid.
    Dirichlet,
    /// Zero flux through the boundary; acts on all of `ℝⁿ` and preserves the mean.
    Neumann,
    /// Zero flux, restricted to mean-zero vectors.
    NeumannMeanZero,
    /// `a·ν + b(x)|u|^{p−2}u = 0` on the boundary faces, `b ≥ 0`.
    Robin(ScalarField),
}

impl fmt::Debug for LateralBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LateralBc::Dirichlet => write!(f, "Dirichlet"),
            LateralBc::Neumann => write!(f, "Neumann"),
            LateralBc::NeumannMeanZero => write!(f, "NeumannMeanZero"),
            LateralBc::Robin(_) => write!(f, "Robin(<fn>)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LerayLionsField {
    pub p: f64,
    pub eta: f64,
    pub flux: FluxKind,
    pub lateral_bc: LateralBc,
}

/// Worst sampled margins of the structure conditions of a flux.
#[derive(Debug, Clone, Copy)]
pub struct StructureMargins {
    /// `min (a(x,ξ)·ξ − η|ξ|^p)`.
    pub coercivity: f64,
    /// `min (a(x,ξ₁) − a(x,ξ₂))·(ξ₁ − ξ₂)` over `ξ₁ ≠ ξ₂`.
    pub monotonicity: f64,
}

impl LerayLionsField {
    pub fn p_laplace(p: f64, lateral_bc: LateralBc) -> Self {
        Self {
            p,
            eta: 1.0,
            flux: FluxKind::PLaplace,
            lateral_bc,
        }
    }

    pub fn flux(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        match &self.flux {
            FluxKind::PLaplace => power_flux(self.p, 1.0, xi),
            FluxKind::Weighted(c) => power_flux(self.p, c(x), xi),
            FluxKind::General(a) => a(x, xi),
        }
    }

    /// Samples the coercivity and monotonicity conditions at `count` random points of `[0, extent]^dim`.
    pub fn sample_structure(
        &self,
        dim: usize,
        extent: f64,
        count: usize,
        seed: u64,
    ) -> StructureMargins {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coercivity = f64::INFINITY;
        let mut monotonicity = f64::INFINITY;
        for _ in 0..count {
            let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * extent).collect();
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fa = self.flux(&x, &a);
            let fb = self.flux(&x, &b);
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            coercivity = coercivity.min(dot(&fa, &a) - self.eta * na.powf(self.p));
            let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
            let df: Vec<f64> = fa.iter().zip(&fb).map(|(u, v)| u - v).collect();
            if diff.iter().any(|v| *v != 0.0) {
                monotonicity = monotonicity.min(dot(&df, &diff));
            }
        }
        StructureMargins {
            coercivity,
            monotonicity,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|d|^{p−2} d`, zero at the origin.
/// `(d² + δ²)^{(p−2)/2} d`, which is `|d|^{p−2} d` at `δ = 0`.
fn smoothed_power(p: f64, d: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        signed_power(p, d)
    } else {
        (d * d + delta * delta).powf(0.5 * (p - 2.0)) * d
    }
}

/// Derivative of [`smoothed_power`] in `d`.
fn smoothed_slope(p: f64, d: f64, delta: f64) -> f64 {
    let r2 = d * d + delta * delta;
    r2.powf(0.5 * (p - 4.0)) * ((p - 1.0) * d * d + delta * delta)
}

fn signed_power(p: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d.abs().powf(p - 2.0) * d
    }
}

fn power_flux(p: f64, c: f64, xi: &[f64]) -> Vec<f64> {
    let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return vec![0.0; xi.len()];
    }
    let k = c * n.powf(p - 2.0);
    xi.iter().map(|v| k * v).collect()
}

/// Structured grid: `shape` has one or two entries, `spacing` is `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub spacing: f64,
}

impl GridSpec {
    pub fn line(n: usize, spacing: f64) -> Self {
        Self {
            shape: vec![n],
            spacing,
        }
    }

    pub fn rect(nx: usize, ny: usize, spacing: f64) -> Self {
        Self {
            shape: vec![nx, ny],
            spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
struct Edge {
    minus: Option<usize>,
    plus: Option<usize>,
    x: Vec<f64>,
    axis: usize,
}

#[derive(Debug, Clone)]
struct Face {
    node: usize,
    /// `b(x_face)/h`.
    coef: f64,
}

/// Discrete `−div a(x, ∇u)` with a lateral boundary condition.
#[derive(Debug, Clone)]
pub struct GridOperator {
    field: LerayLionsField,
    grid: GridSpec,
    edges: Vec<Edge>,
    faces: Vec<Face>,
    bandwidth: usize,
}

pub fn make_plap_grid(field: LerayLionsField, grid: GridSpec) -> Result<GridOperator> {
    if !(field.p > 1.0) || !field.p.is_finite() {
        return Err(Error::param("p", format!("must exceed 1, got {}", field.p)));
    }
    if !(field.eta > 0.0) {
        return Err(Error::param(
            "eta",
            format!("must be positive, got {}", field.eta),
        ));
    }
    if grid.shape.is_empty() || grid.shape.len() > 2 || grid.shape.iter().any(|&n| n == 0) {
        return Err(Error::param(
            "grid",
            "shape must have one or two positive entries",
        ));
    }
    if grid.len() < 2 {
        return Err(Error::param("grid", "at least 2 nodes required"));
    }
    if !(grid.spacing > 0.0) || !grid.spacing.is_finite() {
        return Err(Error::param("grid.spacing", "must be positive"));
    }
    let h = grid.spacing;
    let dirichlet = matches!(field.lateral_bc, LateralBc::Dirichlet);
    let nx = grid.shape[0];
    let ny = if grid.shape.len() == 2 {
        grid.shape[1]
    } else {
        1
    };
    let two_d = grid.shape.len() == 2;
    // Dirichlet grids store interior nodes at (j+1)h; the others are cell centred at (j+½)h.
    let offset = if dirichlet { 1.0 } else { 0.5 };
    let coord = |j: f64| (j + offset) * h;
    let index = |ix: usize, iy: usize| iy * nx + ix;
    let point = |fx: f64, fy: f64| {
        if two_d {
            vec![coord(fx), coord(fy)]
        } else {
            vec![coord(fx)]
        }
    };

    let mut edges = Vec::new();
    let mut faces = Vec::new();
    for (axis, (n_along, n_across)) in [(nx, ny), (ny, nx)]
        .into_iter()
        .enumerate()
        .take(grid.shape.len())
    {
        for k in 0..n_across {
            let node = |j: usize| if axis == 0 { index(j, k) } else { index(k, j) };
            let mid = |j: f64| {
                if axis == 0 {
                    point(j, k as f64)
                } else {
                    point(k as f64, j)
                }
            };
            for j in 0..n_along.saturating_sub(1) {
                edges.push(Edge {
                    minus: Some(node(j)),
                    plus: Some(node(j + 1)),
                    x: mid(j as f64 + 0.5),
                    axis,
                });
            }
            match &field.lateral_bc {
                LateralBc::Dirichlet => {
                    edges.push(Edge {
                        minus: None,
                        plus: Some(node(0)),
                        x: mid(-0.5),
                        axis,
                    });
                    edges.push(Edge {
                        minus: Some(node(n_along - 1)),
                        plus: None,
                        x: mid(n_along as f64 - 0.5),
                        axis,
                    });
                }
                LateralBc::Robin(b) => {
                    for (j, xf) in [(0, -0.5), (n_along - 1, n_along as f64 - 0.5)] {
                        let bv = b(&mid(xf));
                        if !(bv >= 0.0) || !bv.is_finite() {
                            return Err(Error::param(
                                "b",
                                format!("Robin coefficient must be nonnegative, got {bv}"),
                            ));
                        }
                        faces.push(Face {
                            node: node(j),
                            coef: bv / h,
                        });
                    }
                }
                LateralBc::Neumann | LateralBc::NeumannMeanZero => {}
            }
        }
    }
    if let FluxKind::Weighted(c) = &field.flux {
        for e in &edges {
            let cv = c(&e.x);
            if !(cv >= field.eta) || !cv.is_finite() {
                return Err(Error::param(
                    "weight",
                    format!("c(x) = {cv} below eta = {}", field.eta),
                ));
            }
        }
    }
    Ok(GridOperator {
        bandwidth: if two_d { nx } else { 1 },
        field,
        grid,
        edges,
        faces,
    })
}

impl GridOperator {
    pub fn field(&self) -> &LerayLionsField {
        &self.field
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn mean_zero(&self) -> bool {
        matches!(self.field.lateral_bc, LateralBc::NeumannMeanZero)
    }

    fn project(&self, u: &HVector) -> HVector {
        if self.mean_zero() {
            let m = u.mean();
            u.add_scalar(-m)
        } else {
            u.clone()
        }
    }

    fn diff(&self, e: &Edge, u: &HVector) -> f64 {
        let up = e.plus.map_or(0.0, |i| u[i]);
        let um = e.minus.map_or(0.0, |i| u[i]);
        (up - um) / self.grid.spacing
    }

    /// Edge flux `a(x_e, d·e_axis)·e_axis`; power fluxes use `|ξ|^{p−2}`
    /// smoothed to `(ξ² + δ²)^{(p−2)/2}`.
    fn edge_flux(&self, e: &Edge, d: f64, delta: f64) -> f64 {
        let p = self.field.p;
        match &self.field.flux {
            FluxKind::PLaplace => smoothed_power(p, d, delta),
            FluxKind::Weighted(c) => c(&e.x) * smoothed_power(p, d, delta),
            FluxKind::General(a) => {
                let mut xi = vec![0.0; self.grid.shape.len()];
                xi[e.axis] = d;
                a(&e.x, &xi)[e.axis]
            }
        }
    }

    fn edge_slope(&self, e: &Edge, d: f64, delta: f64) -> f64 {
        let p = self.field.p;
        match &self.field.flux {
            FluxKind::PLaplace => smoothed_slope(p, d, delta),
            FluxKind::Weighted(c) => c(&e.x) * smoothed_slope(p, d, delta),
            FluxKind::General(_) => {
                let step = 1e-6 * (1.0 + d.abs());
                let s = (self.edge_flux(e, d + step, 0.0) - self.edge_flux(e, d - step, 0.0))
                    / (2.0 * step);
                s.max(self.field.eta * FLUX_EPS)
            }
        }
    }

    fn apply(&self, u: &HVector) -> HVector {
        self.apply_smoothed(u, 0.0)
    }

    fn apply_smoothed(&self, u: &HVector, delta: f64) -> HVector {
        let h = self.grid.spacing;
        let mut out = DVector::zeros(u.len());
        for e in &self.edges {
            let f = self.edge_flux(e, self.diff(e, u), delta) / h;
            if let Some(i) = e.minus {
                out[i] -= f;
            }
            if let Some(i) = e.plus {
                out[i] += f;
            }
        }
        for face in &self.faces {
            out[face.node] += face.coef * smoothed_power(self.field.p, u[face.node], delta);
        }
        out
    }

    /// Jacobian of `u + μA_δu`, where `A_δ` is the smoothed operator.
    fn jacobian(&self, mu: f64, u: &HVector, delta: f64) -> BandedSpd {
        let n = u.len();
        let h2 = self.grid.spacing * self.grid.spacing;
        let mut jac = BandedSpd::zeros(n, self.bandwidth);
        for i in 0..n {
            jac.add(i, i, 1.0);
        }
        for e in &self.edges {
            let k = mu * self.edge_slope(e, self.diff(e, u), delta) / h2;
            if let Some(i) = e.minus {
                jac.add(i, i, k);
            }
            if let Some(j) = e.plus {
                jac.add(j, j, k);
            }
            if let (Some(i), Some(j)) = (e.minus, e.plus) {
                jac.add(i, j, -k);
            }
        }
        let p = self.field.p;
        for face in &self.faces {
            let x = u[face.node];
            let k = face.coef * smoothed_slope(p, x, delta);
            jac.add(face.node, face.node, mu * k);
        }
        jac
    }

    /// Potential of `A_δ`, when the flux is a gradient.
    fn energy(&self, u: &HVector, delta: f64) -> Option<f64> {
        let p = self.field.p;
        let pot = |x: f64| (x * x + delta * delta).powf(0.5 * p) - delta.powf(p);
        let edges = match &self.field.flux {
            FluxKind::PLaplace => self.edges.iter().map(|e| pot(self.diff(e, u))).sum::<f64>(),
            FluxKind::Weighted(c) => self
                .edges
                .iter()
                .map(|e| c(&e.x) * pot(self.diff(e, u)))
                .sum::<f64>(),
            FluxKind::General(_) => return None,
        };
        let faces: f64 = self.faces.iter().map(|f| f.coef * pot(u[f.node])).sum();
        Some((edges + faces) / p)
    }

    /// Damped Newton on `u + μA_δu = w` from `u`. Steps are accepted on Armijo
    /// decrease of `½‖u − w‖² + μΦ_δ(u)` when `A = ∇Φ`, or on decrease of the
    /// residual norm. Returns the last iterate and its residual.
    fn damped_newton(
        &self,
        mu: f64,
        w: &HVector,
        mut u: HVector,
        delta: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<(HVector, f64)> {
        let residual = |u: &HVector| -> HVector { u + self.apply_smoothed(u, delta) * mu - w };
        let merit = |u: &HVector| {
            self.energy(u, delta)
                .map(|phi| 0.5 * (u - w).norm_squared() + mu * phi)
        };
        let mut g = residual(&u);
        let mut gn = g.norm();
        let mut e = merit(&u);
        let mut stalls = 0;
        for _ in 0..max_iter {
            if gn <= tol {
                break;
            }
            let mut jac = self.jacobian(mu, &u, delta.max(FLUX_EPS));
            jac.factor()?;
            let mut step: Vec<f64> = g.iter().copied().collect();
            jac.solve_in_place(&mut step);
            let step = DVector::from_vec(step);
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &u - &step * t;
                let gc = residual(&cand);
                let gcn = gc.norm();
                let ec = merit(&cand);
                let armijo = matches!((e, ec), (Some(e0), Some(e1)) if e1 <= e0 - 1e-4 * t * slope);
                if armijo || gcn <= (1.0 - 1e-4 * t) * gn || gcn <= tol {
                    stalls = if gcn > 0.9 * gn { stalls + 1 } else { 0 };
                    e = ec;
                    u = cand;
                    g = gc;
                    gn = gcn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || stalls > 20 {
                break;
            }
        }
        Ok((u, gn))
    }

    /// Size of `μ(A_δu)` changes caused by perturbing each difference quotient
    /// by a few units in the last place: the best residual attainable at `u`.
    fn rounding_floor(&self, mu: f64, u: &HVector, delta: f64) -> f64 {
        let h = self.grid.spacing;
        let ulp = 4.0 * f64::EPSILON;
        let mut out = DVector::<f64>::zeros(u.len());
        for e in &self.edges {
            let up = e.plus.map_or(0.0, |i| u[i]);
            let um = e.minus.map_or(0.0, |i| u[i]);
            let d = (up - um) / h;
            let dd = ulp * (up.abs() + um.abs()) / h + ulp * d.abs();
            let f = self.edge_flux(e, d, delta);
            let df = (self.edge_flux(e, d + dd, delta) - f)
                .abs()
                .max((self.edge_flux(e, d - dd, delta) - f).abs())
                / h;
            for i in [e.minus, e.plus].into_iter().flatten() {
                out[i] += df;
            }
        }
        for f in &self.faces {
            let x = u[f.node];
            let dx = ulp * x.abs();
            out[f.node] += f.coef
                * (smoothed_power(self.field.p, x + dx, delta)
                    - smoothed_power(self.field.p, x - dx, delta))
                .abs();
        }
        mu * out.norm()
    }

    /// Bound on `‖u − J_μw‖` for the smoothed solution `u` with residual `gd`.
    ///
    /// The smoothed fluxes `σ = a_δ(d)` form a dual point whose duality gap is
    /// `½‖gd‖² + μ Σ_e D_e`, where `D_e ≤ (ψ*′(σ_e) − d_e)(σ_e − ψ′(d_e))` is the
    /// Bregman term of the edge (or face) potential `ψ = c|·|^p/p`.
    fn smoothing_error_bound(&self, mu: f64, u: &HVector, delta: f64, gd: f64) -> Option<f64> {
        let p = self.field.p;
        let q = p / (p - 1.0);
        let bregman = |c: f64, d: f64| {
            let sigma = c * smoothed_power(p, d, delta);
            let sigma0 = c * signed_power(p, d);
            ((signed_power(q, sigma / c) - d) * (sigma - sigma0)).max(0.0)
        };
        let edges: f64 = match &self.field.flux {
            FluxKind::PLaplace => self
                .edges
                .iter()
                .map(|e| bregman(1.0, self.diff(e, u)))
                .sum(),
            FluxKind::Weighted(c) => self
                .edges
                .iter()
                .map(|e| bregman(c(&e.x), self.diff(e, u)))
                .sum(),
            FluxKind::General(_) => return None,
        };
        let faces: f64 = self.faces.iter().map(|f| bregman(f.coef, u[f.node])).sum();
        Some((gd * gd + 2.0 * mu * (edges + faces)).sqrt())
    }

    fn newton(&self, mu: f64, w: &HVector) -> Result<HVector> {
        let tol = INNER_TOL * (1.0 + w.norm());
        let mut u = w.clone();
        // For p < 2 the slope is unbounded at ξ = 0 and the residual cannot go
        // below the rounding floor near flat edges. Follow the smoothed
        // problems `u + μA_δu = w` down from the scale of the data, accepting
        // once the duality-gap bound on the distance to `J_μw` is below `tol`
        // or the rounding floor of the smoothed residual.
        if self.field.p < 2.0 && self.energy(w, 0.0).is_some() {
            let delta0 = (w.amax() / self.grid.spacing).max(1.0);
            let mut delta = delta0;
            while delta > 1e-20 * delta0 {
                let (next, gd) = self.damped_newton(mu, w, u, delta, tol, 30)?;
                u = next;
                let exact = (&u + self.apply(&u) * mu - w).norm();
                let bound = self
                    .smoothing_error_bound(mu, &u, delta, gd)
                    .unwrap_or(f64::INFINITY);
                if exact <= tol.max(self.rounding_floor(mu, &u, 0.0))
                    || bound <= tol.max(self.rounding_floor(mu, &u, delta))
                {
                    return Ok(u);
                }
                delta *= 0.1;
            }
        }
        let (u, gn) = self.damped_newton(mu, w, u, 0.0, tol, NEWTON_MAX)?;
        if gn <= tol.max(self.rounding_floor(mu, &u, 0.0)) {
            return Ok(u);
        }
        Err(Error::NonConvergence {
            what: format!("{} resolvent (Newton)", self.label()),
            iterations: NEWTON_MAX,
            residual: gn,
        })
    }
}

impl MonotoneOp for GridOperator {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn label(&self) -> String {
        let shape: Vec<String> = self.grid.shape.iter().map(|n| n.to_string()).collect();
        format!(
            "leray_lions(p={}, {:?}, {:?}, grid={}, h={})",
            self.field.p,
            self.field.flux,
            self.field.lateral_bc,
            shape.join("x"),
            self.grid.spacing
        )
    }

    fn resolvent(&self, mu: f64, w: &HVector) -> Result<HVector> {
        let w = self.project(w);
        let u = self.newton(mu, &w)?;
        Ok(self.project(&u))
    }

    fn direct_eval(&self, u: &HVector) -> Option<HVector> {
        Some(self.apply(u))
    }

    fn zero(&self) -> HVector {
        DVector::zeros(self.dim())
    }

    fn domain_projection(&self, u: &HVector) -> Option<HVector> {
        Some(self.project(u))
    }

    fn is_single_valued(&self) -> bool {
        true
    }
}
