use nalgebra::DMatrix;

use super::{Boundary, ExtensionProblem};
use crate::error::{Error, Result};
use crate::hilbert::HVector;
use crate::mesh::FarBc;

/// Stiffness, lumped mass and load restricted to the free nodes.
#[derive(Debug, Clone)]
pub(crate) struct Discretization {
    /// First free node index.
    pub start: usize,
    pub dirichlet_start: bool,
    pub dirichlet_end: bool,
    /// Diagonal of the stiffness on free nodes, Robin term included.
    pub k_diag: Vec<f64>,
    /// Couplings `(i, i+1)` between consecutive free nodes.
    pub k_off: Vec<f64>,
    pub omega: Vec<f64>,
    /// `d × n_free` load from fixed values and Robin data.
    pub b: DMatrix<f64>,
    pub y: HVector,
    /// Per-cell hat moments `(∫ z^q ψ_left, ∫ z^q ψ_right)`.
    pub moments: Vec<(f64, f64)>,
    /// Cell widths of the full mesh.
    pub h: Vec<f64>,
    pub phi: HVector,
    /// `λ/c` for a Robin row, zero otherwise.
    pub robin: f64,
    pub trace_const: f64,
}

impl Discretization {
    pub fn new(problem: &ExtensionProblem) -> Result<Self> {
        let mesh = &problem.mesh;
        let z = mesh.nodes();
        let n_nodes = z.len();
        let h = mesh.widths();
        let q = problem.params.zexp;
        let c = problem.params.trace_const;
        let moments = mesh.hat_moments(q);
        let omega_all = mesh.node_weights(q);
        let y = problem.op.zero();
        let d = y.len();

        let dirichlet_start = matches!(problem.boundary, Boundary::Dirichlet(_));
        let dirichlet_end = mesh.far_bc == FarBc::DirichletAtZero;
        let start = usize::from(dirichlet_start);
        let end = if dirichlet_end {
            n_nodes - 2
        } else {
            n_nodes - 1
        };
        if end < start {
            return Err(Error::param("mesh", "no free nodes"));
        }
        let n_free = end - start + 1;

        let mut k_diag = vec![0.0; n_free];
        let mut k_off = vec![0.0; n_free - 1];
        let mut omega = vec![0.0; n_free];
        let mut b = DMatrix::zeros(d, n_free);
        for k in 0..n_free {
            let i = start + k;
            if i > 0 {
                k_diag[k] += 1.0 / h[i - 1];
            }
            if i + 1 < n_nodes {
                k_diag[k] += 1.0 / h[i];
            }
            if k + 1 < n_free {
                k_off[k] = -1.0 / h[i];
            }
            omega[k] = omega_all[i];
        }
        match &problem.boundary {
            Boundary::Dirichlet(phi) => {
                let mut col = b.column_mut(0);
                col += phi / h[0];
            }
            Boundary::Robin { lambda, phi } => {
                k_diag[0] += lambda / c;
                let mut col = b.column_mut(0);
                col += phi / c;
            }
        }
        if dirichlet_end {
            let mut col = b.column_mut(n_free - 1);
            col += &y / h[n_nodes - 2];
        }
        if omega.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::param("mesh", "nonpositive node weight"));
        }
        Ok(Self {
            start,
            dirichlet_start,
            dirichlet_end,
            k_diag,
            k_off,
            omega,
            b,
            y,
            moments,
            robin: match &problem.boundary {
                Boundary::Robin { lambda, .. } => lambda / c,
                Boundary::Dirichlet(_) => 0.0,
            },
            phi: problem.phi().clone(),
            h,
            trace_const: c,
        })
    }

    pub fn n_free(&self) -> usize {
        self.omega.len()
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        (node >= self.start && node - self.start < self.n_free()).then(|| node - self.start)
    }

    /// `K v − b`, column per free node, assembled from neighbour differences
    /// so that nearly constant profiles do not cancel.
    pub fn stiffness_residual(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n_free();
        let n_nodes = self.h.len() + 1;
        let mut r = DMatrix::zeros(v.nrows(), n);
        for k in 0..n {
            let i = self.start + k;
            let vi = v.column(k);
            let mut col = r.column_mut(k);
            if i > 0 {
                let inv = 1.0 / self.h[i - 1];
                if k > 0 {
                    col += (vi - v.column(k - 1)) * inv;
                } else {
                    col += (vi - &self.phi) * inv;
                }
            }
            if i + 1 < n_nodes {
                let inv = 1.0 / self.h[i];
                if k + 1 < n {
                    col += (vi - v.column(k + 1)) * inv;
                } else {
                    col += (vi - &self.y) * inv;
                }
            }
            if i == 0 {
                col += (vi * self.robin - &self.phi / self.trace_const).into_owned();
            }
        }
        r
    }

    /// Initial iterate: linear blend from the boundary data to the zero over `[0, Z]`.
    pub fn initial_guess(&self, problem: &ExtensionProblem) -> DMatrix<f64> {
        let z = problem.mesh.nodes();
        let zmax = problem.mesh.z_max();
        let phi = problem.phi();
        let mut v = DMatrix::zeros(self.y.len(), self.n_free());
        for k in 0..self.n_free() {
            let theta = 1.0 - z[self.start + k] / zmax;
            v.set_column(k, &(&self.y + (phi - &self.y) * theta));
        }
        v
    }
}
