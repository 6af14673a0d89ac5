//! Small banded solvers used by the grid operators and the extension solver.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};

/// Symmetric positive definite matrix in lower band storage, factorized in place.
///
/// `band[i][k]` holds entry `(i, i − k)` for `k ≤ bandwidth`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bw: bandwidth,
            band: vec![0.0; n * (bandwidth + 1)],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, k: usize) -> usize {
        i * (self.bw + 1) + k
    }

    /// Adds `value` to entry `(i, j)` (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        debug_assert!(k <= self.bw, "entry outside band");
        let id = self.idx(r, k);
        self.band[id] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        if k > self.bw {
            0.0
        } else {
            self.band[self.idx(r, k)]
        }
    }

    /// Banded Cholesky `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let bw = self.bw;
        for j in 0..n {
            // diagonal
            let mut d = self.band[self.idx(j, 0)];
            let kmin = j.saturating_sub(bw);
            for k in kmin..j {
                let l = self.band[self.idx(j, j - k)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NonConvergence {
                    what: "banded Cholesky (matrix not positive definite)".into(),
                    iterations: j,
                    residual: d,
                });
            }
            let d = d.sqrt();
            let id = self.idx(j, 0);
            self.band[id] = d;
            let imax = (j + bw).min(n - 1);
            for i in j + 1..=imax {
                let mut v = self.band[self.idx(i, i - j)];
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    v -= self.band[self.idx(i, i - k)] * self.band[self.idx(j, j - k)];
                }
                let id = self.idx(i, i - j);
                self.band[id] = v / d;
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves in place; requires [`factor`](Self::factor) first.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert!(self.factored);
        let n = self.n;
        let bw = self.bw;
        for i in 0..n {
            let mut v = x[i];
            for k in i.saturating_sub(bw)..i {
                v -= self.band[self.idx(i, i - k)] * x[k];
            }
            x[i] = v / self.band[self.idx(i, 0)];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            let kmax = (i + bw).min(n - 1);
            for k in i + 1..=kmax {
                v -= self.band[self.idx(k, k - i)] * x[k];
            }
            x[i] = v / self.band[self.idx(i, 0)];
        }
    }
}

/// Symmetric tridiagonal `LDLᵀ` factorization reused across many right-hand sides.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl SymTridiag {
    /// `diag` has length n, `off` length n − 1 (entries `(i, i+1)`).
    pub fn factor(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        debug_assert_eq!(off.len() + 1, n.max(1));
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            d[i] = diag[i];
            if i > 0 {
                d[i] -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(d[i] > 0.0) {
                return Err(Error::NonConvergence {
                    what: "tridiagonal factorization (matrix not positive definite)".into(),
                    iterations: i,
                    residual: d[i],
                });
            }
            if i + 1 < n {
                l[i] = off[i] / d[i];
            }
        }
        Ok(Self { d, l })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }
}

/// Block tridiagonal system with `d×d` diagonal blocks and scalar multiples
/// of the identity off the diagonal (symmetric coupling `k_i` between blocks
/// `i` and `i+1`), solved by block elimination.
pub fn solve_block_tridiag(
    diag: Vec<DMatrix<f64>>,
    off: &[f64],
    rhs: &mut [DVector<f64>],
) -> Result<()> {
    let n = diag.len();
    debug_assert_eq!(rhs.len(), n);
    debug_assert_eq!(off.len() + 1, n.max(1));
    let mut pivots: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> = Vec::with_capacity(n);
    for (i, mut m) in diag.into_iter().enumerate() {
        if i > 0 {
            let k = off[i - 1];
            let prev = &pivots[i - 1];
            let inv = prev
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("block {} of the Newton system", i - 1)))?;
            m -= inv * (k * k);
            let y = prev
                .solve(&rhs[i - 1])
                .ok_or_else(|| Error::Singular(format!("block {}", i - 1)))?;
            rhs[i] -= y * k;
        }
        pivots.push(m.lu());
    }
    for i in (0..n).rev() {
        let mut r = rhs[i].clone();
        if i + 1 < n {
            r -= &rhs[i + 1] * off[i];
        }
        rhs[i] = pivots[i]
            .solve(&r)
            .ok_or_else(|| Error::Singular(format!("block {i} of the Newton system")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_matches_dense() {
        let n = 12;
        let bw = 3;
        let mut a = BandedSpd::zeros(n, bw);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            a.add(i, i, 10.0 + i as f64);
            dense[(i, i)] += 10.0 + i as f64;
            for k in 1..=bw {
                if i + k < n {
                    let v = -1.0 / (k as f64 + i as f64 * 0.1);
                    a.add(i + k, i, v);
                    dense[(i + k, i)] += v;
                    dense[(i, i + k)] += v;
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        a.factor().unwrap();
        let mut x = rhs.clone();
        a.solve_in_place(&mut x);
        let xd = dense.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn tridiag_solves() {
        let diag = vec![2.0, 3.0, 4.0, 5.0];
        let off = vec![-1.0, 0.5, -0.25];
        let f = SymTridiag::factor(&diag, &off).unwrap();
        let mut x = vec![1.0, 2.0, 3.0, 4.0];
        f.solve_in_place(&mut x);
        // multiply back
        let y: Vec<f64> = (0..4)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += off[i - 1] * x[i - 1];
                }
                if i < 3 {
                    v += off[i] * x[i + 1];
                }
                v
            })
            .collect();
        for (a, b) in y.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn block_tridiag_matches_dense() {
        let (n, d) = (5, 3);
        let mut dense = DMatrix::zeros(n * d, n * d);
        let mut blocks = Vec::new();
        for i in 0..n {
            let b = DMatrix::from_fn(d, d, |r, c| {
                if r == c {
                    6.0 + i as f64
                } else {
                    0.3 * (r as f64 - c as f64 + i as f64).sin()
                }
            });
            dense.view_mut((i * d, i * d), (d, d)).copy_from(&b);
            blocks.push(b);
        }
        let off: Vec<f64> = (0..n - 1).map(|i| -1.0 - 0.1 * i as f64).collect();
        for i in 0..n - 1 {
            for r in 0..d {
                dense[(i * d + r, (i + 1) * d + r)] = off[i];
                dense[((i + 1) * d + r, i * d + r)] = off[i];
            }
        }
        let rhs: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_fn(d, |r, _| (i * d + r) as f64 * 0.5 - 2.0))
            .collect();
        let flat = DVector::from_iterator(n * d, rhs.iter().flat_map(|v| v.iter().copied()));
        let exact = dense.lu().solve(&flat).unwrap();
        let mut x = rhs.clone();
        solve_block_tridiag(blocks, &off, &mut x).unwrap();
        for i in 0..n {
            for r in 0..d {
                assert!((x[i][r] - exact[i * d + r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        assert!(SymTridiag::factor(&[1.0, -1.0], &[0.0]).is_err());
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.factor().is_err());
    }
}
