use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::kernel::MatrixKernel;
use super::space::{SpaceQuadrature, SplineSpace};

/// Low-rank factor `L` (`n x m`) with `C ~ L L^T`.
#[derive(Clone, Debug)]
pub struct LowRankFactor {
    pub l: DMatrix<f64>,
    /// Initial trace of the factored matrix.
    pub trace: f64,
    /// Remaining diagonal l1 mass after each pivot.
    pub residuals: Vec<f64>,
}

impl LowRankFactor {
    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(self.trace)
    }
}

/// Greedy diagonally pivoted Cholesky of an implicitly given symmetric
/// positive semidefinite `n x n` matrix. Stops once the remaining diagonal
/// mass drops to `tol * trace`.
pub fn pivoted_cholesky_with(
    n: usize,
    mut diag: Vec<f64>,
    mut column: impl FnMut(usize) -> Vec<f64>,
    tol: f64,
) -> Result<LowRankFactor> {
    let trace: f64 = diag.iter().sum();
    let bound = 1e-12 * trace.abs();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; n];
    let mut residuals = Vec::new();
    let mut err: f64 = diag.iter().map(|d| d.abs()).sum();
    while err > tol * trace && cols.len() < n {
        let mut piv = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for (i, &d) in diag.iter().enumerate() {
            if !used[i] && d > best {
                best = d;
                piv = i;
            }
        }
        if best <= 0.0 {
            break;
        }
        let c = column(piv);
        let s = best.sqrt();
        let mut l = c;
        for prev in &cols {
            let f = prev[piv];
            for (li, pi) in l.iter_mut().zip(prev) {
                *li -= f * pi;
            }
        }
        for v in l.iter_mut() {
            *v /= s;
        }
        used[piv] = true;
        for i in 0..n {
            diag[i] = if used[i] { 0.0 } else { diag[i] - l[i] * l[i] };
            if diag[i] < -bound {
                return Err(Error::KernelNotPositive { pivot: diag[i], bound });
            }
        }
        cols.push(l);
        err = diag.iter().map(|d| d.abs()).sum();
        residuals.push(err);
    }
    let m = cols.len();
    let l = DMatrix::from_fn(n, m, |i, j| cols[j][i]);
    Ok(LowRankFactor { l, trace, residuals })
}

/// Implicit covariance Galerkin matrix on the vector-valued shape functions:
/// entry `((l, c), (l', c'))` is `int int phi_l(x) k_cc'(x, x') phi_l'(x')`.
pub struct ShapeCovariance<'a> {
    kernel: &'a MatrixKernel,
    q: SpaceQuadrature,
    support: Vec<Vec<(usize, f64)>>,
}

impl<'a> ShapeCovariance<'a> {
    pub fn new(kernel: &'a MatrixKernel, space: &SplineSpace, order: usize) -> Result<Self> {
        let q = space.quadrature(order)?;
        let mut support = vec![Vec::new(); space.n_local()];
        for k in 0..q.len() {
            for a in 0..q.nb {
                let v = q.basis[k * q.nb + a];
                if v != 0.0 {
                    support[q.local[k * q.nb + a]].push((k, v * q.w[k]));
                }
            }
        }
        Ok(Self { kernel, q, support })
    }

    pub fn size(&self) -> usize {
        3 * self.support.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.size());
        for s in &self.support {
            let mut acc = [0.0; 3];
            for &(a, wa) in s {
                for &(b, wb) in s {
                    let k = self.kernel.eval(self.q.x[a], self.q.x[b]);
                    for c in 0..3 {
                        acc[c] += wa * k[c][c] * wb;
                    }
                }
            }
            d.extend_from_slice(&acc);
        }
        d
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let (lj, cj) = (j / 3, j % 3);
        let sup = &self.support[lj];
        let kernel = self.kernel;
        let xs = &self.q.x;
        let v: Vec<[f64; 3]> = xs
            .par_iter()
            .with_min_len(64)
            .map(|&x| {
                let mut acc = [0.0; 3];
                for &(b, wb) in sup {
                    let k = kernel.eval(x, xs[b]);
                    for c in 0..3 {
                        acc[c] += k[c][cj] * wb;
                    }
                }
                acc
            })
            .collect();
        let mut col = vec![0.0; self.size()];
        for (k, vk) in v.iter().enumerate() {
            for a in 0..self.q.nb {
                let f = self.q.w[k] * self.q.basis[k * self.q.nb + a];
                let l = self.q.local[k * self.q.nb + a];
                for c in 0..3 {
                    col[3 * l + c] += f * vk[c];
                }
            }
        }
        col
    }

    /// Dense matrix, for small test problems.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let c = self.column(j);
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }
}

/// Pivoted Cholesky on the shape-function covariance, mapped to the global
/// basis of `space` by summing identified shape functions (`L = T L_*`).
pub fn pivoted_cholesky(kernel: &MatrixKernel, space: &SplineSpace, tol: f64) -> Result<LowRankFactor> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain(format!("Cholesky tolerance {tol} outside (0, 1)")));
    }
    let cov = ShapeCovariance::new(kernel, space, space.degree() + 2)?;
    let f = pivoted_cholesky_with(cov.size(), cov.diagonal(), |j| cov.column(j), tol)?;
    Ok(LowRankFactor { l: to_global(space, &f.l), trace: f.trace, residuals: f.residuals })
}

/// Applies the local-to-global summation `T` to a vector-valued shape-function matrix.
pub fn to_global(space: &SplineSpace, l_local: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(3 * space.dim(), l_local.ncols());
    for loc in 0..space.n_local() {
        let g = space.global_index(loc);
        for c in 0..3 {
            for j in 0..l_local.ncols() {
                out[(3 * g + c, j)] += l_local[(3 * loc + c, j)];
            }
        }
    }
    out
}
