use num_complex::Complex64;

use crate::bem::WaveContext;
use crate::error::{Error, Result};

use super::grid::{InterfaceCauchyData, InterfaceGrid};

type C = Complex64;

/// Second moment `E[c c^H]` of the stacked interface data `c = [u; du/dn]`,
/// stored densely as a `2n x 2n` row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondMomentData {
    n: usize,
    pub data: Vec<C>,
}

impl SecondMomentData {
    pub fn zeros(nodes: usize) -> Self {
        Self { n: nodes, data: vec![C::new(0.0, 0.0); 4 * nodes * nodes] }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub(crate) fn reset(&mut self, nodes: usize, data: Vec<C>) {
        self.n = nodes;
        self.data = data;
    }

    /// Adds `weight * c c^H`.
    pub fn accumulate(&mut self, c: &InterfaceCauchyData, weight: f64) -> Result<()> {
        if c.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: c.len() });
        }
        let v = c.to_vec();
        let m = 2 * self.n;
        for i in 0..m {
            let a = v[i] * weight;
            let row = &mut self.data[i * m..(i + 1) * m];
            for (r, b) in row.iter_mut().zip(&v) {
                *r += a * b.conj();
            }
        }
        Ok(())
    }

    /// Adds `weight * (a b^H + b a^H) / 2`, the symmetrized cross moment
    /// used by difference estimators.
    pub fn accumulate_cross(&mut self, a: &InterfaceCauchyData, b: &InterfaceCauchyData, weight: f64) -> Result<()> {
        if a.len() != self.n || b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: a.len().min(b.len()) });
        }
        let (va, vb) = (a.to_vec(), b.to_vec());
        let m = 2 * self.n;
        for i in 0..m {
            let row = &mut self.data[i * m..(i + 1) * m];
            for j in 0..m {
                row[j] += (va[i] * vb[j].conj() + vb[i] * va[j].conj()) * (0.5 * weight);
            }
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
        Ok(())
    }

    /// Largest entry of `M - M^H`.
    pub fn hermitian_defect(&self) -> f64 {
        let m = 2 * self.n;
        let mut d: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                d = d.max((self.data[i * m + j] - self.data[j * m + i].conj()).norm());
            }
        }
        d
    }
}

fn bilinear(m: &[C], stride: usize, r0: usize, c0: usize, left: &[C], right: &[C]) -> C {
    let n = left.len();
    let mut acc = C::new(0.0, 0.0);
    for i in 0..n {
        let row = &m[(r0 + i) * stride + c0..(r0 + i) * stride + c0 + n];
        let s: C = row.iter().zip(right).map(|(a, b)| a * b.conj()).sum();
        acc += left[i] * s;
    }
    acc
}

/// Two-point correlation `E[u_s(x) conj(u_s(x'))]` of the exterior field from
/// the interface second moment.
pub fn correlation_at(
    moment: &SecondMomentData,
    grid: &InterfaceGrid,
    ctx: &WaveContext,
    x: [f64; 3],
    xp: [f64; 3],
) -> Result<C> {
    if moment.nodes() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: moment.nodes() });
    }
    let (a, b) = grid.representation(ctx, x)?;
    let (ap, bp) = if x == xp { (a.clone(), b.clone()) } else { grid.representation(ctx, xp)? };
    let (n, s) = (grid.len(), 2 * grid.len());
    let m = &moment.data;
    Ok(bilinear(m, s, 0, 0, &a, &ap) - bilinear(m, s, 0, n, &a, &bp) - bilinear(m, s, n, 0, &b, &ap)
        + bilinear(m, s, n, n, &b, &bp))
}

/// Variance `E|u_s(x)|^2 - |E u_s(x)|^2` from a second moment and a mean.
///
/// Returns the variance and the relative size of the imaginary part that the
/// real quantity acquired through quadrature and sampling error.
pub fn variance_at(
    moment: &SecondMomentData,
    mean: &InterfaceCauchyData,
    grid: &InterfaceGrid,
    ctx: &WaveContext,
    x: [f64; 3],
) -> Result<(f64, f64)> {
    let m2 = correlation_at(moment, grid, ctx, x, x)?;
    let m1 = super::grid::eval_from_interface(mean, grid, ctx, x)?;
    let v = m2 - m1.norm_sqr();
    let scale = m2.norm().max(f64::MIN_POSITIVE);
    Ok((v.re, v.im.abs() / scale))
}
