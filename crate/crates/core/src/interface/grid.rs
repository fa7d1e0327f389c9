use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bem::{BoundarySpace, DensitySolution, PotentialEvaluator, WaveContext};
use crate::error::{Error, Result};
use crate::geometry::MultipatchSurface;
use crate::quadrature::gauss_legendre_unit;

type C = Complex64;

/// Chebyshev-Gauss-Lobatto points of degree `d` on `[0, 1]`.
pub fn cgl_nodes(d: usize) -> Vec<f64> {
    (0..=d).map(|a| 0.5 * (1.0 - (PI * a as f64 / d as f64).cos())).collect()
}

/// Lagrange basis of `nodes` at `x`.
pub fn lagrange(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| (x - xj) / (nodes[i] - xj)).product()
        })
        .collect()
}

/// Interpolation and quadrature data of the artificial interface.
///
/// Every patch is split into `splits x splits` parametric tiles, each carrying a
/// tensor grid of Chebyshev-Gauss-Lobatto nodes; the Cauchy data are
/// interpolated by tensor polynomials on these nodes and integrated with
/// tensor Gauss rules on a uniform grid of sub-cells per tile.
#[derive(Clone, Debug)]
pub struct InterfaceGrid {
    surface: MultipatchSurface<f64>,
    m: usize,
    splits: usize,
    nodes_1d: Vec<f64>,
    /// Node positions and unit normals, index `tile * m^2 + a * m + b` with
    /// `tile = (patch * splits + i) * splits + j`.
    pub x: Vec<[f64; 3]>,
    pub normal: Vec<[f64; 3]>,
    /// Quadrature per tile: points, normals, weights times measure.
    qx: Vec<Vec<[f64; 3]>>,
    qn: Vec<Vec<[f64; 3]>>,
    qw: Vec<Vec<f64>>,
    /// Lagrange values at the 1D quadrature abscissae, row-major `nq1 x m`.
    lag: Vec<f64>,
    nq1: usize,
    lo: [f64; 3],
    hi: [f64; 3],
    /// Largest diameter of a quadrature sub-cell.
    pub cell_diameter: f64,
}

impl InterfaceGrid {
    /// `degree + 1` nodes per direction on each of `splits^2` tiles per patch,
    /// `subcells^2` sub-cells per tile with Gauss order `order` each.
    pub fn new(surface: &MultipatchSurface<f64>, degree: usize, splits: usize, subcells: usize, order: usize) -> Result<Self> {
        if degree < 1 || splits < 1 || subcells < 1 || order < 1 {
            return Err(Error::Domain("interface grid parameters must be positive".into()));
        }
        let m = degree + 1;
        let nodes_1d = cgl_nodes(degree);
        let ht = 1.0 / splits as f64;
        let tile = |k: usize, t: f64| (k as f64 + t) * ht;
        let mut x = Vec::new();
        let mut normal = Vec::new();
        for p in 0..surface.len() {
            for i in 0..splits {
                for j in 0..splits {
                    for &u in &nodes_1d {
                        for &v in &nodes_1d {
                            let (u, v) = (tile(i, u), tile(j, v));
                            let (n, _) = surface.surface_frame(p, u, v)?;
                            x.push(surface.patch(p).eval(u, v));
                            normal.push(n);
                        }
                    }
                }
            }
        }
        let (g, w) = gauss_legendre_unit::<f64>(order);
        let h = 1.0 / subcells as f64;
        let mut q1 = Vec::new();
        for c in 0..subcells {
            for (k, &gk) in g.iter().enumerate() {
                q1.push(((c as f64 + gk) * h, w[k] * h));
            }
        }
        let nq1 = q1.len();
        let mut lag = Vec::with_capacity(nq1 * m);
        for &(t, _) in &q1 {
            lag.extend(lagrange(&nodes_1d, t));
        }
        let (mut qx, mut qn, mut qw) = (Vec::new(), Vec::new(), Vec::new());
        for p in 0..surface.len() {
            for i in 0..splits {
                for j in 0..splits {
                    let (mut px, mut pn, mut pw) = (Vec::new(), Vec::new(), Vec::new());
                    for &(u, wu) in &q1 {
                        for &(v, wv) in &q1 {
                            let (u, v) = (tile(i, u), tile(j, v));
                            let (n, meas) = surface.surface_frame(p, u, v)?;
                            px.push(surface.patch(p).eval(u, v));
                            pn.push(n);
                            pw.push(wu * wv * ht * ht * meas);
                        }
                    }
                    qx.push(px);
                    qn.push(pn);
                    qw.push(pw);
                }
            }
        }
        let mut diam: f64 = 0.0;
        let hc = ht * h;
        let cells = splits * subcells;
        for i in 0..surface.len() {
            for a in 0..cells {
                for b in 0..cells {
                    let p = surface.patch(i);
                    let c = [(a, b), (a + 1, b), (a, b + 1), (a + 1, b + 1)].map(|(s, t)| p.eval(s as f64 * hc, t as f64 * hc));
                    for (k, ck) in c.iter().enumerate() {
                        for cl in &c[k + 1..] {
                            let d = ((ck[0] - cl[0]).powi(2) + (ck[1] - cl[1]).powi(2) + (ck[2] - cl[2]).powi(2)).sqrt();
                            diam = diam.max(d);
                        }
                    }
                }
            }
        }
        let (lo, hi) = surface.control_bbox();
        Ok(Self { surface: surface.clone(), m, splits, nodes_1d, x, normal, qx, qn, qw, lag, nq1, lo, hi, cell_diameter: diam })
    }

    /// Default grid: degree 6 nodes on 2 x 2 tiles per patch, 2 x 2 sub-cells
    /// of Gauss order 8 per tile.
    pub fn standard(surface: &MultipatchSurface<f64>) -> Result<Self> {
        Self::new(surface, 6, 2, 2, 8)
    }

    pub fn surface(&self) -> &MultipatchSurface<f64> {
        &self.surface
    }

    pub fn nodes_per_patch(&self) -> usize {
        self.m * self.m * self.splits * self.splits
    }

    pub fn tiles(&self) -> usize {
        self.qx.len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Node index closest to the parametric centre of each patch.
    pub fn midpoints(&self) -> Vec<usize> {
        let s = self.splits;
        let (tile, a) = if s % 2 == 1 { (s / 2, self.m / 2) } else { (s / 2, 0) };
        (0..self.surface.len())
            .map(|p| ((p * s + tile) * s + tile) * self.m * self.m + a * self.m + a)
            .collect()
    }

    /// Rejects surfaces whose control points are not strictly inside the
    /// bounding box of the interface with a margin of `1e-3`.
    pub fn check_enclosure(&self, surface: &MultipatchSurface<f64>) -> Result<()> {
        let (lo, hi) = surface.control_bbox();
        for c in 0..3 {
            if !(lo[c] > self.lo[c] + 1e-3 && hi[c] < self.hi[c] - 1e-3) {
                return Err(Error::SampleRejected(format!(
                    "surface leaves the interface box in direction {c}: [{:.4}, {:.4}] vs [{:.4}, {:.4}]",
                    lo[c], hi[c], self.lo[c], self.hi[c]
                )));
            }
        }
        Ok(())
    }

    /// Requires `x` outside the interface box by at least one sub-cell diameter.
    pub fn check_exterior(&self, x: [f64; 3]) -> Result<()> {
        let mut d2 = 0.0;
        for c in 0..3 {
            let e = (self.lo[c] - x[c]).max(x[c] - self.hi[c]).max(0.0);
            d2 += e * e;
        }
        if d2.sqrt() < self.cell_diameter {
            return Err(Error::Domain(format!(
                "point {x:?} is inside or within one element diameter ({:.3}) of the interface",
                self.cell_diameter
            )));
        }
        Ok(())
    }

    /// Vectors `alpha, beta` with `u_s(x) = alpha . u - beta . du/dn` for
    /// nodal Cauchy data `u, du/dn` on the interface.
    pub fn representation(&self, ctx: &WaveContext, x: [f64; 3]) -> Result<(Vec<C>, Vec<C>)> {
        self.check_exterior(x)?;
        let (m, nq) = (self.m, self.nq1);
        let mut alpha = vec![C::new(0.0, 0.0); self.len()];
        let mut beta = vec![C::new(0.0, 0.0); self.len()];
        let mut ta = vec![C::new(0.0, 0.0); nq * m];
        let mut tb = vec![C::new(0.0, 0.0); nq * m];
        for i in 0..self.tiles() {
            ta.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
            tb.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
            let (px, pn, pw) = (&self.qx[i], &self.qn[i], &self.qw[i]);
            // contract the v direction first
            for qu in 0..nq {
                for qv in 0..nq {
                    let k = qu * nq + qv;
                    let z = px[k];
                    let d = [z[0] - x[0], z[1] - x[1], z[2] - x[2]];
                    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    let e = C::from_polar(1.0, ctx.kappa * r) / (4.0 * PI * r);
                    let dl = e * C::new(-1.0, ctx.kappa * r) / (r * r) * (d[0] * pn[k][0] + d[1] * pn[k][1] + d[2] * pn[k][2]);
                    let lv = &self.lag[qv * m..(qv + 1) * m];
                    for b in 0..m {
                        ta[qu * m + b] += dl * (pw[k] * lv[b]);
                        tb[qu * m + b] += e * (pw[k] * lv[b]);
                    }
                }
            }
            let off = i * m * m;
            for qu in 0..nq {
                let lu = &self.lag[qu * m..(qu + 1) * m];
                for a in 0..m {
                    for b in 0..m {
                        alpha[off + a * m + b] += ta[qu * m + b] * lu[a];
                        beta[off + a * m + b] += tb[qu * m + b] * lu[a];
                    }
                }
            }
        }
        Ok((alpha, beta))
    }

    /// Interpolated Cauchy data at the parameter point `(u, v)` of `patch`.
    pub fn interpolate(&self, data: &InterfaceCauchyData, patch: usize, u: f64, v: f64) -> (C, C) {
        let s = self.splits as f64;
        let (i, j) = (((u * s) as usize).min(self.splits - 1), ((v * s) as usize).min(self.splits - 1));
        let (u, v) = (u * s - i as f64, v * s - j as f64);
        let (lu, lv) = (lagrange(&self.nodes_1d, u), lagrange(&self.nodes_1d, v));
        let off = ((patch * self.splits + i) * self.splits + j) * self.m * self.m;
        let (mut a, mut b) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        for i in 0..self.m {
            for j in 0..self.m {
                let w = lu[i] * lv[j];
                a += data.u[off + i * self.m + j] * w;
                b += data.dn[off + i * self.m + j] * w;
            }
        }
        (a, b)
    }
}

/// Nodal values of `u_s` and `du_s/dn` on the interface.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceCauchyData {
    pub u: Vec<C>,
    pub dn: Vec<C>,
}

impl InterfaceCauchyData {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![C::new(0.0, 0.0); n], dn: vec![C::new(0.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Concatenation `[u, du/dn]`.
    pub fn to_vec(&self) -> Vec<C> {
        let mut v = self.u.clone();
        v.extend_from_slice(&self.dn);
        v
    }

    pub fn from_vec(v: &[C]) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: v.len() + 1, found: v.len() });
        }
        let n = v.len() / 2;
        Ok(Self { u: v[..n].to_vec(), dn: v[n..].to_vec() })
    }

    pub fn scaled(&self, a: C) -> Self {
        Self { u: self.u.iter().map(|z| z * a).collect(), dn: self.dn.iter().map(|z| z * a).collect() }
    }
}

/// Evaluates the Cauchy data of a scattered field at all interface nodes.
pub fn sample_cauchy_with(evaluator: &PotentialEvaluator<'_>, grid: &InterfaceGrid) -> InterfaceCauchyData {
    let vals: Vec<(C, C)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (u, dn) = evaluator.cauchy(grid.x[i], Some(grid.normal[i]));
            (u.value, dn.value)
        })
        .collect();
    InterfaceCauchyData { u: vals.iter().map(|v| v.0).collect(), dn: vals.iter().map(|v| v.1).collect() }
}

/// Cauchy data on the interface of the field radiated by `density`, after
/// checking that the scatterer is enclosed.
pub fn sample_cauchy(
    density: &DensitySolution,
    space: &BoundarySpace,
    ctx: &WaveContext,
    grid: &InterfaceGrid,
) -> Result<InterfaceCauchyData> {
    grid.check_enclosure(space.surface())?;
    let ev = PotentialEvaluator::new(space, density, ctx)?;
    Ok(sample_cauchy_with(&ev, grid))
}

/// Exterior field from interface Cauchy data by the representation formula
/// `u_s(x) = int_T dPhi(x, z)/dn_z u_s(z) - Phi(x, z) du_s/dn(z) dsigma_z`.
pub fn eval_from_interface(data: &InterfaceCauchyData, grid: &InterfaceGrid, ctx: &WaveContext, x: [f64; 3]) -> Result<C> {
    if data.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: data.len() });
    }
    let (a, b) = grid.representation(ctx, x)?;
    Ok(a.iter().zip(&data.u).map(|(p, q)| p * q).sum::<C>() - b.iter().zip(&data.dn).map(|(p, q)| p * q).sum::<C>())
}
