use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{cross3, integration_cells, ElementMesh, KnotVector, MultipatchSurface};
use crate::quadrature::gauss_legendre_unit;
use crate::scalar::dense_solve;

/// Largest Gauss order cached per cell.
pub(crate) const MAX_ORDER: usize = 24;

/// Inverse Vandermonde matrix of the monomials `sigma^k`, `k <= d`, at the
/// Chebyshev points of the first kind on `[-1, 1]`; row-major.
fn monomial_fit(d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = d + 1;
    let nodes: Vec<f64> = (0..n).map(|k| -((PI * (k as f64 + 0.5) / n as f64).cos())).collect();
    let mut vdm = vec![0.0; n * n];
    for (i, &x) in nodes.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..n {
            vdm[i * n + j] = p;
            p *= x;
        }
    }
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    (nodes, dense_solve(n, vdm, eye, n).expect("Chebyshev Vandermonde is regular"))
}

/// Tensor polynomial in `(sigma, tau) = (2s - 1, 2t - 1)` with four
/// homogeneous components `[w x, w y, w z, w]`.
#[derive(Clone, Debug)]
pub(crate) struct CellMap {
    du: usize,
    dv: usize,
    coef: Vec<[f64; 4]>,
}

impl CellMap {
    fn fit(du: usize, dv: usize, f: impl Fn(f64, f64) -> [f64; 4]) -> Self {
        let (nu, iu) = monomial_fit(du);
        let (nv, iv) = monomial_fit(dv);
        let (mu, mv) = (du + 1, dv + 1);
        let mut vals = vec![[0.0; 4]; mu * mv];
        for (a, &x) in nu.iter().enumerate() {
            for (b, &y) in nv.iter().enumerate() {
                vals[a * mv + b] = f(0.5 * (x + 1.0), 0.5 * (y + 1.0));
            }
        }
        // coef = iu * vals * iv^T
        let mut tmp = vec![[0.0; 4]; mu * mv];
        for a in 0..mu {
            for k in 0..mu {
                let f = iu[a * mu + k];
                for b in 0..mv {
                    for c in 0..4 {
                        tmp[a * mv + b][c] += f * vals[k * mv + b][c];
                    }
                }
            }
        }
        let mut coef = vec![[0.0; 4]; mu * mv];
        for a in 0..mu {
            for b in 0..mv {
                for k in 0..mv {
                    let f = iv[b * mv + k];
                    for c in 0..4 {
                        coef[a * mv + b][c] += f * tmp[a * mv + k][c];
                    }
                }
            }
        }
        Self { du, dv, coef }
    }

    /// Point and tangents with respect to the local coordinates `s, t`.
    #[inline]
    pub(crate) fn jet(&self, s: f64, t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (x, y) = (2.0 * s - 1.0, 2.0 * t - 1.0);
        let mv = self.dv + 1;
        let (mut h, mut hs, mut ht) = ([0.0; 4], [0.0; 4], [0.0; 4]);
        for a in (0..=self.du).rev() {
            let row = &self.coef[a * mv..(a + 1) * mv];
            let (mut p, mut dp) = ([0.0; 4], [0.0; 4]);
            for b in (0..mv).rev() {
                for c in 0..4 {
                    dp[c] = dp[c] * y + p[c];
                    p[c] = p[c] * y + row[b][c];
                }
            }
            for c in 0..4 {
                hs[c] = hs[c] * x + h[c];
                h[c] = h[c] * x + p[c];
                ht[c] = ht[c] * x + dp[c];
            }
        }
        let iw = 1.0 / h[3];
        let pt = [h[0] * iw, h[1] * iw, h[2] * iw];
        let mut du = [0.0; 3];
        let mut dv = [0.0; 3];
        for c in 0..3 {
            du[c] = 2.0 * (hs[c] - pt[c] * hs[3]) * iw;
            dv[c] = 2.0 * (ht[c] - pt[c] * ht[3]) * iw;
        }
        (pt, du, dv)
    }
}

/// One-dimensional polynomials in `sigma = 2s - 1`, one coefficient row each.
#[derive(Clone, Debug)]
pub(crate) struct LocalBasis {
    n: usize,
    coef: Vec<f64>,
}

impl LocalBasis {
    fn fit(knots: &KnotVector<f64>, lo: f64, hi: f64) -> (Self, usize) {
        let p = knots.degree();
        let n = p + 1;
        let span = knots.find_span(0.5 * (lo + hi));
        let (nodes, inv) = monomial_fit(p);
        let mut vals = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for (k, &x) in nodes.iter().enumerate() {
            knots.basis_funs(span, lo + 0.5 * (x + 1.0) * (hi - lo), &mut b);
            for j in 0..n {
                vals[k * n + j] = b[j];
            }
        }
        let mut coef = vec![0.0; n * n];
        for j in 0..n {
            for a in 0..n {
                coef[j * n + a] = (0..n).map(|k| inv[a * n + k] * vals[k * n + j]).sum();
            }
        }
        (Self { n, coef }, span - p)
    }

    #[inline]
    fn eval(&self, s: f64, out: &mut [f64]) {
        let x = 2.0 * s - 1.0;
        for j in 0..self.n {
            let row = &self.coef[j * self.n..(j + 1) * self.n];
            let mut v = 0.0;
            for &c in row.iter().rev() {
                v = v * x + c;
            }
            out[j] = v;
        }
    }
}

/// Point data of a cell: position, unit normal, surface measure w.r.t. `ds dt`.
#[derive(Clone, Copy, Debug)]
pub struct CellPoint {
    pub x: [f64; 3],
    pub normal: [f64; 3],
    pub measure: f64,
}

/// Tensor Gauss data of one cell at a fixed order.
#[derive(Clone, Debug)]
pub(crate) struct CellQuad {
    pub x: Vec<[f64; 3]>,
    pub n: Vec<[f64; 3]>,
    /// Gauss weight times surface measure.
    pub w: Vec<f64>,
    /// Basis values, row-major `points x nb`.
    pub basis: Vec<f64>,
}

/// Integration cell: a piece of a mesh element on which the geometry is a
/// single rational polynomial, with its local density basis.
#[derive(Debug)]
pub struct Cell {
    pub patch: usize,
    pub element: usize,
    pub u: (f64, f64),
    pub v: (f64, f64),
    orientation: f64,
    map: CellMap,
    bu: LocalBasis,
    bv: LocalBasis,
    /// Global density indices of the `(p + 1)^2` local functions.
    pub dofs: Vec<usize>,
    /// Vertex ids of the corners `(0,0), (1,0), (0,1), (1,1)`.
    pub corners: [usize; 4],
    pub centre: [f64; 3],
    /// Radius of a ball around `centre` containing the cell.
    pub radius: f64,
    quad: Vec<OnceLock<CellQuad>>,
}

impl Cell {
    pub fn nb(&self) -> usize {
        self.dofs.len()
    }

    #[inline]
    pub fn point(&self, s: f64, t: f64) -> CellPoint {
        let (x, du, dv) = self.map.jet(s, t);
        let c = cross3(du, dv);
        let m = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let f = self.orientation / m;
        CellPoint { x, normal: [c[0] * f, c[1] * f, c[2] * f], measure: m }
    }

    /// Values of the local basis at `(s, t)`, `u`-major.
    #[inline]
    pub fn basis(&self, s: f64, t: f64, out: &mut [f64]) {
        let mut a = [0.0; 16];
        let mut b = [0.0; 16];
        let (nu, nv) = (self.bu.n, self.bv.n);
        self.bu.eval(s, &mut a[..nu]);
        self.bv.eval(t, &mut b[..nv]);
        for i in 0..nu {
            for j in 0..nv {
                out[i * nv + j] = a[i] * b[j];
            }
        }
    }

    pub(crate) fn gauss(&self, order: usize) -> &CellQuad {
        self.quad[order.min(MAX_ORDER)].get_or_init(|| {
            let order = order.min(MAX_ORDER);
            let (g, w) = gauss_legendre_unit::<f64>(order);
            let nb = self.nb();
            let mut q = CellQuad { x: vec![], n: vec![], w: vec![], basis: vec![0.0; order * order * nb] };
            for (i, &s) in g.iter().enumerate() {
                for (j, &t) in g.iter().enumerate() {
                    let p = self.point(s, t);
                    let k = q.x.len();
                    self.basis(s, t, &mut q.basis[k * nb..(k + 1) * nb]);
                    q.x.push(p.x);
                    q.n.push(p.normal);
                    q.w.push(w[i] * w[j] * p.measure);
                }
            }
            q
        })
    }
}

/// Patchwise discontinuous spline space of degree `p` on the level-`l` mesh,
/// carrying the integration cells used by the boundary element method.
#[derive(Debug)]
pub struct BoundarySpace {
    surface: MultipatchSurface<f64>,
    mesh: ElementMesh<f64>,
    degree: usize,
    offsets: Vec<usize>,
    dims: Vec<(usize, usize)>,
    n: usize,
    pub cells: Vec<Cell>,
}

impl BoundarySpace {
    pub fn new(surface: &MultipatchSurface<f64>, degree: usize, level: usize) -> Result<Self> {
        if degree > 8 {
            return Err(Error::Domain(format!("density degree {degree} above 8")));
        }
        let mesh = ElementMesh::uniform(surface.len(), level);
        let mut offsets = Vec::with_capacity(surface.len());
        let mut dims = Vec::with_capacity(surface.len());
        let mut knots = Vec::with_capacity(surface.len());
        let mut n = 0;
        for i in 0..surface.len() {
            let (ku, kv) = mesh.knot_vectors(i, degree);
            offsets.push(n);
            dims.push((ku.dim(), kv.dim()));
            n += ku.dim() * kv.dim();
            knots.push((ku, kv));
        }
        let raw = integration_cells(surface, &mesh);
        let mut corner_pts = Vec::with_capacity(4 * raw.len());
        let mut cells = Vec::with_capacity(raw.len());
        for (element, el) in raw {
            let patch = surface.patch(el.patch);
            let (du_, dv_) = (el.u.1 - el.u.0, el.v.1 - el.v.0);
            let (pu, pv) = (patch.knots_u().degree(), patch.knots_v().degree());
            let map = CellMap::fit(pu.max(1), pv.max(1), |s, t| patch.eval_homogeneous(el.u.0 + s * du_, el.v.0 + t * dv_));
            let (ku, kv) = &knots[el.patch];
            let (bu, fu) = LocalBasis::fit(ku, el.u.0, el.u.1);
            let (bv, fv) = LocalBasis::fit(kv, el.v.0, el.v.1);
            let k2 = kv.dim();
            let mut dofs = Vec::with_capacity((degree + 1) * (degree + 1));
            for a in 0..=degree {
                for b in 0..=degree {
                    dofs.push(offsets[el.patch] + (fu + a) * k2 + fv + b);
                }
            }
            let mut cell = Cell {
                patch: el.patch,
                element,
                u: el.u,
                v: el.v,
                orientation: patch.orientation() as f64,
                map,
                bu,
                bv,
                dofs,
                corners: [0; 4],
                centre: [0.0; 3],
                radius: 0.0,
                quad: (0..=MAX_ORDER).map(|_| OnceLock::new()).collect(),
            };
            for (s, t) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                corner_pts.push(cell.point(s, t).x);
            }
            let c = cell.point(0.5, 0.5);
            if !(c.measure > 1e-14) {
                return Err(Error::Degenerate { patch: el.patch, u: el.u.0, v: el.v.0, measure: c.measure });
            }
            cell.centre = c.x;
            let mut r: f64 = 0.0;
            for a in 0..=6 {
                for b in 0..=6 {
                    let p = cell.point(a as f64 / 6.0, b as f64 / 6.0).x;
                    let d = ((p[0] - c.x[0]).powi(2) + (p[1] - c.x[1]).powi(2) + (p[2] - c.x[2]).powi(2)).sqrt();
                    r = r.max(d);
                }
            }
            // sampled radius slightly underestimates curved cells
            cell.radius = r * 1.05;
            cells.push(cell);
        }
        let ids = vertex_ids(&corner_pts);
        for (k, cell) in cells.iter_mut().enumerate() {
            cell.corners.copy_from_slice(&ids[4 * k..4 * k + 4]);
        }
        Ok(Self { surface: surface.clone(), mesh, degree, offsets, dims, n, cells })
    }

    pub fn surface(&self) -> &MultipatchSurface<f64> {
        &self.surface
    }

    pub fn mesh(&self) -> &ElementMesh<f64> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn level(&self) -> usize {
        self.mesh.level()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn patch_offset(&self, patch: usize) -> usize {
        self.offsets[patch]
    }

    pub fn patch_dims(&self, patch: usize) -> (usize, usize) {
        self.dims[patch]
    }

    /// Cell containing the parameter point `(u, v)` of `patch` and its local coordinates.
    pub fn locate(&self, patch: usize, u: f64, v: f64) -> Option<(usize, f64, f64)> {
        self.cells.iter().enumerate().find_map(|(k, c)| {
            let inside = c.patch == patch && u >= c.u.0 && u <= c.u.1 && v >= c.v.0 && v <= c.v.1;
            inside.then(|| (k, (u - c.u.0) / (c.u.1 - c.u.0), (v - c.v.0) / (c.v.1 - c.v.0)))
        })
    }
}

/// Merges coincident points: equal ids for points closer than `1e-9` times
/// the bounding box size.
fn vertex_ids(pts: &[[f64; 3]]) -> Vec<usize> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let scale = (0..3).map(|c| hi[c] - lo[c]).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-9 * scale;
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(a.cmp(&b)));
    let mut ids = vec![usize::MAX; pts.len()];
    let mut next = 0;
    for (k, &i) in order.iter().enumerate() {
        if ids[i] != usize::MAX {
            continue;
        }
        ids[i] = next;
        for &j in &order[k + 1..] {
            if pts[j][0] - pts[i][0] > tol {
                break;
            }
            if ids[j] == usize::MAX && (0..3).all(|c| (pts[j][c] - pts[i][c]).abs() <= tol) {
                ids[j] = next;
            }
        }
        next += 1;
    }
    ids
}
