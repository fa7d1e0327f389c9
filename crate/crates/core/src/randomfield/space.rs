use crate::error::{Error, Result};
use crate::geometry::{integration_cells, Edge, ElementMesh, KnotVector, MultipatchSurface};
use crate::quadrature::gauss_legendre_unit;

/// Scalar spline space of degree `p` on the level-`l` mesh of a multipatch
/// surface, either patchwise discontinuous or globally continuous.
///
/// Local (shape) functions are numbered patch by patch, `i1 * k2 + i2` inside
/// a patch. The local-to-global map identifies shape functions that coincide
/// along glued edges when the space is continuous.
#[derive(Clone, Debug)]
pub struct SplineSpace {
    surface: MultipatchSurface<f64>,
    mesh: ElementMesh<f64>,
    degree: usize,
    continuous: bool,
    knots: Vec<(KnotVector<f64>, KnotVector<f64>)>,
    offsets: Vec<usize>,
    global: Vec<usize>,
    n_global: usize,
}

/// Quadrature points of a spline space on its integration cells, with the
/// nonzero local shape functions at every point.
#[derive(Clone, Debug)]
pub struct SpaceQuadrature {
    pub x: Vec<[f64; 3]>,
    pub w: Vec<f64>,
    pub patch: Vec<usize>,
    pub uv: Vec<(f64, f64)>,
    /// Shape functions per point.
    pub nb: usize,
    pub basis: Vec<f64>,
    pub local: Vec<usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl SplineSpace {
    pub fn new(surface: &MultipatchSurface<f64>, degree: usize, level: usize, continuous: bool) -> Result<Self> {
        if continuous && degree == 0 {
            return Err(Error::Domain("a continuous spline space needs degree >= 1".into()));
        }
        let mesh = ElementMesh::uniform(surface.len(), level);
        let knots: Vec<_> = (0..surface.len()).map(|i| mesh.knot_vectors(i, degree)).collect();
        let mut offsets = Vec::with_capacity(knots.len() + 1);
        let mut n = 0;
        for (ku, kv) in &knots {
            offsets.push(n);
            n += ku.dim() * kv.dim();
        }
        offsets.push(n);
        let mut uf = UnionFind((0..n).collect());
        if continuous {
            for g in surface.glue() {
                let ea = edge_functions(&knots[g.a.0], g.a.1, offsets[g.a.0]);
                let mut eb = edge_functions(&knots[g.b.0], g.b.1, offsets[g.b.0]);
                if ea.len() != eb.len() {
                    return Err(Error::Geometry(format!(
                        "glued edges of patches {} and {} carry different spline spaces",
                        g.a.0, g.b.0
                    )));
                }
                if g.reversed {
                    eb.reverse();
                }
                for (a, b) in ea.into_iter().zip(eb) {
                    uf.union(a, b);
                }
            }
        }
        let mut global = vec![usize::MAX; n];
        let mut root_id = vec![usize::MAX; n];
        let mut n_global = 0;
        for i in 0..n {
            let r = uf.find(i);
            if root_id[r] == usize::MAX {
                root_id[r] = n_global;
                n_global += 1;
            }
            global[i] = root_id[r];
        }
        Ok(Self { surface: surface.clone(), mesh, degree, continuous, knots, offsets, global, n_global })
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

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn knots(&self, patch: usize) -> &(KnotVector<f64>, KnotVector<f64>) {
        &self.knots[patch]
    }

    /// Number of shape functions (local indices).
    pub fn n_local(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn patch_offset(&self, patch: usize) -> usize {
        self.offsets[patch]
    }

    /// Dimension of the space.
    pub fn dim(&self) -> usize {
        self.n_global
    }

    pub fn global_index(&self, local: usize) -> usize {
        self.global[local]
    }

    pub fn local_to_global(&self) -> &[usize] {
        &self.global
    }

    /// Nonzero shape functions at `(u, v)` on `patch`: local indices and values.
    pub fn eval_local(&self, patch: usize, u: f64, v: f64, idx: &mut Vec<usize>, val: &mut Vec<f64>) {
        let (ku, kv) = &self.knots[patch];
        let p = self.degree;
        let (su, sv) = (ku.find_span(u), kv.find_span(v));
        let mut bu = [0.0; 16];
        let mut bv = [0.0; 16];
        ku.basis_funs(su, u, &mut bu);
        kv.basis_funs(sv, v, &mut bv);
        let k2 = kv.dim();
        idx.clear();
        val.clear();
        for a in 0..=p {
            for b in 0..=p {
                idx.push(self.offsets[patch] + (su - p + a) * k2 + sv - p + b);
                val.push(bu[a] * bv[b]);
            }
        }
    }

    /// Tensor Gauss quadrature of the given order on every integration cell.
    pub fn quadrature(&self, order: usize) -> Result<SpaceQuadrature> {
        let (gx, gw) = gauss_legendre_unit::<f64>(order);
        let cells = integration_cells(&self.surface, &self.mesh);
        let nb = (self.degree + 1) * (self.degree + 1);
        let mut q = SpaceQuadrature {
            x: Vec::new(),
            w: Vec::new(),
            patch: Vec::new(),
            uv: Vec::new(),
            nb,
            basis: Vec::new(),
            local: Vec::new(),
        };
        let (mut idx, mut val) = (Vec::new(), Vec::new());
        for (_, c) in cells {
            let (du, dv) = (c.u.1 - c.u.0, c.v.1 - c.v.0);
            for (a, &s) in gx.iter().enumerate() {
                for (b, &t) in gx.iter().enumerate() {
                    let (u, v) = (c.u.0 + du * s, c.v.0 + dv * t);
                    let (_, m) = self.surface.surface_frame(c.patch, u, v)?;
                    q.x.push(self.surface.patch(c.patch).eval(u, v));
                    q.w.push(gw[a] * gw[b] * du * dv * m);
                    q.patch.push(c.patch);
                    q.uv.push((u, v));
                    self.eval_local(c.patch, u, v, &mut idx, &mut val);
                    q.basis.extend_from_slice(&val);
                    q.local.extend_from_slice(&idx);
                }
            }
        }
        Ok(q)
    }
}

impl SpaceQuadrature {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Shape functions that do not vanish on an edge, in edge-coordinate order.
fn edge_functions(knots: &(KnotVector<f64>, KnotVector<f64>), edge: Edge, offset: usize) -> Vec<usize> {
    let (k1, k2) = (knots.0.dim(), knots.1.dim());
    match edge {
        Edge::U0 => (0..k2).map(|j| offset + j).collect(),
        Edge::U1 => (0..k2).map(|j| offset + (k1 - 1) * k2 + j).collect(),
        Edge::V0 => (0..k1).map(|i| offset + i * k2).collect(),
        Edge::V1 => (0..k1).map(|i| offset + i * k2 + k2 - 1).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin;

    #[test]
    fn continuous_cube_dimensions() {
        let cube = builtin::cube::<f64>();
        // vertices + edge interiors + face interiors
        for (p, level) in [(1, 0), (2, 0), (2, 1), (3, 2)] {
            let s = SplineSpace::new(&cube, p, level, true).unwrap();
            let k = (1usize << level) + p;
            let expected = 8 + 12 * (k - 2) + 6 * (k - 2) * (k - 2);
            assert_eq!(s.dim(), expected, "p={p} level={level}");
            let d = SplineSpace::new(&cube, p, level, false).unwrap();
            assert_eq!(d.dim(), 6 * k * k);
        }
    }

    #[test]
    fn identified_functions_agree_on_edges() {
        let cube = builtin::cube::<f64>();
        let s = SplineSpace::new(&cube, 2, 1, true).unwrap();
        // every global function evaluated from two glued patches gives the same value
        let (mut ia, mut va, mut ib, mut vb) = (vec![], vec![], vec![], vec![]);
        for g in cube.glue() {
            for k in 0..9 {
                let t = k as f64 / 8.0;
                let tb = if g.reversed { 1.0 - t } else { t };
                let (ua, wa) = g.a.1.point(t);
                let (ub, wb) = g.b.1.point(tb);
                s.eval_local(g.a.0, ua, wa, &mut ia, &mut va);
                s.eval_local(g.b.0, ub, wb, &mut ib, &mut vb);
                let mut fa = vec![0.0; s.dim()];
                let mut fb = vec![0.0; s.dim()];
                for (i, v) in ia.iter().zip(&va) {
                    fa[s.global_index(*i)] += v;
                }
                for (i, v) in ib.iter().zip(&vb) {
                    fb[s.global_index(*i)] += v;
                }
                for (x, y) in fa.iter().zip(&fb) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn degree_zero_cannot_be_continuous() {
        assert!(SplineSpace::new(&builtin::cube::<f64>(), 0, 1, true).is_err());
    }
}
