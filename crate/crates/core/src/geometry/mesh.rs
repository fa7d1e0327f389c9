use crate::scalar::Real;

use super::knots::KnotVector;
use super::multipatch::MultipatchSurface;

/// Rectangular element `[u0, u1] x [v0, v1]` in the parameter domain of a patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Element<T> {
    pub patch: usize,
    pub u: (T, T),
    pub v: (T, T),
}

/// Per-patch tensor element grid obtained by dyadic refinement of one
/// element per patch.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMesh<T> {
    level: usize,
    patches: usize,
    breaks: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> ElementMesh<T> {
    /// Level-0 mesh: a single element per patch.
    pub fn coarse(patches: usize) -> Self {
        let b = vec![T::zero(), T::one()];
        Self { level: 0, patches, breaks: vec![(b.clone(), b); patches] }
    }

    /// Uniform mesh with `2^level` elements per direction and patch.
    pub fn uniform(patches: usize, level: usize) -> Self {
        let mut m = Self::coarse(patches);
        for _ in 0..level {
            m = m.refine();
        }
        m
    }

    /// Splits every element into four at its edge midpoints.
    pub fn refine(&self) -> Self {
        let split = |b: &Vec<T>| -> Vec<T> {
            let mut out = Vec::with_capacity(2 * b.len() - 1);
            for w in b.windows(2) {
                out.push(w[0]);
                out.push((w[0] + w[1]) * T::c(0.5));
            }
            out.push(*b.last().unwrap());
            out
        };
        Self {
            level: self.level + 1,
            patches: self.patches,
            breaks: self.breaks.iter().map(|(u, v)| (split(u), split(v))).collect(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn patches(&self) -> usize {
        self.patches
    }

    /// Parametric mesh size: largest element side.
    pub fn h(&self) -> T {
        let mut h = T::zero();
        for (u, v) in &self.breaks {
            for w in u.windows(2).chain(v.windows(2)) {
                h = h.max(w[1] - w[0]);
            }
        }
        h
    }

    pub fn breakpoints(&self, patch: usize) -> (&[T], &[T]) {
        let (u, v) = &self.breaks[patch];
        (u, v)
    }

    pub fn elements_per_patch(&self, patch: usize) -> (usize, usize) {
        let (u, v) = &self.breaks[patch];
        (u.len() - 1, v.len() - 1)
    }

    pub fn n_elements(&self) -> usize {
        (0..self.patches).map(|i| {
            let (a, b) = self.elements_per_patch(i);
            a * b
        }).sum()
    }

    /// Elements in patch-major, then `u`-major order.
    pub fn elements(&self) -> Vec<Element<T>> {
        let mut out = Vec::with_capacity(self.n_elements());
        for (patch, (bu, bv)) in self.breaks.iter().enumerate() {
            for wu in bu.windows(2) {
                for wv in bv.windows(2) {
                    out.push(Element { patch, u: (wu[0], wu[1]), v: (wv[0], wv[1]) });
                }
            }
        }
        out
    }

    /// Open knot vectors of degree `p` with the mesh breakpoints as simple knots.
    pub fn knot_vectors(&self, patch: usize, p: usize) -> (KnotVector<T>, KnotVector<T>) {
        let (bu, bv) = &self.breaks[patch];
        (open_knots(bu, p), open_knots(bv, p))
    }

    /// Dimension of the patchwise discontinuous spline space of degree `p`.
    pub fn discontinuous_dim(&self, p: usize) -> usize {
        (0..self.patches)
            .map(|i| {
                let (a, b) = self.elements_per_patch(i);
                (a + p) * (b + p)
            })
            .sum()
    }
}

/// Elements split further at the interior knots of the geometry patches, so
/// that the mapping is smooth on every returned cell. Each cell carries the
/// index of the mesh element containing it.
pub fn integration_cells<T: Real>(surface: &MultipatchSurface<T>, mesh: &ElementMesh<T>) -> Vec<(usize, Element<T>)> {
    let mut out = Vec::new();
    for (e, el) in mesh.elements().into_iter().enumerate() {
        let p = surface.patch(el.patch);
        let (gu, gv) = p.breakpoints();
        let cut = |lo: T, hi: T, g: &[T]| -> Vec<T> {
            let mut pts = vec![lo];
            pts.extend(g.iter().copied().filter(|&x| x > lo && x < hi));
            pts.push(hi);
            pts
        };
        let su = cut(el.u.0, el.u.1, &gu);
        let sv = cut(el.v.0, el.v.1, &gv);
        for wu in su.windows(2) {
            for wv in sv.windows(2) {
                out.push((e, Element { patch: el.patch, u: (wu[0], wu[1]), v: (wv[0], wv[1]) }));
            }
        }
    }
    out
}

fn open_knots<T: Real>(breaks: &[T], p: usize) -> KnotVector<T> {
    let mut k = vec![T::zero(); p + 1];
    k.extend_from_slice(&breaks[1..breaks.len() - 1]);
    k.extend(std::iter::repeat(T::one()).take(p + 1));
    KnotVector::new(p, k).expect("mesh knot vector is valid")
}
