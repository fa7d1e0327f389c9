use crate::error::{Error, Result};
use crate::scalar::Real;

use super::patch::{norm3, sub3, NurbsPatch, Point3};

/// One of the four boundary edges of the parameter square.
///
/// `U0` is the edge `u = 0` traversed in `v`; `V0` is `v = 0` traversed in `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    U0,
    U1,
    V0,
    V1,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::U0, Edge::U1, Edge::V0, Edge::V1];

    /// Parameter point at edge coordinate `t`.
    pub fn point<T: Real>(self, t: T) -> (T, T) {
        match self {
            Edge::U0 => (T::zero(), t),
            Edge::U1 => (T::one(), t),
            Edge::V0 => (t, T::zero()),
            Edge::V1 => (t, T::one()),
        }
    }

    /// Sign of the edge direction within the counterclockwise boundary loop.
    fn loop_sign(self) -> i8 {
        match self {
            Edge::V0 | Edge::U1 => 1,
            Edge::V1 | Edge::U0 => -1,
        }
    }
}

/// Two patch edges that coincide in space. With `reversed`, edge coordinate
/// `t` on the first side meets `1 - t` on the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Glue {
    pub a: (usize, Edge),
    pub b: (usize, Edge),
    pub reversed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultipatchSurface<T> {
    patches: Vec<NurbsPatch<T>>,
    glue: Vec<Glue>,
}

const EDGE_SAMPLES: usize = 33;

impl<T: Real> MultipatchSurface<T> {
    /// Builds a surface and detects glued edges geometrically.
    pub fn new(patches: Vec<NurbsPatch<T>>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Geometry("multipatch surface needs at least one patch".into()));
        }
        let glue = detect_glue(&patches);
        Ok(Self { patches, glue })
    }

    pub fn with_glue(patches: Vec<NurbsPatch<T>>, glue: Vec<Glue>) -> Self {
        Self { patches, glue }
    }

    pub fn patches(&self) -> &[NurbsPatch<T>] {
        &self.patches
    }

    pub fn patch(&self, i: usize) -> &NurbsPatch<T> {
        &self.patches[i]
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn glue(&self) -> &[Glue] {
        &self.glue
    }

    /// Replaces the patches while keeping the glue table.
    pub fn with_patches(&self, patches: Vec<NurbsPatch<T>>) -> Self {
        Self { patches, glue: self.glue.clone() }
    }

    /// Whether every edge of every patch is glued.
    pub fn is_closed(&self) -> bool {
        self.glue.len() * 2 == self.patches.len() * 4
    }

    /// Axis-aligned bounding box of all control points.
    pub fn control_bbox(&self) -> (Point3<T>, Point3<T>) {
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in &self.patches {
            for c in p.control() {
                for d in 0..3 {
                    lo[d] = lo[d].min(c[d]);
                    hi[d] = hi[d].max(c[d]);
                }
            }
        }
        (lo, hi)
    }

    /// Outward normal and measure on patch `i`, with the patch index in errors.
    pub fn surface_frame(&self, i: usize, u: T, v: T) -> Result<(Point3<T>, T)> {
        self.patches[i].surface_frame(u, v).map_err(|e| match e {
            Error::Degenerate { u, v, measure, .. } => Error::Degenerate { patch: i, u, v, measure },
            other => other,
        })
    }

    /// Enclosed volume `1/3 int x.n` using the stored orientations.
    pub fn enclosed_volume(&self, order: usize) -> T {
        let (x, w) = crate::quadrature::gauss_legendre_unit::<T>(order);
        let mut vol = T::zero();
        for p in &self.patches {
            for (a, &u) in x.iter().enumerate() {
                for (b, &v) in x.iter().enumerate() {
                    let jet = p.jet(u, v);
                    let (n, m) = jet.frame(p.orientation());
                    vol = vol + w[a] * w[b] * m * super::patch::dot3(jet.point, n);
                }
            }
        }
        vol / T::c(3.0)
    }
}

fn edge_point<T: Real>(p: &NurbsPatch<T>, e: Edge, t: T) -> Point3<T> {
    let (u, v) = e.point(t);
    p.eval(u, v)
}

fn scale<T: Real>(patches: &[NurbsPatch<T>]) -> T {
    let mut s = T::zero();
    for p in patches {
        for c in p.control() {
            s = s.max(c[0].abs()).max(c[1].abs()).max(c[2].abs());
        }
    }
    s.max(T::one())
}

fn edges_match<T: Real>(pa: &NurbsPatch<T>, ea: Edge, pb: &NurbsPatch<T>, eb: Edge, reversed: bool, tol: T) -> bool {
    (0..EDGE_SAMPLES).all(|s| {
        let t = T::from_usize_(s) / T::from_usize_(EDGE_SAMPLES - 1);
        let tb = if reversed { T::one() - t } else { t };
        norm3(sub3(edge_point(pa, ea, t), edge_point(pb, eb, tb))) <= tol
    })
}

fn detect_glue<T: Real>(patches: &[NurbsPatch<T>]) -> Vec<Glue> {
    let tol = T::c(1e-9) * scale(patches);
    let mut used = std::collections::HashSet::new();
    let mut glue = Vec::new();
    for i in 0..patches.len() {
        for &ea in &Edge::ALL {
            if used.contains(&(i, ea)) {
                continue;
            }
            let a0 = edge_point(&patches[i], ea, T::zero());
            let a1 = edge_point(&patches[i], ea, T::one());
            'search: for j in i..patches.len() {
                for &eb in &Edge::ALL {
                    if (j == i && eb == ea) || used.contains(&(j, eb)) {
                        continue;
                    }
                    let b0 = edge_point(&patches[j], eb, T::zero());
                    let b1 = edge_point(&patches[j], eb, T::one());
                    for reversed in [false, true] {
                        let (c0, c1) = if reversed { (b1, b0) } else { (b0, b1) };
                        if norm3(sub3(a0, c0)) <= tol
                            && norm3(sub3(a1, c1)) <= tol
                            && edges_match(&patches[i], ea, &patches[j], eb, reversed, tol)
                        {
                            used.insert((i, ea));
                            used.insert((j, eb));
                            glue.push(Glue { a: (i, ea), b: (j, eb), reversed });
                            break 'search;
                        }
                    }
                }
            }
        }
    }
    glue
}

/// Checks the multipatch invariants: positive surface measure on a validation
/// grid, pointwise coincidence of glued edges, edges glued at most once, and
/// orientations that induce opposite directions on every glued edge.
pub fn validate_multipatch<T: Real>(surface: &MultipatchSurface<T>, grid: usize, tol: T) -> Result<()> {
    let g = grid.max(2);
    for i in 0..surface.len() {
        for a in 0..g {
            for b in 0..g {
                let u = T::from_usize_(a) / T::from_usize_(g - 1);
                let v = T::from_usize_(b) / T::from_usize_(g - 1);
                surface.surface_frame(i, u, v)?;
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for gl in surface.glue() {
        for side in [gl.a, gl.b] {
            if !seen.insert(side) {
                return Err(Error::Geometry(format!("edge {:?} of patch {} glued twice", side.1, side.0)));
            }
        }
        let (pa, pb) = (surface.patch(gl.a.0), surface.patch(gl.b.0));
        if !edges_match(pa, gl.a.1, pb, gl.b.1, gl.reversed, tol) {
            return Err(Error::Geometry(format!(
                "glued edges {:?}/{} and {:?}/{} do not coincide",
                gl.a.1, gl.a.0, gl.b.1, gl.b.0
            )));
        }
        let da = gl.a.1.loop_sign() * pa.orientation();
        let db = gl.b.1.loop_sign() * pb.orientation() * if gl.reversed { -1 } else { 1 };
        if da == db {
            return Err(Error::Geometry(format!(
                "inconsistent orientation across patches {} and {}",
                gl.a.0, gl.b.0
            )));
        }
    }
    if surface.is_closed() && surface.enclosed_volume(6) <= T::zero() {
        return Err(Error::Geometry("normals point into the enclosed volume".into()));
    }
    Ok(())
}
