//! Built-in closed multipatch surfaces.
//!
//! Every generator returns six patches, one per face of an axis-aligned box,
//! with outward orientation flags. Face `(k, side)` is parametrized along the
//! axes `(k + 1) % 3` and `(k + 2) % 3`.
//!
//! The sphere uses the central projection of the cube `[-1, 1]^3`. Its
//! homogeneous numerator `(s, 2u - 1, 2v - 1)` is exact in the biquadratic
//! space, while the weight `sqrt(1 + a^2 + b^2)` is interpolated at Greville
//! points on `spans` uniform knot spans. The maximal radial error is about
//! `3.5e-2`, `3.4e-3`, `2.1e-4` and `2.2e-5` for 2, 4, 8 and 16 spans.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::knots::KnotVector;
use super::multipatch::MultipatchSurface;
use super::patch::{interpolate_tensor, NurbsPatch, Point3};

/// Default knot spans per direction for the sphere.
pub const SPHERE_SPANS: usize = 8;

fn face_frame(k: usize) -> (usize, usize) {
    ((k + 1) % 3, (k + 2) % 3)
}

/// Boundary of the box `[lo, hi]` as six bilinear patches.
pub fn cuboid_shell<T: Real>(lo: Point3<T>, hi: Point3<T>) -> Result<MultipatchSurface<T>> {
    if (0..3).any(|d| !(hi[d] > lo[d])) {
        return Err(Error::Geometry("cuboid corners must satisfy lo < hi".into()));
    }
    let kv = KnotVector::uniform(1, 1);
    let mut patches = Vec::with_capacity(6);
    for k in 0..3 {
        let (i, j) = face_frame(k);
        for (side, orient) in [(lo[k], -1i8), (hi[k], 1)] {
            let mut control = Vec::with_capacity(4);
            for a in [lo[i], hi[i]] {
                for b in [lo[j], hi[j]] {
                    let mut c = [T::zero(); 3];
                    c[k] = side;
                    c[i] = a;
                    c[j] = b;
                    control.push(c);
                }
            }
            patches.push(NurbsPatch::bspline(kv.clone(), kv.clone(), control)?.with_orientation(orient));
        }
    }
    MultipatchSurface::new(patches)
}

/// Boundary of the unit cube `[0, 1]^3`.
pub fn cube<T: Real>() -> MultipatchSurface<T> {
    cuboid_shell([T::zero(); 3], [T::one(); 3]).expect("unit cube is valid")
}

/// Unit sphere as six rational biquadratic patches on `spans` knot spans each.
pub fn sphere<T: Real>(spans: usize) -> MultipatchSurface<T> {
    let kv = KnotVector::<T>::uniform(2, spans.max(1));
    let g = kv.greville();
    let n = g.len();
    let two = T::c(2.0);
    let weight_samples: Vec<[T; 1]> = g
        .iter()
        .flat_map(|&u| g.iter().map(move |&v| (u, v)))
        .map(|(u, v)| {
            let (a, b) = (two * u - T::one(), two * v - T::one());
            [(T::one() + a * a + b * b).sqrt()]
        })
        .collect();
    let w = interpolate_tensor(&kv, &kv, &g, &g, &weight_samples, 1).expect("greville interpolation");
    let mut patches = Vec::with_capacity(6);
    for k in 0..3 {
        let (i, j) = face_frame(k);
        for (s, orient) in [(-T::one(), -1i8), (T::one(), 1)] {
            let mut control = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    let wt = w[a * n + b][0];
                    let mut c = [T::zero(); 3];
                    c[k] = s / wt;
                    c[i] = (two * g[a] - T::one()) / wt;
                    c[j] = (two * g[b] - T::one()) / wt;
                    control.push(c);
                    weights.push(wt);
                }
            }
            let p = NurbsPatch::new(kv.clone(), kv.clone(), control, weights).expect("positive weights");
            patches.push(p.with_orientation(orient));
        }
    }
    MultipatchSurface::new(patches).expect("sphere patches")
}

/// Looks up a built-in by name: `cube`, `sphere`, or `cuboid_shell` (unit box).
pub fn by_name<T: Real>(name: &str) -> Result<MultipatchSurface<T>> {
    match name {
        "cube" => Ok(cube()),
        "sphere" => Ok(sphere(SPHERE_SPANS)),
        "cuboid_shell" => Ok(cube()),
        other => Err(Error::Geometry(format!("unknown built-in geometry '{other}'"))),
    }
}
