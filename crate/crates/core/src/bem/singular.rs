//! Regularizing coordinate transforms for pairs of unit-square cells that
//! share the whole cell, an edge or a vertex.
//!
//! Points are `(s1, t1, s2, t2, w)` on `[0,1]^4`. For the edge rules both
//! cells are parametrized so that the common edge is `t = 0` with matching
//! `s`; for the vertex rule the common vertex is `(0, 0)` in both.

use crate::quadrature::gauss_legendre_unit;

pub type Rule4 = Vec<[f64; 5]>;

fn gauss(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre_unit::<f64>(n);
    x.into_iter().zip(w).collect()
}

/// `x` ranges over the part of `[0, 1]` where `x + sign * z` stays inside.
#[inline]
fn shift(sign: f64, z: f64, xi: f64) -> (f64, f64) {
    let x = if sign > 0.0 { (1.0 - z) * xi } else { z + (1.0 - z) * xi };
    (x, x + sign * z)
}

pub fn identical(n: usize) -> Rule4 {
    let g = gauss(n);
    let mut out = Vec::with_capacity(8 * n.pow(4));
    for &s1 in &[1.0, -1.0] {
        for &s2 in &[1.0, -1.0] {
            for tri in 0..2 {
                for &(tau, wt) in &g {
                    for &(om, wo) in &g {
                        let (z1, z2) = if tri == 0 { (tau, tau * om) } else { (tau * om, tau) };
                        let jac = tau * (1.0 - z1) * (1.0 - z2);
                        for &(a, wa) in &g {
                            let (x1, y1) = shift(s1, z1, a);
                            for &(b, wb) in &g {
                                let (x2, y2) = shift(s2, z2, b);
                                out.push([x1, x2, y1, y2, wt * wo * wa * wb * jac]);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn edge(n: usize) -> Rule4 {
    let g = gauss(n);
    let mut out = Vec::with_capacity(6 * n.pow(4));
    for &sign in &[1.0, -1.0] {
        for pyr in 0..3 {
            for &(tau, wt) in &g {
                for &(o1, w1) in &g {
                    for &(o2, w2) in &g {
                        let (z, x2, y2) = match pyr {
                            0 => (tau, tau * o1, tau * o2),
                            1 => (tau * o1, tau, tau * o2),
                            _ => (tau * o1, tau * o2, tau),
                        };
                        let jac = tau * tau * (1.0 - z);
                        for &(a, wa) in &g {
                            let (x1, y1) = shift(sign, z, a);
                            out.push([x1, x2, y1, y2, wt * w1 * w2 * wa * jac]);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn vertex(n: usize) -> Rule4 {
    let g = gauss(n);
    let mut out = Vec::with_capacity(4 * n.pow(4));
    for pyr in 0..4 {
        for &(tau, wt) in &g {
            for &(a, wa) in &g {
                for &(b, wb) in &g {
                    for &(c, wc) in &g {
                        let p = [tau * a, tau * b, tau * c];
                        let mut q = [0.0; 4];
                        let mut k = 0;
                        for (i, slot) in q.iter_mut().enumerate() {
                            if i == pyr {
                                *slot = tau;
                            } else {
                                *slot = p[k];
                                k += 1;
                            }
                        }
                        out.push([q[0], q[1], q[2], q[3], wt * wa * wb * wc * tau * tau * tau]);
                    }
                }
            }
        }
    }
    out
}

/// Symmetry of the unit square: optional swap of the coordinates followed by
/// optional reflections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral {
    pub swap: bool,
    pub flip_s: bool,
    pub flip_t: bool,
}

impl Dihedral {
    pub const IDENTITY: Self = Self { swap: false, flip_s: false, flip_t: false };

    #[inline]
    pub fn apply(self, s: f64, t: f64) -> (f64, f64) {
        let (a, b) = if self.swap { (t, s) } else { (s, t) };
        (if self.flip_s { 1.0 - a } else { a }, if self.flip_t { 1.0 - b } else { b })
    }

    /// Corner index `s + 2 t` of the image of a unit-square corner.
    fn corner(self, s: usize, t: usize) -> usize {
        let (a, b) = self.apply(s as f64, t as f64);
        a as usize + 2 * b as usize
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..8).map(|k| Self { swap: k & 1 != 0, flip_s: k & 2 != 0, flip_t: k & 4 != 0 })
    }

    /// Map sending `(0,0)` to corner `origin` and, if given, `(1,0)` to corner `next`.
    pub fn placing(origin: usize, next: Option<usize>) -> Option<Self> {
        Self::all().find(|d| d.corner(0, 0) == origin && next.map_or(true, |n| d.corner(1, 0) == n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &Rule4, f: impl Fn(f64, f64, f64, f64) -> f64) -> f64 {
        rule.iter().map(|p| p[4] * f(p[0], p[1], p[2], p[3])).sum()
    }

    #[test]
    fn weights_sum_to_one() {
        for rule in [identical(3), edge(3), vertex(3)] {
            assert!((integrate(&rule, |_, _, _, _| 1.0) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn polynomials_are_integrated_exactly() {
        let f = |a: f64, b: f64, c: f64, d: f64| a * a * b + 3.0 * c * d * d - a * c + b * d;
        // closed form over [0,1]^4: 1/6 + 1/2 - 1/4 + 1/4
        let exact = 1.0 / 6.0 + 0.5;
        for rule in [identical(4), edge(4), vertex(4)] {
            assert!((integrate(&rule, f) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn coincident_singularity_in_the_plane() {
        // int int 1/|x-y| over the unit square twice, known value
        // 4/3 (1 - sqrt 2) + 4 ln(1 + sqrt 2)
        let exact = 4.0 / 3.0 * (1.0 - 2f64.sqrt()) + 4.0 * (1.0 + 2f64.sqrt()).ln();
        let r = identical(10);
        let v = integrate(&r, |a, b, c, d| 1.0 / ((a - c).powi(2) + (b - d).powi(2)).sqrt());
        assert!((v - exact).abs() < 1e-10, "{v} {exact}");
    }

    #[test]
    fn edge_and_vertex_singularities_converge() {
        // squares [0,1]^2 and its mirror across t = 0, resp. across the origin
        let edge_f = |a: f64, b: f64, c: f64, d: f64| 1.0 / ((a - c).powi(2) + (b + d).powi(2)).sqrt();
        let vert_f = |a: f64, b: f64, c: f64, d: f64| 1.0 / ((a + c).powi(2) + (b + d).powi(2)).sqrt();
        let (e1, e2) = (integrate(&edge(8), edge_f), integrate(&edge(14), edge_f));
        let (v1, v2) = (integrate(&vertex(8), vert_f), integrate(&vertex(14), vert_f));
        assert!((e1 - e2).abs() < 1e-11);
        assert!((v1 - v2).abs() < 1e-11);
        // brute-force oracle: tensor Gauss on the regularly separated vertex pair is smooth enough at high order
        let (g, w) = gauss_legendre_unit::<f64>(40);
        let mut brute = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                for k in 0..40 {
                    for l in 0..40 {
                        brute += w[i] * w[j] * w[k] * w[l] * vert_f(g[i], g[j], g[k], g[l]);
                    }
                }
            }
        }
        assert!((brute - v2).abs() < 1e-4);
    }

    #[test]
    fn dihedral_placement() {
        for origin in 0..4 {
            let d = Dihedral::placing(origin, None).unwrap();
            assert_eq!(d.corner(0, 0), origin);
        }
        let d = Dihedral::placing(3, Some(2)).unwrap();
        assert_eq!((d.corner(0, 0), d.corner(1, 0)), (3, 2));
        assert!(Dihedral::placing(0, Some(3)).is_none());
    }
}
