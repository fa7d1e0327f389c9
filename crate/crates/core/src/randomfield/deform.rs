use crate::error::{Error, Result};
use crate::geometry::{common_refinement, cross3, dot3, interpolate_tensor_dyn, KnotVector, MultipatchSurface, NurbsPatch};

use super::kl::KlExpansion;

/// Per-patch data of the spline space in which deformed patches live.
#[derive(Clone, Debug)]
struct PatchLift {
    ku: KnotVector<f64>,
    kv: KnotVector<f64>,
    orientation: i8,
    /// Homogeneous coefficients of the undeformed patch, `[w x, w y, w z, w]`.
    h0: Vec<[f64; 4]>,
    /// Row-major `n_target x n_shape`: coefficients of `w b_j` in the target space.
    map: Vec<f64>,
    n_shape: usize,
}

/// Maps parameter points `y` to deformed surfaces `s(x) + chi(x, y)`.
///
/// The displacement space is merged with each geometry patch into a common
/// spline space: the larger degree on the merged knots for polynomial
/// patches, and the summed degree for rational ones, where the displacement
/// is multiplied by the weight function. Control points are affine in `y`.
#[derive(Clone, Debug)]
pub struct DeformationModel {
    base: MultipatchSurface<f64>,
    kl: KlExpansion,
    lifts: Vec<PatchLift>,
}

impl DeformationModel {
    pub fn new(kl: KlExpansion) -> Result<Self> {
        let base = kl.space.surface().clone();
        let p_d = kl.space.degree();
        let mut lifts = Vec::with_capacity(base.len());
        for (i, patch) in base.patches().iter().enumerate() {
            let (du, dv) = kl.space.knots(i).clone();
            let rational = !patch.is_polynomial();
            let deg = |pg: usize| if rational { pg + p_d } else { pg.max(p_d) };
            let ku = common_refinement(patch.knots_u(), &du, deg(patch.knots_u().degree()));
            let kv = common_refinement(patch.knots_v(), &dv, deg(patch.knots_v().degree()));
            let (nu, nv) = (ku.interpolation_nodes(), kv.interpolation_nodes());
            let nt = nu.len() * nv.len();
            let mut hvals = Vec::with_capacity(nt * 4);
            let n_shape = du.dim() * dv.dim();
            let mut svals = vec![0.0; nt * n_shape];
            let (mut idx, mut val) = (Vec::new(), Vec::new());
            let off = kl.space.patch_offset(i);
            for (a, &u) in nu.iter().enumerate() {
                for (b, &v) in nv.iter().enumerate() {
                    let h = patch.eval_homogeneous(u, v);
                    hvals.extend_from_slice(&h);
                    kl.space.eval_local(i, u, v, &mut idx, &mut val);
                    let row = a * nv.len() + b;
                    for (j, bj) in idx.iter().zip(&val) {
                        svals[row * n_shape + (j - off)] = h[3] * bj;
                    }
                }
            }
            let h = interpolate_tensor_dyn(&ku, &kv, &nu, &nv, &hvals, 4)?;
            let map = interpolate_tensor_dyn(&ku, &kv, &nu, &nv, &svals, n_shape)?;
            lifts.push(PatchLift {
                ku,
                kv,
                orientation: patch.orientation(),
                h0: h.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect(),
                map,
                n_shape,
            });
        }
        Ok(Self { base, kl, lifts })
    }

    pub fn kl(&self) -> &KlExpansion {
        &self.kl
    }

    pub fn base(&self) -> &MultipatchSurface<f64> {
        &self.base
    }

    /// Surface for a given displacement coefficient vector, without validation.
    pub fn surface_from_coefficients(&self, coeffs: &[f64]) -> Result<MultipatchSurface<f64>> {
        let space = &self.kl.space;
        let mut patches = Vec::with_capacity(self.lifts.len());
        for (i, lift) in self.lifts.iter().enumerate() {
            let off = space.patch_offset(i);
            let disp: Vec<[f64; 3]> = (0..lift.n_shape)
                .map(|j| {
                    let g = space.global_index(off + j);
                    [coeffs[3 * g], coeffs[3 * g + 1], coeffs[3 * g + 2]]
                })
                .collect();
            let mut control = Vec::with_capacity(lift.h0.len());
            let mut weights = Vec::with_capacity(lift.h0.len());
            for (t, h) in lift.h0.iter().enumerate() {
                let row = &lift.map[t * lift.n_shape..(t + 1) * lift.n_shape];
                let mut x = [h[0], h[1], h[2]];
                for (r, d) in row.iter().zip(&disp) {
                    for c in 0..3 {
                        x[c] += r * d[c];
                    }
                }
                control.push([x[0] / h[3], x[1] / h[3], x[2] / h[3]]);
                weights.push(h[3]);
            }
            let p = NurbsPatch::new(lift.ku.clone(), lift.kv.clone(), control, weights)?;
            patches.push(p.with_orientation(lift.orientation));
        }
        Ok(self.base.with_patches(patches))
    }

    /// Undeformed surface represented in the deformation space.
    pub fn reference(&self) -> Result<MultipatchSurface<f64>> {
        self.surface_from_coefficients(&vec![0.0; 3 * self.kl.space.dim()])
    }

    /// Deformed surface at parameter point `y`, checked for a positive,
    /// orientation-preserving Jacobian on a 5x5 grid per knot span.
    pub fn deform(&self, y: &[f64]) -> Result<MultipatchSurface<f64>> {
        if y.iter().any(|v| !(v.abs() <= 1.0)) {
            return Err(Error::Domain("parameter point outside [-1, 1]^M".into()));
        }
        let coeffs = self.kl.coefficients(y)?;
        let s = self.surface_from_coefficients(&coeffs)?;
        self.check_jacobian(&s)?;
        Ok(s)
    }

    fn check_jacobian(&self, s: &MultipatchSurface<f64>) -> Result<()> {
        for (i, p) in s.patches().iter().enumerate() {
            let base = self.base.patch(i);
            let (bu, bv) = p.breakpoints();
            for wu in bu.windows(2) {
                for wv in bv.windows(2) {
                    for a in 0..5 {
                        for b in 0..5 {
                            let u = wu[0] + (wu[1] - wu[0]) * a as f64 / 4.0;
                            let v = wv[0] + (wv[1] - wv[0]) * b as f64 / 4.0;
                            let j = p.jet(u, v);
                            let j0 = base.jet(u, v);
                            let c = cross3(j.du, j.dv);
                            let m = dot3(c, c).sqrt();
                            if !(m >= 1e-14) || dot3(c, cross3(j0.du, j0.dv)) <= 0.0 {
                                return Err(Error::SampleRejected(format!(
                                    "deformation is not a diffeomorphism on patch {i} at ({u:.3}, {v:.3})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin, norm3, sub3, validate_multipatch};
    use crate::randomfield::kernel::gaussian_kernel;
    use crate::randomfield::kl::{compute_kl, KlSettings};

    fn model(surface: &MultipatchSurface<f64>) -> DeformationModel {
        let kl = compute_kl(surface, &gaussian_kernel(0.05, 4.0), &KlSettings { max_modes: Some(6), ..KlSettings::default() }).unwrap();
        DeformationModel::new(kl).unwrap()
    }

    #[test]
    fn zero_parameter_reproduces_reference() {
        let cube = builtin::cube::<f64>();
        let m = model(&cube);
        let s = m.deform(&[0.0; 6]).unwrap();
        assert_eq!(s, m.reference().unwrap());
        for i in 0..6 {
            let (a, b) = (s.patch(i).eval(0.3, 0.7), cube.patch(i).eval(0.3, 0.7));
            assert!(norm3(sub3(a, b)) < 1e-14);
        }
    }

    #[test]
    fn unit_parameter_adds_scaled_mode() {
        let sphere = builtin::sphere::<f64>(2);
        let m = model(&sphere);
        let mut y = [0.0; 6];
        y[0] = 1.0;
        let s = m.deform(&y).unwrap();
        let coeffs = m.kl().coefficients(&y).unwrap();
        for k in 0..50 {
            let (i, u, v) = (k % 6, (k as f64 * 0.137) % 1.0, (k as f64 * 0.291) % 1.0);
            let d = m.kl().displacement(&coeffs, i, u, v);
            let x = sub3(s.patch(i).eval(u, v), sphere.patch(i).eval(u, v));
            assert!(norm3(sub3(x, d)) < 1e-12, "{:?} {:?}", x, d);
        }
        validate_multipatch(&s, 5, 1e-12).unwrap();
    }

    #[test]
    fn affine_in_parameters() {
        let m = model(&builtin::cube::<f64>());
        let y1 = [0.5, -0.2, 0.1, 0.9, -0.7, 0.3];
        let y2 = [-0.4, 0.6, -0.8, 0.2, 0.1, -0.5];
        let a = 0.3;
        let ym: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + (1.0 - a) * q).collect();
        let (s1, s2, sm) = (m.deform(&y1).unwrap(), m.deform(&y2).unwrap(), m.deform(&ym).unwrap());
        for i in 0..6 {
            for ((c1, c2), cm) in s1.patch(i).control().iter().zip(s2.patch(i).control()).zip(sm.patch(i).control()) {
                for d in 0..3 {
                    assert!((a * c1[d] + (1.0 - a) * c2[d] - cm[d]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn folding_sample_is_rejected() {
        let cube = builtin::cube::<f64>();
        let m = model(&cube);
        let mut coeffs = vec![0.0; 3 * m.kl().space.dim()];
        // collapse one vertex far through the cube
        coeffs[0] = 5.0;
        coeffs[1] = 5.0;
        coeffs[2] = 5.0;
        let s = m.surface_from_coefficients(&coeffs).unwrap();
        assert!(matches!(m.check_jacobian(&s), Err(Error::SampleRejected(_))));
    }
}
