use crate::error::{Error, Result};
use crate::scalar::{dense_solve, Real};

use super::knots::{common_refinement, KnotVector};

pub type Point3<T> = [T; 3];

#[inline]
pub fn sub3<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot3<T: Real>(a: Point3<T>, b: Point3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3<T: Real>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm3<T: Real>(a: Point3<T>) -> T {
    dot3(a, a).sqrt()
}

/// Tensor-product NURBS mapping of the unit square into R^3.
///
/// Control points are stored row-major with the second parameter running
/// fastest: index `i1 * k2 + i2`. `orientation` is `+1` when the parametric
/// normal `ds/du x ds/dv` points out of the enclosed volume and `-1` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsPatch<T> {
    knots_u: KnotVector<T>,
    knots_v: KnotVector<T>,
    control: Vec<Point3<T>>,
    weights: Vec<T>,
    orientation: i8,
}

/// Point, tangents and local frame of a patch at a parameter value.
#[derive(Clone, Copy, Debug)]
pub struct PatchJet<T> {
    pub point: Point3<T>,
    pub du: Point3<T>,
    pub dv: Point3<T>,
}

impl<T: Real> PatchJet<T> {
    /// Outward unit normal and surface measure for the given orientation flag.
    pub fn frame(&self, orientation: i8) -> (Point3<T>, T) {
        let c = cross3(self.du, self.dv);
        let m = norm3(c);
        let s = if orientation < 0 { -T::one() } else { T::one() } / m;
        ([c[0] * s, c[1] * s, c[2] * s], m)
    }
}

impl<T: Real> NurbsPatch<T> {
    pub fn new(
        knots_u: KnotVector<T>,
        knots_v: KnotVector<T>,
        control: Vec<Point3<T>>,
        weights: Vec<T>,
    ) -> Result<Self> {
        let n = knots_u.dim() * knots_v.dim();
        if control.len() != n || weights.len() != n {
            return Err(Error::Geometry(format!(
                "patch expects {n} control points and weights, got {} and {}",
                control.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::Geometry("NURBS weights must be strictly positive".into()));
        }
        Ok(Self { knots_u, knots_v, control, weights, orientation: 1 })
    }

    /// Polynomial (all weights one) patch.
    pub fn bspline(knots_u: KnotVector<T>, knots_v: KnotVector<T>, control: Vec<Point3<T>>) -> Result<Self> {
        let n = control.len();
        Self::new(knots_u, knots_v, control, vec![T::one(); n])
    }

    pub fn with_orientation(mut self, orientation: i8) -> Self {
        self.orientation = if orientation < 0 { -1 } else { 1 };
        self
    }

    pub fn knots_u(&self) -> &KnotVector<T> {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &KnotVector<T> {
        &self.knots_v
    }

    pub fn control(&self) -> &[Point3<T>] {
        &self.control
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.knots_u.dim(), self.knots_v.dim())
    }

    pub fn is_polynomial(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }

    /// Returns a copy with control points replaced; weights, knots and orientation are kept.
    pub fn with_control(&self, control: Vec<Point3<T>>) -> Result<Self> {
        let mut out = Self::new(self.knots_u.clone(), self.knots_v.clone(), control, self.weights.clone())?;
        out.orientation = self.orientation;
        Ok(out)
    }

    /// Applies `f` to every control point.
    pub fn map_control(&self, f: impl Fn(Point3<T>) -> Point3<T>) -> Self {
        let mut out = self.clone();
        for c in &mut out.control {
            *c = f(*c);
        }
        out
    }

    /// Rational evaluation `sum c b b w / sum b b w`.
    pub fn eval(&self, u: T, v: T) -> Point3<T> {
        let (pu, pv) = (self.knots_u.degree(), self.knots_v.degree());
        let (su, sv) = (self.knots_u.find_span(u), self.knots_v.find_span(v));
        let mut bu = [T::zero(); 16];
        let mut bv = [T::zero(); 16];
        self.knots_u.basis_funs(su, u, &mut bu);
        self.knots_v.basis_funs(sv, v, &mut bv);
        let k2 = self.knots_v.dim();
        let mut num = [T::zero(); 3];
        let mut den = T::zero();
        for a in 0..=pu {
            let i = su - pu + a;
            for b in 0..=pv {
                let j = sv - pv + b;
                let idx = i * k2 + j;
                let f = bu[a] * bv[b] * self.weights[idx];
                let c = self.control[idx];
                num[0] = num[0] + f * c[0];
                num[1] = num[1] + f * c[1];
                num[2] = num[2] + f * c[2];
                den = den + f;
            }
        }
        [num[0] / den, num[1] / den, num[2] / den]
    }

    /// Point and both parametric tangents.
    pub fn jet(&self, u: T, v: T) -> PatchJet<T> {
        let (pu, pv) = (self.knots_u.degree(), self.knots_v.degree());
        let (su, sv) = (self.knots_u.find_span(u), self.knots_v.find_span(v));
        let mut bu = [T::zero(); 16];
        let mut du = [T::zero(); 16];
        let mut bv = [T::zero(); 16];
        let mut dv = [T::zero(); 16];
        self.knots_u.basis_funs_d1(su, u, &mut bu, &mut du);
        self.knots_v.basis_funs_d1(sv, v, &mut bv, &mut dv);
        let k2 = self.knots_v.dim();
        let z = T::zero();
        let (mut a0, mut au, mut av) = ([z; 3], [z; 3], [z; 3]);
        let (mut w0, mut wu, mut wv) = (z, z, z);
        for a in 0..=pu {
            let i = su - pu + a;
            for b in 0..=pv {
                let j = sv - pv + b;
                let idx = i * k2 + j;
                let w = self.weights[idx];
                let c = self.control[idx];
                let f0 = bu[a] * bv[b] * w;
                let fu = du[a] * bv[b] * w;
                let fv = bu[a] * dv[b] * w;
                for d in 0..3 {
                    a0[d] = a0[d] + f0 * c[d];
                    au[d] = au[d] + fu * c[d];
                    av[d] = av[d] + fv * c[d];
                }
                w0 = w0 + f0;
                wu = wu + fu;
                wv = wv + fv;
            }
        }
        let point = [a0[0] / w0, a0[1] / w0, a0[2] / w0];
        let mut tu = [z; 3];
        let mut tv = [z; 3];
        for d in 0..3 {
            tu[d] = (au[d] - wu * point[d]) / w0;
            tv[d] = (av[d] - wv * point[d]) / w0;
        }
        PatchJet { point, du: tu, dv: tv }
    }

    /// Outward unit normal and surface measure `|ds/du x ds/dv|` at `(u, v)`.
    pub fn surface_frame(&self, u: T, v: T) -> Result<(Point3<T>, T)> {
        let jet = self.jet(u, v);
        let (n, m) = jet.frame(self.orientation);
        if !(m >= T::c(1e-14)) {
            return Err(Error::Degenerate { patch: usize::MAX, u: u.to_f64_(), v: v.to_f64_(), measure: m.to_f64_() });
        }
        Ok((n, m))
    }

    /// Homogeneous numerator and weight `(sum c w b b, sum w b b)` at `(u, v)`.
    pub fn eval_homogeneous(&self, u: T, v: T) -> [T; 4] {
        let (pu, pv) = (self.knots_u.degree(), self.knots_v.degree());
        let (su, sv) = (self.knots_u.find_span(u), self.knots_v.find_span(v));
        let mut bu = [T::zero(); 16];
        let mut bv = [T::zero(); 16];
        self.knots_u.basis_funs(su, u, &mut bu);
        self.knots_v.basis_funs(sv, v, &mut bv);
        let k2 = self.knots_v.dim();
        let mut out = [T::zero(); 4];
        for a in 0..=pu {
            for b in 0..=pv {
                let idx = (su - pu + a) * k2 + sv - pv + b;
                let f = bu[a] * bv[b] * self.weights[idx];
                let c = self.control[idx];
                out[0] = out[0] + f * c[0];
                out[1] = out[1] + f * c[1];
                out[2] = out[2] + f * c[2];
                out[3] = out[3] + f;
            }
        }
        out
    }

    /// Re-expresses the patch in a larger tensor spline space. The target space
    /// must contain the current one (degree elevation and/or knot insertion),
    /// otherwise the result is only an interpolant.
    pub fn lift(&self, target_u: &KnotVector<T>, target_v: &KnotVector<T>) -> Result<Self> {
        let nu = target_u.interpolation_nodes();
        let nv = target_v.interpolation_nodes();
        let values: Vec<[T; 4]> = nu
            .iter()
            .flat_map(|&u| nv.iter().map(move |&v| (u, v)))
            .map(|(u, v)| self.eval_homogeneous(u, v))
            .collect();
        let coeffs = interpolate_tensor(target_u, target_v, &nu, &nv, &values, 4)?;
        let mut control = Vec::with_capacity(coeffs.len());
        let mut weights = Vec::with_capacity(coeffs.len());
        for h in coeffs {
            weights.push(h[3]);
            control.push([h[0] / h[3], h[1] / h[3], h[2] / h[3]]);
        }
        let mut out = Self::new(target_u.clone(), target_v.clone(), control, weights)?;
        out.orientation = self.orientation;
        Ok(out)
    }

    /// Smallest tensor spline space of the given degrees containing this patch
    /// and a spline space on the given knot vectors.
    pub fn common_space(&self, other_u: &KnotVector<T>, other_v: &KnotVector<T>, pu: usize, pv: usize) -> (KnotVector<T>, KnotVector<T>) {
        (common_refinement(&self.knots_u, other_u, pu), common_refinement(&self.knots_v, other_v, pv))
    }

    /// Parameter-domain breakpoints in both directions.
    pub fn breakpoints(&self) -> (Vec<T>, Vec<T>) {
        (self.knots_u.breakpoints(), self.knots_v.breakpoints())
    }
}

/// Tensor interpolation: finds coefficients `X` (row-major `k1 x k2`, `W`
/// components) with `sum_ij X_ij b_i(u_a) b_j(v_b) = F_ab`.
pub fn interpolate_tensor<T: Real, const W: usize>(
    ku: &KnotVector<T>,
    kv: &KnotVector<T>,
    nu: &[T],
    nv: &[T],
    values: &[[T; W]],
    width: usize,
) -> Result<Vec<[T; W]>> {
    debug_assert_eq!(width, W);
    let flat: Vec<T> = values.iter().flat_map(|v| v.iter().copied()).collect();
    let x = interpolate_tensor_dyn(ku, kv, nu, nv, &flat, W)?;
    Ok(x.chunks(W).map(|c| std::array::from_fn(|i| c[i])).collect())
}

/// As [`interpolate_tensor`] with a runtime number of components; `values`
/// is row-major `(k1 * k2) x width`.
pub fn interpolate_tensor_dyn<T: Real>(
    ku: &KnotVector<T>,
    kv: &KnotVector<T>,
    nu: &[T],
    nv: &[T],
    values: &[T],
    width: usize,
) -> Result<Vec<T>> {
    let (k1, k2) = (ku.dim(), kv.dim());
    let w = width;
    if nu.len() != k1 || nv.len() != k2 || values.len() != k1 * k2 * w {
        return Err(Error::DimensionMismatch { expected: k1 * k2 * w, found: values.len() });
    }
    let bu = ku.collocation(nu);
    let bv = kv.collocation(nv);
    // solve along u for every (b, component) column
    let m1 = k2 * w;
    let y = dense_solve(k1, bu, values.to_vec(), m1).ok_or_else(|| Error::Geometry("singular collocation in u".into()))?;
    // solve along v for every (i, component)
    let m2 = k1 * w;
    let mut rhs2 = vec![T::zero(); k2 * m2];
    for i in 0..k1 {
        for b in 0..k2 {
            for c in 0..w {
                rhs2[b * m2 + i * w + c] = y[i * m1 + b * w + c];
            }
        }
    }
    let x = dense_solve(k2, bv, rhs2, m2).ok_or_else(|| Error::Geometry("singular collocation in v".into()))?;
    let mut out = vec![T::zero(); k1 * k2 * w];
    for i in 0..k1 {
        for j in 0..k2 {
            for c in 0..w {
                out[(i * k2 + j) * w + c] = x[j * m2 + i * w + c];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> NurbsPatch<f64> {
        let k = KnotVector::uniform(1, 1);
        NurbsPatch::bspline(
            k.clone(),
            k,
            vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn bilinear_reproduction() {
        let p = unit_square();
        let x = p.eval(0.5, 0.5);
        assert_eq!(x, [0.5, 0.5, 0.0]);
        let (n, m) = p.surface_frame(0.3, 0.8).unwrap();
        assert_eq!(n, [0.0, 0.0, 1.0]);
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_scales_measure() {
        let p = unit_square().map_control(|c| [2.0 * c[0], 2.0 * c[1], c[2]]);
        let (n, m) = p.surface_frame(0.2, 0.6).unwrap();
        assert_eq!(n, [0.0, 0.0, 1.0]);
        assert!((m - 4.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_frame_is_reported() {
        let k = KnotVector::uniform(1, 1);
        let p = NurbsPatch::bspline(k.clone(), k, vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(p.surface_frame(0.5, 0.5), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let k = KnotVector::<f64>::uniform(1, 1);
        assert!(NurbsPatch::new(k.clone(), k, vec![[0.0; 3]; 4], vec![1.0, 0.0, 1.0, 1.0]).is_err());
    }

    /// Quarter annulus with radii 1 and 2: rational quadratic in u (angle), linear in v (radius).
    fn quarter_annulus() -> NurbsPatch<f64> {
        let ku = KnotVector::uniform(2, 1);
        let kv = KnotVector::uniform(1, 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut control = Vec::new();
        let mut weights = Vec::new();
        for (c, w) in [([1.0, 0.0, 0.0], 1.0), ([1.0, 1.0, 0.0], s), ([0.0, 1.0, 0.0], 1.0)] {
            for r in [1.0, 2.0] {
                control.push([c[0] * r, c[1] * r, 0.0]);
                weights.push(w);
            }
        }
        NurbsPatch::new(ku, kv, control, weights).unwrap()
    }

    #[test]
    fn rational_quarter_annulus_matches_direct_evaluation() {
        let p = quarter_annulus();
        // independent rational quadratic Bezier evaluation
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let b = [(1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t];
            let w = [1.0, s, 1.0];
            let den = b[0] * w[0] + b[1] * w[1] + b[2] * w[2];
            let x = (b[0] * w[0] + b[1] * w[1]) / den;
            let y = (b[1] * w[1] + b[2] * w[2]) / den;
            let r = 1.5;
            let q = p.eval(t, 0.5);
            assert!((q[0] - r * x).abs() < 1e-14 && (q[1] - r * y).abs() < 1e-14);
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - r).abs() < 1e-14);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let p = quarter_annulus();
        let h = 1e-6;
        let jet = p.jet(0.37, 0.61);
        let fu = sub3(p.eval(0.37 + h, 0.61), p.eval(0.37 - h, 0.61));
        let fv = sub3(p.eval(0.37, 0.61 + h), p.eval(0.37, 0.61 - h));
        for d in 0..3 {
            assert!((fu[d] / (2.0 * h) - jet.du[d]).abs() < 1e-7);
            assert!((fv[d] / (2.0 * h) - jet.dv[d]).abs() < 1e-7);
        }
    }

    #[test]
    fn lifting_preserves_the_mapping() {
        let p = quarter_annulus();
        let (tu, tv) = p.common_space(&KnotVector::uniform(2, 4), &KnotVector::uniform(2, 4), 3, 2);
        let q = p.lift(&tu, &tv).unwrap();
        for i in 0..=7 {
            for j in 0..=7 {
                let (u, v) = (i as f64 / 7.0, j as f64 / 7.0);
                let a = p.eval(u, v);
                let b = q.eval(u, v);
                assert!(norm3(sub3(a, b)) < 1e-13);
            }
        }
    }
}
