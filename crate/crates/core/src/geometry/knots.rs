use crate::error::{Error, Result};
use crate::scalar::{dense_solve, Real};

/// Locally quasi-uniform `p`-open knot vector on `[0, 1]`.
///
/// The first and last `p + 1` knots are clamped to 0 and 1. `theta` is the
/// smallest constant bounding the ratio of neighbouring nonzero knot steps.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector<T> {
    degree: usize,
    knots: Vec<T>,
    theta: T,
}

impl<T: Real> KnotVector<T> {
    pub fn new(degree: usize, knots: Vec<T>) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::Geometry(format!(
                "knot vector of length {} too short for degree {p}",
                knots.len()
            )));
        }
        let k = knots.len() - p - 1;
        if k <= p {
            return Err(Error::Geometry(format!("need k > p, got k = {k}, p = {p}")));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Geometry("knots must be nondecreasing".into()));
        }
        if knots[..=p].iter().any(|&x| x != T::zero()) || knots[k..].iter().any(|&x| x != T::one()) {
            return Err(Error::Geometry("knot vector is not p-open on [0, 1]".into()));
        }
        let mut run = 0;
        for j in p + 1..k {
            if j > p + 1 && knots[j] == knots[j - 1] {
                run += 1;
            } else {
                run = 1;
            }
            if run > p + 1 {
                return Err(Error::Geometry("interior knot multiplicity exceeds p + 1".into()));
            }
        }
        let steps: Vec<T> = knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&h| h > T::zero())
            .collect();
        let mut theta = T::one();
        for w in steps.windows(2) {
            let r = w[0] / w[1];
            theta = theta.max(r).max(T::one() / r);
        }
        Ok(Self { degree, knots, theta })
    }

    /// Open knot vector with `spans` equal knot spans.
    pub fn uniform(degree: usize, spans: usize) -> Self {
        let n = spans.max(1);
        let mut knots = vec![T::zero(); degree + 1];
        for i in 1..n {
            knots.push(T::from_usize_(i) / T::from_usize_(n));
        }
        knots.extend(std::iter::repeat(T::one()).take(degree + 1));
        Self::new(degree, knots).expect("uniform knot vector is valid")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// Number of basis functions `k`.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values including 0 and 1.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for &x in &self.knots {
            if out.last().map_or(true, |&l| l != x) {
                out.push(x);
            }
        }
        out
    }

    pub fn multiplicity(&self, x: T) -> usize {
        self.knots.iter().filter(|&&k| k == x).count()
    }

    /// Number of nonempty knot spans.
    pub fn spans(&self) -> usize {
        self.breakpoints().len() - 1
    }

    /// Index `j` with `xi_j <= x < xi_{j+1}`, using the last nonempty span at `x = 1`.
    pub fn find_span(&self, x: T) -> usize {
        let p = self.degree;
        let k = self.dim();
        if x >= self.knots[k] {
            return k - 1;
        }
        if x <= self.knots[p] {
            // first nonempty span
            let mut j = p;
            while self.knots[j + 1] == self.knots[j] {
                j += 1;
            }
            return j;
        }
        let (mut lo, mut hi) = (p, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Values of the `p + 1` basis functions `b_{span-p}, ..., b_span` at `x`.
    pub fn basis_funs(&self, span: usize, x: T, out: &mut [T]) {
        let p = self.degree;
        let xi = &self.knots;
        let mut left = [T::zero(); 16];
        let mut right = [T::zero(); 16];
        out[0] = T::one();
        for j in 1..=p {
            left[j] = x - xi[span + 1 - j];
            right[j] = xi[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let tmp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            out[j] = saved;
        }
    }

    /// Values and first derivatives of the nonzero basis functions at `x`.
    pub fn basis_funs_d1(&self, span: usize, x: T, val: &mut [T], der: &mut [T]) {
        let p = self.degree;
        if p == 0 {
            val[0] = T::one();
            der[0] = T::zero();
            return;
        }
        let xi = &self.knots;
        // degree p - 1 values
        let mut lower = [T::zero(); 16];
        let sub = KnotView { knots: xi, degree: p - 1 };
        sub.basis(span, x, &mut lower[..p]);
        self.basis_funs(span, x, val);
        let pf = T::from_usize_(p);
        for r in 0..=p {
            let i = span - p + r;
            let mut d = T::zero();
            if r >= 1 {
                let den = xi[i + p] - xi[i];
                if den > T::zero() {
                    d = d + pf * lower[r - 1] / den;
                }
            }
            if r < p {
                let den = xi[i + p + 1] - xi[i + 1];
                if den > T::zero() {
                    d = d - pf * lower[r] / den;
                }
            }
            der[r] = d;
        }
    }

    /// Evaluates `b_j^p(x)` by the textbook Cox-de Boor recursion.
    ///
    /// Terms with vanishing denominators are dropped. At `x = 1` the last
    /// nonempty span is treated as closed.
    pub fn eval_bspline(&self, j: usize, x: T) -> Result<T> {
        if j >= self.dim() {
            return Err(Error::Domain(format!("basis index {j} out of range 0..{}", self.dim())));
        }
        if !(x >= T::zero() && x <= T::one()) {
            return Err(Error::Domain(format!("evaluation point {x} outside [0, 1]")));
        }
        Ok(self.cox_de_boor(j, self.degree, x))
    }

    fn cox_de_boor(&self, j: usize, p: usize, x: T) -> T {
        let xi = &self.knots;
        if p == 0 {
            let last = self.find_span(T::one());
            let inside = if x == T::one() { j == last } else { xi[j] <= x && x < xi[j + 1] };
            return if inside { T::one() } else { T::zero() };
        }
        let mut v = T::zero();
        let d1 = xi[j + p] - xi[j];
        if d1 > T::zero() {
            v = v + (x - xi[j]) / d1 * self.cox_de_boor(j, p - 1, x);
        }
        let d2 = xi[j + p + 1] - xi[j + 1];
        if d2 > T::zero() {
            v = v + (xi[j + p + 1] - x) / d2 * self.cox_de_boor(j + 1, p - 1, x);
        }
        v
    }

    /// Evaluates all `k` basis functions at `x` into a dense vector.
    pub fn eval_all(&self, x: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        let span = self.find_span(x);
        let mut loc = [T::zero(); 16];
        self.basis_funs(span, x, &mut loc);
        for r in 0..=self.degree {
            out[span - self.degree + r] = loc[r];
        }
        out
    }

    /// Greville abscissae `(xi_{j+1} + ... + xi_{j+p}) / p`.
    pub fn greville(&self) -> Vec<T> {
        let p = self.degree;
        (0..self.dim())
            .map(|j| {
                if p == 0 {
                    (self.knots[j] + self.knots[j + 1]) * T::c(0.5)
                } else {
                    self.knots[j + 1..=j + p].iter().copied().sum::<T>() / T::from_usize_(p)
                }
            })
            .collect()
    }

    /// Interpolation points for the spline space: Greville abscissae, or span
    /// midpoints for degree zero.
    pub fn interpolation_nodes(&self) -> Vec<T> {
        self.greville()
    }

    /// Collocation matrix `B[a][i] = b_i(x_a)` at the interpolation nodes, row-major.
    pub fn collocation(&self, nodes: &[T]) -> Vec<T> {
        let k = self.dim();
        let mut out = vec![T::zero(); nodes.len() * k];
        for (a, &x) in nodes.iter().enumerate() {
            out[a * k..(a + 1) * k].copy_from_slice(&self.eval_all(x));
        }
        out
    }

    /// Knot vector with every nonempty span split at its midpoint.
    pub fn refine_midpoints(&self) -> Self {
        let bp = self.breakpoints();
        let mut out = self.clone();
        for w in bp.windows(2) {
            out = out.insert_knot((w[0] + w[1]) * T::c(0.5)).0;
        }
        out
    }

    /// Boehm knot insertion. Returns the new knot vector and the matrix `R`
    /// (`new_dim x old_dim`, row-major) with `b_j^old = sum_i R[i][j] b_i^new`.
    pub fn insert_knot(&self, x: T) -> (Self, Vec<T>) {
        let p = self.degree;
        let k = self.dim();
        let span = self.find_span(x);
        let mut knots = self.knots.clone();
        knots.insert(span + 1, x);
        let new = Self::new(p, knots).expect("knot insertion keeps validity");
        let mut r = vec![T::zero(); (k + 1) * k];
        for i in 0..=k {
            if i + p <= span {
                r[i * k + i] = T::one();
            } else if i > span {
                r[i * k + i - 1] = T::one();
            } else {
                let den = self.knots[i + p] - self.knots[i];
                let alpha = if den > T::zero() { (x - self.knots[i]) / den } else { T::zero() };
                if i < k {
                    r[i * k + i] = alpha;
                }
                if i >= 1 {
                    r[i * k + i - 1] = T::one() - alpha;
                }
            }
        }
        (new, r)
    }

    /// Refinement matrix from `self` into `fine` (which must contain `self`),
    /// computed by interpolation at the fine Greville points.
    pub fn refinement_matrix(&self, fine: &Self) -> Result<Vec<T>> {
        let nodes = fine.interpolation_nodes();
        let kf = fine.dim();
        let kc = self.dim();
        let a = fine.collocation(&nodes);
        let b = self.collocation(&nodes);
        dense_solve(kf, a, b, kc).ok_or_else(|| Error::Geometry("singular collocation matrix".into()))
    }
}

struct KnotView<'a, T> {
    knots: &'a [T],
    degree: usize,
}

impl<T: Real> KnotView<'_, T> {
    /// Basis functions of the lower degree on the same knot array; the span
    /// index refers to the full-degree knot vector.
    fn basis(&self, span: usize, x: T, out: &mut [T]) {
        let p = self.degree;
        let xi = self.knots;
        let mut left = [T::zero(); 16];
        let mut right = [T::zero(); 16];
        out[0] = T::one();
        for j in 1..=p {
            left[j] = x - xi[span + 1 - j];
            right[j] = xi[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let den = right[r + 1] + left[j - r];
                let tmp = if den > T::zero() { out[r] / den } else { T::zero() };
                out[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            out[j] = saved;
        }
    }
}

/// Merges the breakpoints of two knot vectors and builds the smallest open
/// knot vector of degree `degree` that contains both spline spaces (after
/// degree elevation), optionally accounting for a product of the two.
pub fn common_refinement<T: Real>(a: &KnotVector<T>, b: &KnotVector<T>, degree: usize) -> KnotVector<T> {
    let mut bps: Vec<T> = a.breakpoints();
    bps.extend(b.breakpoints());
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bps.dedup();
    let mut knots = vec![T::zero(); degree + 1];
    for &x in &bps[1..bps.len() - 1] {
        let cont = |kv: &KnotVector<T>| -> Option<usize> {
            let m = kv.multiplicity(x);
            if m == 0 {
                None
            } else {
                Some(kv.degree() - m)
            }
        };
        let c = match (cont(a), cont(b)) {
            (Some(x), Some(y)) => x.min(y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => unreachable!(),
        };
        let mult = degree.saturating_sub(c).max(1);
        knots.extend(std::iter::repeat(x).take(mult));
    }
    knots.extend(std::iter::repeat(T::one()).take(degree + 1));
    KnotVector::new(degree, knots).expect("merged knot vector is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_zero_indicator() {
        let kv = KnotVector::new(0, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(kv.eval_bspline(0, 0.25).unwrap(), 1.0);
        assert_eq!(kv.eval_bspline(1, 0.25).unwrap(), 0.0);
        assert_eq!(kv.eval_bspline(1, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_value_matches_hand_recursion() {
        // Independent evaluation: b_1^2 on [0,0,0,0.5,1,1,1] at x = 0.5.
        // b_1^2 = x/0.5 * b_1^1 + (1-x)/1 * b_2^1 with b_1^1(0.5)=0, b_2^1(0.5)=1 (x/0.5 ramp ends)
        // so b_1^2(0.5) = 0.5.
        let kv = KnotVector::<f64>::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        let v = kv.eval_bspline(1, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let fast = kv.eval_all(0.5);
        assert!((fast[1] - v).abs() < 1e-15);
    }

    #[test]
    fn index_out_of_range_is_domain_error() {
        let kv = KnotVector::<f64>::uniform(2, 2);
        assert!(matches!(kv.eval_bspline(4, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 0.7, 0.3, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn theta_of_graded_vector() {
        let kv = KnotVector::<f64>::new(1, vec![0.0, 0.0, 0.2, 0.6, 1.0, 1.0]).unwrap();
        assert!((kv.theta() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_support_is_exact() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0]).unwrap();
        for j in 0..kv.dim() {
            let (lo, hi) = (kv.knots()[j], kv.knots()[j + 3]);
            for i in 0..=200 {
                let x = i as f64 / 200.0;
                if x < lo || x > hi {
                    assert_eq!(kv.eval_bspline(j, x).unwrap(), 0.0, "j={j} x={x}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kv = KnotVector::<f64>::new(3, vec![0.0, 0.0, 0.0, 0.0, 0.3, 0.55, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let h = 1e-6;
        for &x in &[0.1, 0.4, 0.7, 0.95] {
            let span = kv.find_span(x);
            let mut v = [0.0; 4];
            let mut d = [0.0; 4];
            kv.basis_funs_d1(span, x, &mut v, &mut d);
            let plus = kv.eval_all(x + h);
            let minus = kv.eval_all(x - h);
            for r in 0..4 {
                let j = span - 3 + r;
                let fd = (plus[j] - minus[j]) / (2.0 * h);
                assert!((fd - d[r]).abs() < 1e-6, "x={x} r={r} {fd} {}", d[r]);
            }
        }
    }

    #[test]
    fn knot_insertion_reproduces_coarse_basis() {
        let coarse = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.4, 1.0, 1.0, 1.0]).unwrap();
        let (fine, r) = coarse.insert_knot(0.7);
        let (kf, kc) = (fine.dim(), coarse.dim());
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let bc = coarse.eval_all(x);
            let bf = fine.eval_all(x);
            for j in 0..kc {
                let rep: f64 = (0..kf).map(|a| r[a * kc + j] * bf[a]).sum();
                assert!((rep - bc[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn nestedness_under_midpoint_refinement() {
        let mut kv = KnotVector::<f64>::uniform(2, 1);
        for _ in 0..3 {
            let fine = kv.refine_midpoints();
            assert_eq!(fine.spans(), 2 * kv.spans());
            let r = kv.refinement_matrix(&fine).unwrap();
            let (kf, kc) = (fine.dim(), kv.dim());
            let mut resid: f64 = 0.0;
            for i in 0..=300 {
                let x = i as f64 / 300.0;
                let bc = kv.eval_all(x);
                let bf = fine.eval_all(x);
                for j in 0..kc {
                    let rep: f64 = (0..kf).map(|a| r[a * kc + j] * bf[a]).sum();
                    resid = resid.max((rep - bc[j]).abs());
                }
            }
            assert!(resid < 1e-10, "{resid}");
            kv = fine;
        }
    }

    #[test]
    fn common_refinement_for_product() {
        let g = KnotVector::<f64>::uniform(1, 1);
        let d = KnotVector::<f64>::uniform(2, 2);
        let t = common_refinement(&g, &d, 3);
        // continuity at 0.5 is C^1 (from d), degree 3 -> multiplicity 2
        assert_eq!(t.multiplicity(0.5), 2);
        assert_eq!(t.dim(), 6);
    }

    #[test]
    fn works_in_single_precision() {
        let kv = KnotVector::<f32>::uniform(2, 3);
        let s: f32 = kv.eval_all(0.3).iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    fn arb_knots() -> impl Strategy<Value = KnotVector<f64>> {
        (0usize..4, proptest::collection::vec(0.01f64..1.0, 1..6)).prop_map(|(p, steps)| {
            let total: f64 = steps.iter().sum();
            let mut interior = Vec::new();
            let mut acc = 0.0;
            for s in &steps[..steps.len() - 1] {
                acc += s / total;
                interior.push(acc);
            }
            let mut knots = vec![0.0; p + 1];
            knots.extend(interior);
            knots.extend(vec![1.0; p + 1]);
            KnotVector::new(p, knots).unwrap()
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity(kv in arb_knots(), xs in proptest::collection::vec(0.0f64..=1.0, 100)) {
            for x in xs {
                let s: f64 = kv.eval_all(x).iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                let r: f64 = (0..kv.dim()).map(|j| kv.eval_bspline(j, x).unwrap()).sum();
                prop_assert!((r - 1.0).abs() <= 1e-12);
            }
            let s1: f64 = kv.eval_all(1.0).iter().sum();
            prop_assert!((s1 - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn fast_and_recursive_agree(kv in arb_knots(), x in 0.0f64..=1.0) {
            let fast = kv.eval_all(x);
            for (j, f) in fast.iter().enumerate() {
                let slow = kv.eval_bspline(j, x).unwrap();
                prop_assert!((f - slow).abs() < 1e-13);
                prop_assert!(slow >= 0.0);
            }
        }
    }
}
